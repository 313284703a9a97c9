#include "thermoscope/gibbs.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <sstream>

namespace thermoscope {

namespace {

constexpr double kLambdaCap = 300.0;  // beyond this the state is saturated at the manifold boundary

RVector expectations(const std::vector<HermitianOperator>& ops, const DensityMatrix& rho) {
    RVector v(ops.size());
    for (std::size_t a = 0; a < ops.size(); ++a) v[a] = expectation(ops[a], rho);
    return v;
}

struct MomentSolution {
    RVector lagrange;
    DensityMatrix state;
    double log_partition;
};

// Damped Newton iteration on the moment-matching residual
// r_a(lambda) = <G_a>_omega(lambda) - target_a with exact Jacobian -K(lambda).
MomentSolution solve_moments(const std::vector<HermitianOperator>& ops, const RVector& targets,
                             const DensityMatrix& reference, const char* context) {
    const int p = static_cast<int>(ops.size());
    const HermitianOperator ref_exp = reference_exponent(reference);

    auto build = [&](const RVector& lambda) {
        CMatrix expo = ref_exp.matrix();
        for (int a = 0; a < p; ++a) expo -= lambda[a] * ops[a].matrix();
        return gibbs_normalize_logz(HermitianOperator(std::move(expo)));
    };

    RVector lambda = RVector::Zero(p);
    auto [state, logz] = build(lambda);
    if (p == 0) return {lambda, state, logz};

    RVector resid = expectations(ops, state) - targets;
    double rmax = resid.cwiseAbs().maxCoeff();
    std::vector<double> history{rmax};

    for (int iter = 0; iter < kMomentMaxIter && rmax > kMomentTol; ++iter) {
        const RMatrix k = kubo_mori_matrix(ops, state);
        Eigen::LDLT<RMatrix> ldlt(k);
        if (ldlt.info() != Eigen::Success) {
            std::ostringstream os;
            os << context << ": correlation matrix factorization failed at iteration " << iter;
            throw SolverDiverged(os.str(), history);
        }
        const RVector step = ldlt.solve(resid);
        if (!step.allFinite()) {
            std::ostringstream os;
            os << context << ": non-finite Newton step at iteration " << iter;
            throw SolverDiverged(os.str(), history);
        }

        const double r2 = resid.norm();
        bool accepted = false;
        double t = 1.0;
        for (int h = 0; h < 45; ++h, t *= 0.5) {
            const RVector cand = lambda + t * step;
            auto [s2, lz2] = build(cand);
            const RVector res2 = expectations(ops, s2) - targets;
            if (res2.norm() < r2) {
                lambda = cand;
                state = std::move(s2);
                logz = lz2;
                resid = res2;
                accepted = true;
                break;
            }
        }
        rmax = resid.cwiseAbs().maxCoeff();
        history.push_back(rmax);
        if (!accepted) {
            std::ostringstream os;
            os << context << ": line search stalled with max residual " << rmax;
            throw SolverDiverged(os.str(), history);
        }
        if (lambda.cwiseAbs().maxCoeff() > kLambdaCap) {
            std::ostringstream os;
            os << context << ": Lagrange parameters diverged (targets at or beyond the manifold boundary),"
               << " max residual " << rmax;
            throw InfeasibleMoments(os.str(), rmax);
        }
    }
    if (rmax > kMomentTol) {
        std::ostringstream os;
        os << context << ": no convergence after " << kMomentMaxIter << " iterations, max residual " << rmax;
        throw SolverDiverged(os.str(), history);
    }
    return {lambda, state, logz};
}

}  // namespace

LevelOfDescription::LevelOfDescription(std::vector<HermitianOperator> observables, std::string label)
    : observables_(std::move(observables)), label_(std::move(label)) {
    if (observables_.empty()) {
        throw ValidationError("LevelOfDescription: use LevelOfDescription::empty for p = 0");
    }
    dim_ = observables_.front().dim();
    for (const auto& g : observables_) {
        if (g.dim() != dim_) throw DimMismatch("LevelOfDescription: mixed operator dimensions");
    }
    const double cond = gram_condition(observables_);
    if (cond > kGramConditionMax) {
        std::ostringstream os;
        os << "LevelOfDescription '" << label_ << "': observables are not linearly independent of"
           << " each other and the unit operator (Gram condition " << cond << ")";
        throw ValidationError(os.str());
    }
}

LevelOfDescription LevelOfDescription::empty(int dim, std::string label) {
    LevelOfDescription lvl;
    lvl.label_ = std::move(label);
    lvl.dim_ = dim;
    return lvl;
}

double gram_condition(const std::vector<HermitianOperator>& ops) {
    const int d = ops.empty() ? 2 : ops.front().dim();
    std::vector<CMatrix> basis;
    basis.reserve(ops.size() + 1);
    basis.push_back(CMatrix::Identity(d, d) / std::sqrt(static_cast<double>(d)));
    for (const auto& g : ops) {
        const double n = g.hs_norm();
        if (n < 1e-14) return std::numeric_limits<double>::infinity();
        basis.push_back(g.matrix() / n);
    }
    const int n = static_cast<int>(basis.size());
    RMatrix gram(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            gram(a, b) = (basis[a].adjoint() * basis[b]).trace().real();
        }
    }
    Eigen::SelfAdjointEigenSolver<RMatrix> es(gram);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

bool spans_contain(const std::vector<HermitianOperator>& inner,
                   const std::vector<HermitianOperator>& outer, double tol) {
    if (inner.empty()) return true;
    const int d = inner.front().dim();
    // Real vectorization: stack Re and Im parts; Hermiticity keeps this faithful.
    const int rows = 2 * d * d;
    RMatrix a(rows, static_cast<int>(outer.size()) + 1);
    auto vectorize = [&](const CMatrix& m) {
        RVector v(rows);
        int idx = 0;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                v[idx++] = m(i, j).real();
                v[idx++] = m(i, j).imag();
            }
        }
        return v;
    };
    a.col(0) = vectorize(CMatrix::Identity(d, d));
    for (std::size_t b = 0; b < outer.size(); ++b) a.col(static_cast<int>(b) + 1) = vectorize(outer[b].matrix());
    const auto qr = a.colPivHouseholderQr();
    for (const auto& g : inner) {
        const RVector v = vectorize(g.matrix());
        const RVector resid = a * qr.solve(v) - v;
        const double scale = std::max(v.norm(), 1e-300);
        if (resid.norm() / scale > tol) return false;
    }
    return true;
}

HermitianOperator reference_exponent(const DensityMatrix& reference) {
    if (is_uniform(reference)) {
        return HermitianOperator::zero(reference.dim());
    }
    const HermitianOperator ln_ref = matrix_log(reference);
    const double mean = expectation(ln_ref, reference);
    return HermitianOperator(ln_ref.matrix() - mean * CMatrix::Identity(reference.dim(), reference.dim()));
}

bool is_uniform(const DensityMatrix& state, double tol) {
    const int d = state.dim();
    return (state.matrix() - CMatrix::Identity(d, d) / static_cast<double>(d)).cwiseAbs().maxCoeff() <= tol;
}

DensityMatrix tomographic_image(const RVector& means, const std::vector<HermitianOperator>& observables,
                                const DensityMatrix& reference) {
    if (means.size() != static_cast<Eigen::Index>(observables.size())) {
        throw DimMismatch("tomographic_image: means/observables count mismatch");
    }
    for (const auto& f : observables) {
        if (f.dim() != reference.dim()) throw DimMismatch("tomographic_image: operator dimension mismatch");
    }
    try {
        return solve_moments(observables, means, reference, "tomographic_image").state;
    } catch (const SolverDiverged& e) {
        // A stalled full-level solve means the requested means sit on or
        // outside the attainable set.
        const double r = e.residual_history.empty() ? 0.0 : e.residual_history.back();
        throw InfeasibleMoments(std::string(e.what()) + " (means not attainable)", r);
    }
}

GibbsState project(const DensityMatrix& mu, const LevelOfDescription& level,
                   const DensityMatrix& reference) {
    if (mu.dim() != reference.dim() || (level.p() > 0 && level.dim() != mu.dim())) {
        throw DimMismatch("project: dimension mismatch");
    }
    RVector targets(level.p());
    for (int a = 0; a < level.p(); ++a) targets[a] = expectation(level.observables()[a], mu);
    MomentSolution sol = solve_moments(level.observables(), targets, reference, "project");
    return GibbsState{reference, level, std::move(sol.lagrange), std::move(sol.state), sol.log_partition};
}

DensityMatrix interpolate(const GibbsState& projection, const DensityMatrix& reference, double x) {
    if (x < 0.0 || x > 1.0) throw ValidationError("interpolate: mixing parameter must lie in [0, 1]");
    const CMatrix expo = (1.0 - x) * matrix_log(projection.state).matrix() + x * matrix_log(reference).matrix();
    return gibbs_normalize(HermitianOperator(expo));
}

CenterOfMass center_of_mass(const std::vector<DensityMatrix>& states, const RVector& weights) {
    if (states.empty()) throw ValidationError("center_of_mass: no states");
    if (weights.size() != static_cast<Eigen::Index>(states.size())) {
        throw DimMismatch("center_of_mass: weights/states count mismatch");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-10 || weights.minCoeff() < 0.0) {
        throw ValidationError("center_of_mass: weights must be nonnegative and sum to 1");
    }
    const int d = states.front().dim();
    CMatrix log_sum = CMatrix::Zero(d, d);
    CMatrix mix = CMatrix::Zero(d, d);
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].dim() != d) throw DimMismatch("center_of_mass: mixed state dimensions");
        log_sum += weights[i] * matrix_log(states[i]).matrix();
        mix += weights[i] * states[i].matrix();
    }
    return CenterOfMass{gibbs_normalize(HermitianOperator(std::move(log_sum))), DensityMatrix(mix)};
}

double pythagoras_residual(const DensityMatrix& mu, const LevelOfDescription& level,
                           const DensityMatrix& reference, const GibbsState& omega) {
    const GibbsState pi = project(mu, level, reference);
    return relative_entropy(mu, omega.state) - relative_entropy(mu, pi.state) -
           relative_entropy(pi.state, omega.state);
}

}  // namespace thermoscope
