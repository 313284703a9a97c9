#include "thermoscope/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "thermoscope/errors.hpp"
#include "thermoscope/rng.hpp"

namespace thermoscope {

namespace {

HermitianOperator combine(const std::vector<HermitianOperator>& ops, const RVector& coef) {
    CMatrix acc = CMatrix::Zero(ops.front().dim(), ops.front().dim());
    for (int b = 0; b < coef.size(); ++b) acc += coef[b] * ops[static_cast<std::size_t>(b)].matrix();
    return HermitianOperator(acc);
}

// Scalar moment problem: beta with <H>_{exp(l_ref - beta H)} = target.
// The map is strictly decreasing (derivative is minus a Kubo-Mori variance),
// so a bracket plus safeguarded Newton always lands.
double solve_scalar_beta(const HermitianOperator& h, const DensityMatrix& reference, double target,
                         DensityMatrix* state_out = nullptr) {
    const CMatrix l_ref = reference_exponent(reference).matrix();
    auto state_at = [&](double beta) {
        CMatrix exponent = l_ref - beta * h.matrix();
        return gibbs_normalize(HermitianOperator(exponent));
    };
    auto energy_at = [&](double beta, DensityMatrix& state) {
        state = state_at(beta);
        return expectation(h, state);
    };

    const Spectrum spec = spectral_decompose(h);
    const double lo_val = spec.eigenvalues.minCoeff();
    const double hi_val = spec.eigenvalues.maxCoeff();
    const double range = hi_val - lo_val;
    const double tol = 1e-12 * std::max(1.0, range);
    if (range <= 1e-14) {
        // H proportional to identity: every state has the same energy.
        if (std::abs(target - lo_val) > 1e-9 * std::max(1.0, std::abs(lo_val)))
            throw BisectionFailed("target energy unreachable for a scalar observable");
        if (state_out) *state_out = state_at(0.0);
        return 0.0;
    }
    if (target <= lo_val + 1e-13 * range || target >= hi_val - 1e-13 * range)
        throw BisectionFailed("target energy outside the attainable spectrum");

    DensityMatrix state = state_at(0.0);
    double beta = 0.0;
    double g = expectation(h, state);
    double blo, bhi, glo, ghi;  // g(blo) >= target >= g(bhi)
    if (g >= target) {
        blo = 0.0;
        glo = g;
        bhi = 1.0;
        ghi = energy_at(bhi, state);
        while (ghi > target) {
            blo = bhi;
            glo = ghi;
            bhi *= 2.0;
            if (bhi > 1e6) throw BisectionFailed("no finite inverse temperature reaches the target energy");
            ghi = energy_at(bhi, state);
        }
    } else {
        bhi = 0.0;
        ghi = g;
        blo = -1.0;
        glo = energy_at(blo, state);
        while (glo < target) {
            bhi = blo;
            ghi = glo;
            blo *= 2.0;
            if (blo < -1e6) throw BisectionFailed("no finite inverse temperature reaches the target energy");
            glo = energy_at(blo, state);
        }
    }

    beta = 0.5 * (blo + bhi);
    g = energy_at(beta, state);
    for (int iter = 0; iter < 200; ++iter) {
        const double resid = g - target;
        if (std::abs(resid) <= tol) break;
        if (resid > 0.0) {
            blo = beta;
            glo = g;
        } else {
            bhi = beta;
            ghi = g;
        }
        const double var = kubo_mori(h, h, state) - g * g;
        double next;
        if (var > 1e-300) {
            next = beta + resid / var;  // Newton: g' = -variance
            if (!(next > blo && next < bhi)) next = 0.5 * (blo + bhi);
        } else {
            next = 0.5 * (blo + bhi);
        }
        beta = next;
        g = energy_at(beta, state);
    }
    if (std::abs(g - target) > 1e-9 * std::max(1.0, range))
        throw BisectionFailed("inverse-temperature solve stalled before reaching the target energy");
    if (state_out) *state_out = state;
    return beta;
}

// One evaluation of the fit objective at a direction on the metric sphere.
struct XiEval {
    RVector xi;          // normalized, xi.C.xi = 1
    double beta_bar = 0.0;
    DensityMatrix pi_bar;
    RVector delta_f;     // <F>_{pi_bar} - f_bar, covector
    double gamma_along = 0.0;
    double objective = 0.0;  // gamma_along - delta_f . C^{-1} . delta_f
};

class XiObjective {
  public:
    XiObjective(const Dataset& dataset, const CorrelationMetric& metric, const SpreadMoments& moments)
        : dataset_(dataset), metric_(metric), moments_(moments) {}

    XiEval evaluate(const RVector& xi_raw) const {
        XiEval ev;
        ev.xi = metric_.normalized(xi_raw);
        const HermitianOperator h = combine(dataset_.observables(), -ev.xi);
        const double target = -ev.xi.dot(moments_.f_bar);
        ev.beta_bar = solve_scalar_beta(h, dataset_.reference(), target, &ev.pi_bar);
        ev.delta_f = RVector(dataset_.m());
        for (int b = 0; b < dataset_.m(); ++b)
            ev.delta_f[b] = expectation(dataset_.observables()[static_cast<std::size_t>(b)], ev.pi_bar) -
                            moments_.f_bar[b];
        ev.gamma_along = ev.xi.dot(moments_.gamma * ev.xi);
        ev.objective = ev.gamma_along - ev.delta_f.dot(metric_.inverse() * ev.delta_f);
        return ev;
    }

    // Euclidean gradient covector of the objective at a sphere point; exact,
    // using d beta_bar / d xi from the implicit moment condition.
    RVector gradient(const XiEval& ev) const {
        const RMatrix k = kubo_mori_matrix(dataset_.observables(), ev.pi_bar);
        const RVector v = metric_.inverse() * ev.delta_f;
        const RVector k_xi = k * ev.xi;
        const RVector k_v = k * v;
        const double x_k_x = ev.xi.dot(k_xi);
        if (x_k_x <= 1e-300) throw SolverError("degenerate susceptibility along the trial direction");
        RVector dbeta(dataset_.m());
        for (int a = 0; a < dataset_.m(); ++a) dbeta[a] = -(ev.delta_f[a] + ev.beta_bar * k_xi[a]) / x_k_x;
        const double v_k_xi = v.dot(k_xi);
        const RVector grad_quad = 2.0 * (moments_.gamma * ev.xi - ev.gamma_along * (metric_.matrix() * ev.xi));
        const RVector grad_dist = 2.0 * ev.beta_bar * k_v + 2.0 * v_k_xi * dbeta;
        return grad_quad - grad_dist;
    }

    // Stationarity residual covector: half the exact gradient, which reduces
    // to (delta_xi Gamma) xi - beta_bar delta_f when the metric is flat.
    RVector condition_residual(const XiEval& ev) const { return 0.5 * gradient(ev); }

    double residual_norm(const RVector& r) const { return std::sqrt(std::max(0.0, r.dot(metric_.inverse() * r))); }

    const CorrelationMetric& metric() const { return metric_; }

  private:
    const Dataset& dataset_;
    const CorrelationMetric& metric_;
    const SpreadMoments& moments_;
};

// C-orthonormal basis of the tangent space at xi.
std::vector<RVector> tangent_basis(const CorrelationMetric& metric, const RVector& xi) {
    const int m = static_cast<int>(xi.size());
    std::vector<RVector> basis;
    basis.reserve(static_cast<std::size_t>(m - 1));
    for (int j = 0; j < m && static_cast<int>(basis.size()) < m - 1; ++j) {
        RVector cand = RVector::Zero(m);
        cand[j] = 1.0;
        cand -= metric.dot(cand, xi) * xi;
        for (const RVector& t : basis) cand -= metric.dot(cand, t) * t;
        const double nrm = std::sqrt(std::max(0.0, metric.dot(cand, cand)));
        if (nrm > 1e-8) basis.push_back(cand / nrm);
    }
    if (static_cast<int>(basis.size()) != m - 1)
        throw SolverError("failed to span the tangent space of the direction sphere");
    return basis;
}

struct Candidate {
    XiEval eval;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

Candidate refine_from(const XiObjective& obj, const RVector& start) {
    constexpr int kAscentMax = 300;
    constexpr int kNewtonMax = 60;
    constexpr double kGradTol = 1e-10;
    constexpr double kResidualTol = 1e-10;

    XiEval ev = obj.evaluate(start);
    double step = 0.1;
    for (int iter = 0; iter < kAscentMax; ++iter) {
        const RVector grad = obj.gradient(ev);
        RVector dir = obj.metric().raise(grad);
        dir -= obj.metric().dot(dir, ev.xi) * ev.xi;
        const double dir_norm = std::sqrt(std::max(0.0, obj.metric().dot(dir, dir)));
        if (dir_norm <= kGradTol) break;
        bool accepted = false;
        for (int halve = 0; halve < 40; ++halve) {
            XiEval trial;
            try {
                trial = obj.evaluate(ev.xi + (step / dir_norm) * dir);
            } catch (const BisectionFailed&) {
                step *= 0.5;
                continue;
            }
            if (trial.objective > ev.objective) {
                ev = trial;
                accepted = true;
                step = std::min(1.0, step * 1.5);
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    // Newton on the stationarity condition in tangent coordinates.
    Candidate cand;
    cand.eval = ev;
    cand.residual = obj.residual_norm(obj.condition_residual(ev));
    const int m = static_cast<int>(ev.xi.size());
    for (int iter = 0; iter < kNewtonMax && cand.residual > 1e-12; ++iter) {
        const std::vector<RVector> basis = tangent_basis(obj.metric(), cand.eval.xi);
        const RVector r0 = obj.condition_residual(cand.eval);
        RVector f0(m - 1);
        for (int k = 0; k < m - 1; ++k) f0[k] = basis[static_cast<std::size_t>(k)].dot(r0);
        RMatrix jac(m - 1, m - 1);
        const double h = 1e-6;
        for (int l = 0; l < m - 1; ++l) {
            const XiEval plus = obj.evaluate(cand.eval.xi + h * basis[static_cast<std::size_t>(l)]);
            const XiEval minus = obj.evaluate(cand.eval.xi - h * basis[static_cast<std::size_t>(l)]);
            const RVector rp = obj.condition_residual(plus);
            const RVector rm = obj.condition_residual(minus);
            for (int k = 0; k < m - 1; ++k)
                jac(k, l) = (basis[static_cast<std::size_t>(k)].dot(rp) -
                             basis[static_cast<std::size_t>(k)].dot(rm)) /
                            (2.0 * h);
        }
        const RVector delta = jac.fullPivLu().solve(-f0);
        if (!delta.allFinite()) break;
        bool improved = false;
        double scale = 1.0;
        for (int halve = 0; halve < 20; ++halve) {
            RVector trial_xi = cand.eval.xi;
            for (int l = 0; l < m - 1; ++l) trial_xi += scale * delta[l] * basis[static_cast<std::size_t>(l)];
            XiEval trial;
            try {
                trial = obj.evaluate(trial_xi);
            } catch (const BisectionFailed&) {
                scale *= 0.5;
                continue;
            }
            const double trial_res = obj.residual_norm(obj.condition_residual(trial));
            if (trial_res < cand.residual) {
                cand.eval = trial;
                cand.residual = trial_res;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
    }
    cand.converged = cand.residual <= kResidualTol * 10.0;  // 1e-9 acceptance per start
    return cand;
}

void apply_sign_gauge(RVector& xi, const RVector& f_bar) {
    const double along = xi.dot(f_bar);
    if (along < -1e-14) {
        xi = -xi;
        return;
    }
    if (std::abs(along) <= 1e-14) {
        for (int j = 0; j < xi.size(); ++j) {
            if (std::abs(xi[j]) > 1e-12) {
                if (xi[j] < 0.0) xi = -xi;
                return;
            }
        }
    }
}

}  // namespace

double xi_log_likelihood(const Dataset& dataset, const CorrelationMetric& metric,
                         const SpreadMoments& moments, const RVector& xi) {
    if (xi.size() != dataset.m()) throw DimMismatch("direction length does not match the observable count");
    XiObjective obj(dataset, metric, moments);
    const XiEval ev = obj.evaluate(xi);
    return 0.5 * static_cast<double>(dataset.total_size()) * ev.objective - 0.5 * dataset.log_size_sum();
}

HamiltonianEstimate estimate_xi_general(const Dataset& dataset, const CorrelationMetric& metric) {
    const int m = dataset.m();
    if (m < 2) throw ValidationError("direction estimation needs at least two observables");
    const SpreadMoments moments = covariance_matrix(dataset);
    const double spread_scale = (metric.inverse() * moments.gamma).trace();
    if (!(spread_scale > 1e-14)) throw DegenerateSpread("sample spread is numerically zero");

    XiObjective obj(dataset, metric, moments);

    std::vector<RVector> starts;
    RVector evals;
    const int top = std::min(3, m);
    const std::vector<RVector> dirs = pca_directions(moments.gamma, metric.matrix(), top, &evals);
    for (const RVector& d : dirs) starts.push_back(d);
    const double f2 = moments.f_bar.dot(metric.inverse() * moments.f_bar);
    if (f2 > 1e-24) starts.push_back(metric.normalized(metric.raise(moments.f_bar)));
    SplitMix64 rng(0x74736f7068657265ULL);  // fixed stream so reruns explore identical starts
    for (int extra = 0; extra < 4; ++extra) {
        RVector r(m);
        for (int j = 0; j < m; ++j) r[j] = rng.next_normal();
        starts.push_back(metric.normalized(r));
    }

    Candidate best;
    bool have_best = false;
    Candidate best_any;
    bool have_any = false;
    for (const RVector& start : starts) {
        Candidate cand;
        try {
            cand = refine_from(obj, start);
        } catch (const SolverError&) {
            continue;
        } catch (const BisectionFailed&) {
            continue;
        }
        if (!have_any || cand.eval.objective > best_any.eval.objective) {
            best_any = cand;
            have_any = true;
        }
        if (cand.converged && (!have_best || cand.eval.objective > best.eval.objective)) {
            best = cand;
            have_best = true;
        }
    }
    if (!have_any) throw SolverError("every optimizer start failed to evaluate");
    if (!have_best) {
        std::vector<double> point(best_any.eval.xi.data(), best_any.eval.xi.data() + best_any.eval.xi.size());
        throw NonConvergence("direction optimizer did not reach the stationarity tolerance",
                             std::move(point), best_any.residual);
    }

    RVector xi = best.eval.xi;
    apply_sign_gauge(xi, moments.f_bar);
    const XiEval final_eval = obj.evaluate(xi);
    const double residual = obj.residual_norm(obj.condition_residual(final_eval));

    HamiltonianEstimate est;
    est.xi = xi;
    est.beta_bar = final_eval.beta_bar;
    est.condition_residual = residual;
    est.max_log_likelihood =
        0.5 * static_cast<double>(dataset.total_size()) * final_eval.objective - 0.5 * dataset.log_size_sum();
    est.effective = m < dataset.dim() * dataset.dim() - 1;
    est.internal_energies.resize(static_cast<std::size_t>(dataset.samples_count()));
    for (int i = 0; i < dataset.samples_count(); ++i)
        est.internal_energies[static_cast<std::size_t>(i)] =
            -xi.dot(dataset.samples()[static_cast<std::size_t>(i)].means);
    est.mean_internal_energy = -xi.dot(moments.f_bar);
    return est;
}

BetaEstimate estimate_beta(const Dataset& dataset, const RVector& xi, const CorrelationMetric& metric) {
    if (xi.size() != dataset.m()) throw DimMismatch("direction length does not match the observable count");
    const double norm2 = metric.dot(xi, xi);
    if (std::abs(norm2 - 1.0) > 1e-6)
        throw ValidationError("direction must be normalized in the correlation metric");
    const RVector xin = metric.normalized(xi);
    const HermitianOperator h = combine(dataset.observables(), -xin);

    BetaEstimate out;
    out.per_sample.resize(static_cast<std::size_t>(dataset.samples_count()));
    out.internal_energies.resize(static_cast<std::size_t>(dataset.samples_count()));
    for (int i = 0; i < dataset.samples_count(); ++i) {
        const double u = -xin.dot(dataset.samples()[static_cast<std::size_t>(i)].means);
        out.internal_energies[static_cast<std::size_t>(i)] = u;
        out.per_sample[static_cast<std::size_t>(i)] = solve_scalar_beta(h, dataset.reference(), u);
    }
    if (dataset.uniform_reference()) {
        const DensityMatrix& mean = dataset.mean_image();
        const HermitianOperator log_mean = matrix_log(mean);
        const double avg = expectation(log_mean, mean);
        const HermitianOperator centered(
            CMatrix(log_mean.matrix() - avg * CMatrix::Identity(dataset.dim(), dataset.dim())));
        out.beta_bar = std::sqrt(std::max(0.0, kubo_mori(centered, centered, mean)));
        out.closed_form = true;
    } else {
        double acc = 0.0;
        const RVector& w = dataset.weights();
        for (int i = 0; i < dataset.samples_count(); ++i)
            acc += w[i] * out.per_sample[static_cast<std::size_t>(i)];
        out.beta_bar = acc;
        out.closed_form = false;
    }
    return out;
}

ThermalCheck thermalization_condition(const Dataset& dataset, const CorrelationMetric& metric,
                                      const SpreadMoments& moments, const RVector& xi,
                                      double margin_factor) {
    if (margin_factor < 1.0) throw ValidationError("margin factor must be at least 1");
    XiObjective obj(dataset, metric, moments);
    const XiEval ev = obj.evaluate(xi);
    const double total_spread = (metric.inverse() * moments.gamma).trace();
    const double transverse = total_spread - ev.gamma_along;
    const double mismatch = ev.delta_f.dot(metric.inverse() * ev.delta_f);
    ThermalCheck check;
    check.lhs = transverse + mismatch;
    check.rhs = dataset.log_size_sum() / static_cast<double>(dataset.total_size()) *
                static_cast<double>(dataset.m() - 1);
    check.margin_factor = margin_factor;
    check.margin = check.lhs > 1e-300 ? check.rhs / check.lhs
                                      : std::numeric_limits<double>::infinity();
    check.pass = check.margin >= margin_factor;
    return check;
}

QubitGeometry qubit_geometry(const RMatrix& gamma, const CorrelationMetric& metric, const RVector& f_bar) {
    if (gamma.rows() != 3 || gamma.cols() != 3 || f_bar.size() != 3)
        throw ValidationError("qubit geometry needs exactly three observables");
    QubitGeometry geo;
    geo.metric = metric.matrix();
    geo.metric_inverse = metric.inverse();
    geo.f_bar = f_bar;
    RVector evals;
    const std::vector<RVector> dirs = pca_directions(gamma, metric.matrix(), 3, &evals);
    geo.gamma_plus = evals[0];
    geo.gamma_minus = 0.5 * (evals[1] + evals[2]);
    geo.gamma_dir = dirs[0];

    const double f2 = f_bar.dot(metric.inverse() * f_bar);
    if (f2 > 1e-24) {
        geo.f_hat = metric.raise(f_bar) / std::sqrt(f2);
        double cos_theta = metric.dot(geo.gamma_dir, geo.f_hat);
        if (cos_theta < 0.0) {
            geo.gamma_dir = -geo.gamma_dir;
            cos_theta = -cos_theta;
        }
        RVector eta_raw = geo.f_hat - cos_theta * geo.gamma_dir;
        const double eta_norm = std::sqrt(std::max(0.0, metric.dot(eta_raw, eta_raw)));
        if (eta_norm > 1e-12) {
            geo.eta = eta_raw / eta_norm;
            geo.theta = std::atan2(eta_norm, cos_theta);
        } else {
            geo.theta = 0.0;
            geo.eta = RVector::Zero(3);
        }
    } else {
        geo.f_hat = RVector::Zero(3);
        geo.theta = 0.0;
        geo.eta = RVector::Zero(3);
    }
    if (geo.eta.isZero(0.0)) {
        // Complete with any metric-unit vector transverse to the spread axis.
        for (int j = 0; j < 3; ++j) {
            RVector cand = RVector::Zero(3);
            cand[j] = 1.0;
            cand -= metric.dot(cand, geo.gamma_dir) * geo.gamma_dir;
            const double nrm = std::sqrt(std::max(0.0, metric.dot(cand, cand)));
            if (nrm > 1e-8) {
                geo.eta = cand / nrm;
                break;
            }
        }
    }
    return geo;
}

QubitGeometry qubit_geometry(const Dataset& dataset, const CorrelationMetric& metric) {
    if (dataset.dim() != 2 || dataset.m() != 3)
        throw ValidationError("qubit geometry is defined for two-level systems with three observables");
    const SpreadMoments moments = covariance_matrix(dataset);
    return qubit_geometry(moments.gamma, metric, moments.f_bar);
}

RVector qubit_mle_fixed_point(const QubitGeometry& geometry, const RMatrix& gamma, const RVector& f_bar,
                              const RVector* initial) {
    const RMatrix& c = geometry.metric;
    const RMatrix& ci = geometry.metric_inverse;
    auto normalize = [&](const RVector& v) {
        const double n2 = v.dot(c * v);
        if (!(n2 > 1e-300)) throw SolverError("fixed-point iterate collapsed to zero");
        return RVector(v / std::sqrt(n2));
    };
    // Exact stationarity of the closed-form objective; collapses to
    // (delta Gamma) xi = (xi.f)^2 xi - (xi.f) f on a flat metric, where the
    // displaced-mean term has no transverse derivative.
    auto exact_residual = [&](const RVector& xi) -> RVector {
        const double xx = xi.squaredNorm();
        const double a = xi.dot(f_bar) / xx;
        const RVector df = a * xi - f_bar;
        const RVector v = ci * df;
        const double xv = xi.dot(v);
        return gamma * xi - xi.dot(gamma * xi) * (c * xi) -
               (a * v + (xv / xx) * (f_bar - 2.0 * a * xi));
    };
    auto residual_of = [&](const RVector& xi) {
        const RVector r = exact_residual(xi);
        return std::sqrt(std::max(0.0, r.dot(ci * r)));
    };

    RVector xi;
    if (initial) {
        xi = normalize(*initial);
    } else if (geometry.f_hat.isZero(0.0)) {
        xi = geometry.gamma_dir;
    } else {
        xi = normalize(0.8 * geometry.gamma_dir + 0.2 * geometry.f_hat);
    }

    double res = residual_of(xi);
    RVector best = xi;
    double best_res = res;
    int stale = 0;
    for (int iter = 0; iter < 500 && res > 1e-10; ++iter) {
        const double xf = xi.dot(f_bar);
        const RVector target = normalize(ci * (gamma * xi + xf * f_bar));
        RVector accepted = xi;
        double accepted_res = res;
        double blend = 1.0;
        bool improved = false;
        for (int halve = 0; halve < 12; ++halve) {
            const RVector trial = normalize((1.0 - blend) * xi + blend * target);
            const double trial_res = residual_of(trial);
            if (trial_res < res) {
                accepted = trial;
                accepted_res = trial_res;
                improved = true;
                break;
            }
            blend *= 0.5;
        }
        if (!improved) {
            if (++stale >= 3) break;
            xi = target;  // push through a plateau
            res = residual_of(xi);
        } else {
            stale = 0;
            xi = accepted;
            res = accepted_res;
        }
        if (res < best_res) {
            best = xi;
            best_res = res;
        }
    }

    // The damped map lands near the root; Newton in the two tangent
    // directions finishes the job when the metric is not flat.
    for (int iter = 0; iter < 40 && best_res > 1e-12; ++iter) {
        std::vector<RVector> basis;
        for (int j = 0; j < 3 && basis.size() < 2; ++j) {
            RVector t = RVector::Zero(3);
            t(j) = 1.0;
            t -= best.dot(c * t) * best;
            for (const RVector& prev : basis) t -= prev.dot(c * t) * prev;
            const double nrm = std::sqrt(std::max(0.0, t.dot(c * t)));
            if (nrm > 1e-8) basis.push_back(t / nrm);
        }
        if (basis.size() != 2) break;
        const RVector r0 = exact_residual(best);
        Eigen::Vector2d f0(basis[0].dot(r0), basis[1].dot(r0));
        Eigen::Matrix2d jac;
        const double h = 1e-7;
        for (int l = 0; l < 2; ++l) {
            const RVector rp = exact_residual(normalize(best + h * basis[static_cast<std::size_t>(l)]));
            const RVector rm = exact_residual(normalize(best - h * basis[static_cast<std::size_t>(l)]));
            for (int k = 0; k < 2; ++k)
                jac(k, l) = (basis[static_cast<std::size_t>(k)].dot(rp) -
                             basis[static_cast<std::size_t>(k)].dot(rm)) /
                            (2.0 * h);
        }
        const Eigen::Vector2d delta = jac.fullPivLu().solve(-f0);
        if (!delta.allFinite()) break;
        bool improved = false;
        double scale = 1.0;
        for (int halve = 0; halve < 20 && !improved; ++halve) {
            const RVector trial = normalize(best + scale * (delta(0) * basis[0] + delta(1) * basis[1]));
            const double trial_res = residual_of(trial);
            if (trial_res < best_res) {
                best = trial;
                best_res = trial_res;
                improved = true;
            }
            scale *= 0.5;
        }
        if (!improved) break;
    }

    if (best_res > 1e-10)
        throw NonConvergence("qubit fixed-point iteration stalled",
                             std::vector<double>(best.data(), best.data() + best.size()), best_res);
    apply_sign_gauge(best, f_bar);
    return best;
}

RVector qubit_xi_perturbative(const QubitGeometry& geometry, std::vector<std::string>* warnings) {
    const double f2 = geometry.f_bar.dot(geometry.metric_inverse * geometry.f_bar);
    if (f2 <= 1e-24) return geometry.gamma_dir;
    const double gap = geometry.gamma_plus - geometry.gamma_minus;
    const double sin_theta = std::sin(geometry.theta);
    if (warnings && std::abs(sin_theta) > 0.3)
        warnings->push_back("perturbative direction estimate used outside its small-angle regime");
    const double s = sin_theta / (1.0 + gap / f2);
    const double cpart = std::sqrt(std::max(0.0, 1.0 - s * s));
    RVector xi = cpart * geometry.gamma_dir + s * geometry.eta;
    apply_sign_gauge(xi, geometry.f_bar);
    return xi;
}

double qubit_max_likelihood(const QubitGeometry& geometry, double total_size, double log_size_sum) {
    const double a = geometry.f_bar.dot(geometry.metric_inverse * geometry.f_bar);
    const double b = geometry.gamma_plus - geometry.gamma_minus;
    const double sin2 = std::sin(geometry.theta) * std::sin(geometry.theta);
    double bracket = 0.0;
    if (a > 1e-300 && b > 1e-300) bracket = a * b / (a + b);
    return 0.5 * total_size * (geometry.gamma_plus - bracket * sin2) - 0.5 * log_size_sum;
}

QubitThermal qubit_thermal_conditions(const QubitGeometry& geometry, double total_size,
                                      double log_size_sum, double margin_factor) {
    if (margin_factor < 1.0) throw ValidationError("margin factor must be at least 1");
    const double ln_over_n = log_size_sum / total_size;
    const double a = geometry.f_bar.dot(geometry.metric_inverse * geometry.f_bar);
    const double b = geometry.gamma_plus - geometry.gamma_minus;
    QubitThermal out;
    out.margin_factor = margin_factor;
    out.margin_spread = geometry.gamma_minus > 1e-300
                            ? ln_over_n / geometry.gamma_minus
                            : std::numeric_limits<double>::infinity();
    const double half_angle2 = 0.5 * geometry.theta * geometry.theta;
    if (half_angle2 > 1e-300 && a > 1e-300 && b > 1e-300) {
        out.margin_angle = ln_over_n * (1.0 / a + 1.0 / b) / half_angle2;
    } else {
        out.margin_angle = std::numeric_limits<double>::infinity();
    }
    out.pass = out.margin_spread >= margin_factor && out.margin_angle >= margin_factor;
    return out;
}

HamiltonianEstimate estimate_hamiltonian(const Dataset& dataset, const CorrelationMetric& metric,
                                         double margin_factor, const std::string& method) {
    HamiltonianEstimate est;
    const SpreadMoments moments = covariance_matrix(dataset);
    if (method == "exact") {
        est = estimate_xi_general(dataset, metric);
    } else if (method == "perturbative") {
        const QubitGeometry geo = qubit_geometry(dataset, metric);
        est.xi = qubit_xi_perturbative(geo, &est.warnings);
        XiObjective obj(dataset, metric, moments);
        const XiEval ev = obj.evaluate(est.xi);
        est.beta_bar = ev.beta_bar;
        est.condition_residual = obj.residual_norm(obj.condition_residual(ev));
        est.max_log_likelihood = qubit_max_likelihood(geo, dataset.total_size(), dataset.log_size_sum());
        est.effective = dataset.m() < dataset.dim() * dataset.dim() - 1;
        est.mean_internal_energy = -est.xi.dot(moments.f_bar);
    } else {
        throw ValidationError("unknown estimation method: " + method);
    }

    const BetaEstimate beta = estimate_beta(dataset, est.xi, metric);
    est.per_sample_beta = beta.per_sample;
    est.internal_energies = beta.internal_energies;
    if (beta.closed_form) {
        const RVector& w = dataset.weights();
        double mean_beta = 0.0;
        for (int i = 0; i < dataset.samples_count(); ++i)
            mean_beta += w[i] * beta.per_sample[static_cast<std::size_t>(i)];
        if (beta.beta_bar > 1e-12 && std::abs(mean_beta - beta.beta_bar) > 0.2 * beta.beta_bar) {
            std::ostringstream msg;
            msg << "closed-form mean inverse temperature " << beta.beta_bar
                << " disagrees with the sample average " << mean_beta;
            est.warnings.push_back(msg.str());
        }
    }
    est.beta_bar = beta.beta_bar;

    est.thermal = thermalization_condition(dataset, metric, moments, est.xi, margin_factor);
    if (dataset.dim() == 2 && dataset.m() == 3 && dataset.uniform_reference()) {
        const QubitGeometry geo = qubit_geometry(dataset, metric);
        est.qubit = qubit_thermal_conditions(geo, dataset.total_size(), dataset.log_size_sum(),
                                             margin_factor);
    }
    return est;
}

}  // namespace thermoscope
