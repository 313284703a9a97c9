#include "thermoscope/model_selection.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace thermoscope {

CorrelationMetric::CorrelationMetric(DensityMatrix base_state, RMatrix matrix)
    : base_state_(std::move(base_state)), matrix_(std::move(matrix)) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(matrix_);
    if (es.eigenvalues().minCoeff() <= kMetricFloor) {
        std::ostringstream os;
        os << "CorrelationMetric: matrix is singular (min eigenvalue " << es.eigenvalues().minCoeff()
           << "), observables are redundant on the mean image";
        throw SingularMetric(os.str());
    }
    inverse_ = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

RVector CorrelationMetric::normalized(const RVector& x) const {
    const double n = std::sqrt(dot(x, x));
    if (n < 1e-300) throw ValidationError("CorrelationMetric::normalized: zero vector");
    return x / n;
}

CorrelationMetric correlation_metric(const Dataset& dataset) {
    const DensityMatrix& mu_bar = dataset.mean_image();
    RMatrix c = kubo_mori_matrix(dataset.observables(), mu_bar);
    return CorrelationMetric(mu_bar, std::move(c));
}

SpreadMoments covariance_matrix(const Dataset& dataset) {
    const int m = dataset.m();
    const RVector w = dataset.weights();
    RVector f_bar = dataset.mean_values();
    RMatrix gamma = RMatrix::Zero(m, m);
    for (int i = 0; i < dataset.samples_count(); ++i) {
        const RVector d = dataset.samples()[i].means - f_bar;
        gamma += w[i] * d * d.transpose();
    }
    return SpreadMoments{std::move(gamma), std::move(f_bar)};
}

namespace {

// Everything the likelihood formulas need about one level on one dataset.
struct LevelProjection {
    std::vector<GibbsState> projections;  // pi_i
    DensityMatrix pi_bar;                 // mixture of the pi_i
    RVector entropies;                    // S(pi_i || pi_bar)
    double misfit = 0.0;                  // S(mu_bar || pi_bar)
    double reference_entropy = 0.0;       // S(pi_bar || sigma)
};

LevelProjection project_level(const Dataset& dataset, const LevelOfDescription& level) {
    if (level.p() > 0 && !spans_contain(level.observables(), dataset.observables())) {
        throw NotNested("level '" + level.label() + "' is not contained in the dataset observable span");
    }
    const auto& images = dataset.images();
    const int r = dataset.samples_count();
    LevelProjection out;
    out.projections.reserve(r);
    const int d = dataset.dim();
    CMatrix mix = CMatrix::Zero(d, d);
    for (int i = 0; i < r; ++i) {
        out.projections.push_back(project(images[i], level, dataset.reference()));
        mix += dataset.weights()[i] * out.projections.back().state.matrix();
    }
    out.pi_bar = DensityMatrix(mix);
    out.entropies.resize(r);
    for (int i = 0; i < r; ++i) {
        out.entropies[i] = relative_entropy(out.projections[i].state, out.pi_bar);
    }
    out.misfit = relative_entropy(dataset.mean_image(), out.pi_bar);
    out.reference_entropy = relative_entropy(out.pi_bar, dataset.reference());
    return out;
}

double asymptotic_value(const Dataset& dataset, const LevelProjection& lp, int p) {
    double fit = 0.0;
    for (int i = 0; i < dataset.samples_count(); ++i) {
        fit += static_cast<double>(dataset.samples()[i].size) * (lp.entropies[i] - lp.misfit);
    }
    return fit - 0.5 * p * dataset.log_size_sum();
}

// Extremum condition value E(alpha); E = -alpha dL/dalpha, so a sign change
// from negative to positive brackets a maximum of L.
double alpha_condition(const Dataset& dataset, const LevelProjection& lp, int p, double alpha) {
    double e = 0.0;
    for (int i = 0; i < dataset.samples_count(); ++i) {
        const double n = static_cast<double>(dataset.samples()[i].size);
        const double x = alpha / (alpha + n);
        const double s = lp.entropies[i] + lp.reference_entropy;
        e += (1.0 - x) * n * (x * s - 0.5 * p / n);
    }
    return e;
}

double alpha_curvature_value(const Dataset& dataset, const LevelProjection& lp, int p, double alpha) {
    // -alpha^2 d2L/dalpha2 with
    // d2L/dalpha2 = (1/alpha) sum_i (1-x_i)^2 {2 x_i s_i - p/N_i - p(1-x_i)/(2 x_i N_i)}.
    double d2 = 0.0;
    for (int i = 0; i < dataset.samples_count(); ++i) {
        const double n = static_cast<double>(dataset.samples()[i].size);
        const double x = alpha / (alpha + n);
        const double s = lp.entropies[i] + lp.reference_entropy;
        const double om = 1.0 - x;
        d2 += om * om * (2.0 * x * s - p / n - 0.5 * p * om / (x * n));
    }
    d2 /= alpha;
    return -alpha * alpha * d2;
}

}  // namespace

ModelScore asymptotic_log_likelihood(const Dataset& dataset, const LevelOfDescription& level) {
    const LevelProjection lp = project_level(dataset, level);
    ModelScore score{level};
    score.p = level.p();
    score.per_sample_entropies = lp.entropies;
    score.misfit = lp.misfit;
    score.reference_entropy = lp.reference_entropy;
    score.log_likelihood = asymptotic_value(dataset, lp, level.p());
    return score;
}

double full_log_likelihood(const Dataset& dataset, const LevelOfDescription& level, double alpha) {
    if (alpha < 0.0) throw ValidationError("full_log_likelihood: alpha must be nonnegative");
    const LevelProjection lp = project_level(dataset, level);
    double value = asymptotic_value(dataset, lp, level.p());
    if (alpha == 0.0) return value;
    for (int i = 0; i < dataset.samples_count(); ++i) {
        const double n = static_cast<double>(dataset.samples()[i].size);
        const double x = alpha / (alpha + n);
        value -= x * n * (lp.entropies[i] + lp.reference_entropy);
        value += 0.5 * level.p() * std::log(x * n);
    }
    return value;
}

AlphaEstimate estimate_alpha(const Dataset& dataset, const LevelOfDescription& level) {
    const LevelProjection lp = project_level(dataset, level);
    const int p = level.p();
    if (p == 0) {
        throw AlphaUnbounded("estimate_alpha: the empty level has no alpha dependence");
    }
    bool any_scale = lp.reference_entropy > 0.0;
    for (int i = 0; i < dataset.samples_count() && !any_scale; ++i) {
        any_scale = lp.entropies[i] > 0.0;
    }
    if (!any_scale) {
        throw AlphaUnbounded("estimate_alpha: all projection entropies vanish, no penalty scale");
    }

    // Scan ln alpha over [-30, 30] for the first sign change from negative
    // (L increasing) to positive (L decreasing), then bisect.
    constexpr double kLo = -30.0, kHi = 30.0;
    constexpr int kGrid = 240;
    double prev_ln = kLo;
    double prev_e = alpha_condition(dataset, lp, p, std::exp(kLo));
    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    for (int g = 1; g <= kGrid; ++g) {
        const double ln = kLo + (kHi - kLo) * g / kGrid;
        const double e = alpha_condition(dataset, lp, p, std::exp(ln));
        if (prev_e < 0.0 && e >= 0.0) {
            lo = prev_ln;
            hi = ln;
            bracketed = true;
            break;
        }
        prev_ln = ln;
        prev_e = e;
    }
    if (!bracketed) {
        throw AlphaUnbounded("estimate_alpha: extremum condition has no sign change on ln alpha in [-30, 30]");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (alpha_condition(dataset, lp, p, std::exp(mid)) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    AlphaEstimate est;
    est.alpha = std::exp(0.5 * (lo + hi));
    est.curvature = alpha_curvature_value(dataset, lp, p, est.alpha);
    est.low_curvature = est.curvature < 0.5 * p * dataset.samples_count();
    return est;
}

double compare_levels(const Dataset& dataset, const LevelOfDescription& simple,
                      const LevelOfDescription& detailed) {
    if (!spans_contain(simple.observables(), detailed.observables())) {
        throw NotNested("compare_levels: '" + simple.label() + "' is not contained in '" +
                        detailed.label() + "'");
    }
    if (!spans_contain(detailed.observables(), dataset.observables())) {
        throw NotNested("compare_levels: '" + detailed.label() +
                        "' is not contained in the dataset observable span");
    }
    // Equal spans mean identical projections and a zero dimension gap.
    if (spans_contain(detailed.observables(), simple.observables())) return 0.0;
    const auto& images = dataset.images();
    const DensityMatrix& mu_bar = dataset.mean_image();
    const int s = detailed.p() - simple.p();
    double delta = 0.0;
    for (int i = 0; i < dataset.samples_count(); ++i) {
        const GibbsState detailed_proj = project(images[i], detailed, mu_bar);
        const GibbsState simple_proj = project(images[i], simple, mu_bar);
        delta += static_cast<double>(dataset.samples()[i].size) *
                 relative_entropy(detailed_proj.state, simple_proj.state);
    }
    const GibbsState center_detailed = project(mu_bar, detailed, dataset.reference());
    const GibbsState center_simple = project(mu_bar, simple, dataset.reference());
    delta += dataset.total_size() * relative_entropy(center_detailed.state, center_simple.state);
    delta -= 0.5 * s * dataset.log_size_sum();
    return delta;
}

namespace {

void fix_direction_sign(RVector& v) {
    for (int b = 0; b < v.size(); ++b) {
        if (std::abs(v[b]) > 1e-10 * v.cwiseAbs().maxCoeff()) {
            if (v[b] < 0.0) v = -v;
            return;
        }
    }
}

bool lex_less(const RVector& a, const RVector& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

}  // namespace

std::vector<RVector> pca_directions(const RMatrix& gamma, const RMatrix& metric, int p,
                                    RVector* eigenvalues_out) {
    const int m = static_cast<int>(gamma.rows());
    if (p < 0 || p > m) throw ValidationError("pca_directions: p out of range");
    Eigen::GeneralizedSelfAdjointEigenSolver<RMatrix> es(gamma, metric);
    if (es.info() != Eigen::Success) {
        throw SolverError("pca_directions: generalized eigensolver failed");
    }
    // Ascending from Eigen; take the top p, dominant first.
    std::vector<RVector> dirs;
    std::vector<double> vals;
    for (int k = 0; k < p; ++k) {
        RVector v = es.eigenvectors().col(m - 1 - k);
        fix_direction_sign(v);
        dirs.push_back(std::move(v));
        vals.push_back(es.eigenvalues()[m - 1 - k]);
    }
    // Deterministic order inside near-degenerate groups.
    for (int start = 0; start < p;) {
        int end = start + 1;
        while (end < p && std::abs(vals[end - 1] - vals[end]) < 1e-10) ++end;
        std::sort(dirs.begin() + start, dirs.begin() + end, lex_less);
        start = end;
    }
    if (eigenvalues_out) {
        eigenvalues_out->resize(p);
        for (int k = 0; k < p; ++k) (*eigenvalues_out)[k] = vals[k];
    }
    return dirs;
}

PcaResult pca_orientation(const Dataset& dataset, int p) {
    if (p < 0 || p > dataset.m()) {
        throw ValidationError("pca_orientation: p must lie in [0, m]");
    }
    PcaResult result{LevelOfDescription::empty(dataset.dim(), "pca-p0"), {}, RVector()};
    if (p == 0) return result;
    const CorrelationMetric metric = correlation_metric(dataset);
    const SpreadMoments moments = covariance_matrix(dataset);
    // The score rewards both the spread a level captures and how close its
    // manifold through the reference comes to the center of mass, so the
    // orientation problem diagonalizes the second moment about the reference
    // image, not the centered spread alone. Dropping the mean dyad misaligns
    // one-dimensional levels whenever the center of mass dominates the spread.
    RVector displaced = moments.f_bar;
    for (int b = 0; b < dataset.m(); ++b)
        displaced[b] -= expectation(dataset.observables()[static_cast<std::size_t>(b)],
                                    dataset.reference());
    const RMatrix about_reference = moments.gamma + displaced * displaced.transpose();
    result.directions = pca_directions(about_reference, metric.matrix(), p, &result.eigenvalues);
    std::vector<HermitianOperator> ops;
    ops.reserve(p);
    const int d = dataset.dim();
    for (int k = 0; k < p; ++k) {
        CMatrix sum = CMatrix::Zero(d, d);
        for (int b = 0; b < dataset.m(); ++b) {
            sum += result.directions[k][b] * dataset.observables()[b].matrix();
        }
        ops.push_back(HermitianOperator(std::move(sum)));
    }
    std::ostringstream label;
    label << "pca-p" << p;
    result.level = LevelOfDescription(std::move(ops), label.str());
    return result;
}

}  // namespace thermoscope
