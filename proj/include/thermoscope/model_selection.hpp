#ifndef THERMOSCOPE_MODEL_SELECTION_HPP
#define THERMOSCOPE_MODEL_SELECTION_HPP

#include <optional>
#include <utility>
#include <vector>

#include "thermoscope/dataset.hpp"

namespace thermoscope {

// Kubo-Mori correlation matrix of the dataset observables at mu-bar, with its
// inverse. This is the metric that raises/lowers observable-space indices:
// vectors x^a pair with covectors y_a, x.y = C_ab x^a y^b.
class CorrelationMetric {
public:
    CorrelationMetric(DensityMatrix base_state, RMatrix matrix);

    const DensityMatrix& base_state() const { return base_state_; }
    const RMatrix& matrix() const { return matrix_; }
    const RMatrix& inverse() const { return inverse_; }

    int m() const { return static_cast<int>(matrix_.rows()); }

    // x.y for two vectors (upper indices).
    double dot(const RVector& x, const RVector& y) const { return x.dot(matrix_ * y); }
    // x.y for two covectors (lower indices).
    double codot(const RVector& x, const RVector& y) const { return x.dot(inverse_ * y); }
    RVector lower(const RVector& x) const { return matrix_ * x; }
    RVector raise(const RVector& x) const { return inverse_ * x; }
    RVector normalized(const RVector& x) const;  // x / sqrt(x.x)

private:
    DensityMatrix base_state_;
    RMatrix matrix_;
    RMatrix inverse_;
};

CorrelationMetric correlation_metric(const Dataset& dataset);

// Weighted second moments of the measured means: Gamma_ab = sum_i w_i
// (f^i_a - fbar_a)(f^i_b - fbar_b), plus fbar itself.
struct SpreadMoments {
    RMatrix gamma;
    RVector f_bar;
};
SpreadMoments covariance_matrix(const Dataset& dataset);

// Score of one candidate level: the sample-size-weighted fit of the level's
// projections minus the Occam penalty p Lambda / 2.
struct ModelScore {
    LevelOfDescription level;
    int p = 0;
    double log_likelihood = 0.0;                    // asymptotic L
    std::optional<double> full_log_likelihood;      // finite-sample L at alpha
    std::optional<double> alpha;                    // evidence estimate
    double alpha_curvature = 0.0;                   // -alpha^2 d2L/dalpha2 at alpha
    bool alpha_low_curvature = false;               // curvature below p R / 2
    RVector per_sample_entropies;                   // S(pi_i || pi-bar)
    double misfit = 0.0;                            // S(mu-bar || pi-bar)
    double reference_entropy = 0.0;                 // S(pi-bar || sigma)
};

ModelScore asymptotic_log_likelihood(const Dataset& dataset, const LevelOfDescription& level);

double full_log_likelihood(const Dataset& dataset, const LevelOfDescription& level, double alpha);

struct AlphaEstimate {
    double alpha = 0.0;
    double curvature = 0.0;       // -alpha^2 d2L/dalpha2
    bool low_curvature = false;   // curvature < p R / 2
};

AlphaEstimate estimate_alpha(const Dataset& dataset, const LevelOfDescription& level);

// L(detailed) - L(simple) through the nested-projection decomposition; the
// levels must satisfy simple subset detailed subset span{1, F_b}.
double compare_levels(const Dataset& dataset, const LevelOfDescription& simple,
                      const LevelOfDescription& detailed);

// Directions of extremal mean-value spread per unit Kubo-Mori length:
// generalized eigenproblem Gamma v = lambda C v.
struct PcaResult {
    LevelOfDescription level;
    std::vector<RVector> directions;  // coefficient vectors, C-normalized
    RVector eigenvalues;              // descending, one per direction
};

// Core eigensolver, exposed for direct testing on raw matrices. Returns the
// top-p directions (descending eigenvalue), sign-fixed and deterministically
// ordered under near-degeneracy (gap < 1e-10 -> lexicographic).
std::vector<RVector> pca_directions(const RMatrix& gamma, const RMatrix& metric, int p,
                                    RVector* eigenvalues_out = nullptr);

PcaResult pca_orientation(const Dataset& dataset, int p);

}  // namespace thermoscope

#endif
