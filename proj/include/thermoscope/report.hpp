#ifndef THERMOSCOPE_REPORT_HPP
#define THERMOSCOPE_REPORT_HPP

#include <optional>
#include <string>
#include <vector>

#include "thermoscope/hamiltonian.hpp"
#include "thermoscope/model_selection.hpp"

namespace thermoscope {

struct GaussianRegime {
    bool inside = false;
    double max_pairwise_entropy = 0.0;  // max_{i != j} S(mu_i || mu_j)
    double max_center_entropy = 0.0;    // max_i S(mu_i || mu-bar)
};

struct LevelComparison {
    std::string simple_label;
    std::string detailed_label;
    double delta_log_likelihood = 0.0;  // L(detailed) - L(simple) via the nested criterion
};

struct AssessOptions {
    double margin_factor = 3.0;
    // Evidence alpha by default; a fixed value skips the estimation.
    std::optional<double> fixed_alpha;
};

struct AssessmentReport {
    std::string dataset_digest;
    GaussianRegime gaussian_regime;
    std::vector<ModelScore> scores;          // one per candidate, input order
    RVector pca_eigenvalues;                 // generalized spread spectrum (auto candidates only)
    std::string winner_label;
    int winner_p = -1;
    std::vector<LevelComparison> comparisons;
    std::optional<HamiltonianEstimate> hamiltonian;
    std::optional<QubitThermal> qubit_margins;
    std::string verdict;                     // thermalized | not-thermalized | inconclusive
    double margin_factor = 3.0;
    std::vector<std::string> warnings;
};

// Full pipeline: regime check, candidate scoring (auto PCA levels when the
// candidate list is empty), pairwise nested comparisons, and, when a single
// constant of the motion wins, the Hamiltonian estimate and thermal verdict.
AssessmentReport assess(const Dataset& dataset, const std::vector<LevelOfDescription>& candidates,
                        const AssessOptions& options = {});

}  // namespace thermoscope

#endif
