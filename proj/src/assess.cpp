#include "thermoscope/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thermoscope/errors.hpp"

namespace thermoscope {

namespace {

constexpr double kPairwiseEntropyMax = 0.5;
constexpr double kCenterEntropyMax = 0.25;
constexpr double kScoreTieTol = 1e-9;

GaussianRegime regime_check(const Dataset& dataset) {
    GaussianRegime regime;
    const std::vector<DensityMatrix>& images = dataset.images();
    const DensityMatrix& mean = dataset.mean_image();
    for (std::size_t i = 0; i < images.size(); ++i) {
        regime.max_center_entropy = std::max(regime.max_center_entropy,
                                             relative_entropy(images[i], mean));
        for (std::size_t j = 0; j < images.size(); ++j) {
            if (i == j) continue;
            regime.max_pairwise_entropy = std::max(regime.max_pairwise_entropy,
                                                   relative_entropy(images[i], images[j]));
        }
    }
    regime.inside = regime.max_pairwise_entropy <= kPairwiseEntropyMax &&
                    regime.max_center_entropy <= kCenterEntropyMax;
    return regime;
}

}  // namespace

AssessmentReport assess(const Dataset& dataset, const std::vector<LevelOfDescription>& candidates,
                        const AssessOptions& options) {
    if (options.margin_factor < 1.0) throw ValidationError("margin factor must be at least 1");

    AssessmentReport report;
    report.margin_factor = options.margin_factor;
    report.gaussian_regime = regime_check(dataset);
    if (!report.gaussian_regime.inside)
        report.warnings.push_back("sample spread exceeds the small-spread regime; scores may be unreliable");

    std::vector<LevelOfDescription> levels = candidates;
    const bool auto_candidates = levels.empty();
    if (auto_candidates) {
        levels.push_back(LevelOfDescription::empty(dataset.dim()));
        const PcaResult full = pca_orientation(dataset, dataset.m());
        report.pca_eigenvalues = full.eigenvalues;
        for (int p = 1; p < dataset.m(); ++p) levels.push_back(pca_orientation(dataset, p).level);
        levels.push_back(full.level);
    }

    report.scores.reserve(levels.size());
    for (const LevelOfDescription& level : levels) {
        ModelScore score = asymptotic_log_likelihood(dataset, level);
        if (options.fixed_alpha) {
            score.alpha = *options.fixed_alpha;
            score.full_log_likelihood = full_log_likelihood(dataset, level, *options.fixed_alpha);
        } else if (level.p() > 0) {
            try {
                const AlphaEstimate alpha = estimate_alpha(dataset, level);
                score.alpha = alpha.alpha;
                score.alpha_curvature = alpha.curvature;
                score.alpha_low_curvature = alpha.low_curvature;
                score.full_log_likelihood = full_log_likelihood(dataset, level, alpha.alpha);
            } catch (const AlphaUnbounded&) {
                report.warnings.push_back("evidence weight for level " + level.label() +
                                          " is unbounded; asymptotic score kept");
            }
        }
        report.scores.push_back(std::move(score));
    }

    // Winner by asymptotic score; near-ties resolve toward fewer parameters.
    int best = 0;
    for (int k = 1; k < static_cast<int>(report.scores.size()); ++k) {
        const ModelScore& cand = report.scores[static_cast<std::size_t>(k)];
        const ModelScore& cur = report.scores[static_cast<std::size_t>(best)];
        if (cand.log_likelihood > cur.log_likelihood + kScoreTieTol ||
            (std::abs(cand.log_likelihood - cur.log_likelihood) <= kScoreTieTol && cand.p < cur.p))
            best = k;
    }
    report.winner_label = report.scores[static_cast<std::size_t>(best)].level.label();
    report.winner_p = report.scores[static_cast<std::size_t>(best)].p;

    // Pairwise comparisons along the nesting chain (auto candidates are
    // nested by construction; explicit ones are compared where they nest).
    std::vector<int> order(levels.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return levels[static_cast<std::size_t>(a)].p() < levels[static_cast<std::size_t>(b)].p();
    });
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const LevelOfDescription& simple = levels[static_cast<std::size_t>(order[k])];
        const LevelOfDescription& detailed = levels[static_cast<std::size_t>(order[k + 1])];
        try {
            LevelComparison cmp;
            cmp.simple_label = simple.label();
            cmp.detailed_label = detailed.label();
            cmp.delta_log_likelihood = compare_levels(dataset, simple, detailed);
            report.comparisons.push_back(std::move(cmp));
        } catch (const NotNested&) {
            // explicit candidates need not form a chain
        }
    }

    if (report.winner_p == 0) {
        report.verdict = "inconclusive";
        report.warnings.push_back(
            "sample spread is consistent with a single stationary state; no direction to test");
        return report;
    }
    if (report.winner_p != 1) {
        report.verdict = "not-thermalized";
        return report;
    }

    try {
        const CorrelationMetric metric = correlation_metric(dataset);
        HamiltonianEstimate est = estimate_hamiltonian(dataset, metric, options.margin_factor, "exact");
        if (est.qubit) report.qubit_margins = est.qubit;
        // The split qubit conditions are sharper than the combined bound, so
        // they carry the verdict whenever they are available.
        const ThermalCheck& thermal = *est.thermal;
        const bool pass = est.qubit ? est.qubit->pass : thermal.pass;
        const bool weak = est.qubit ? std::min(est.qubit->margin_spread, est.qubit->margin_angle) >= 1.0
                                    : thermal.lhs <= thermal.rhs;
        if (pass) {
            report.verdict = "thermalized";
        } else if (weak) {
            report.verdict = "inconclusive";
            report.warnings.push_back("thermal condition holds but without the required margin");
        } else {
            report.verdict = "not-thermalized";
        }
        for (const std::string& w : est.warnings) report.warnings.push_back(w);
        report.hamiltonian = std::move(est);
    } catch (const DegenerateSpread& e) {
        report.verdict = "inconclusive";
        report.warnings.push_back(std::string("direction estimation skipped: ") + e.what());
    } catch (const SingularMetric& e) {
        report.verdict = "inconclusive";
        report.warnings.push_back(std::string("correlation metric unavailable: ") + e.what());
    } catch (const NonConvergence& e) {
        report.verdict = "inconclusive";
        report.warnings.push_back(std::string("direction optimizer did not converge: ") + e.what());
    }
    return report;
}

}  // namespace thermoscope
