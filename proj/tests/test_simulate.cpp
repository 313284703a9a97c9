#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "thermoscope/errors.hpp"
#include "thermoscope/hamiltonian.hpp"
#include "thermoscope/io.hpp"
#include "thermoscope/model_selection.hpp"
#include "thermoscope/rng.hpp"
#include "thermoscope/simulate.hpp"

using namespace thermoscope;

namespace {

// Three fixed qubit states with distinct means on every Pauli axis.
std::vector<DensityMatrix> probe_states() {
    return {support::bloch_state(0.1, 0.0, 0.2), support::bloch_state(0.0, 0.15, -0.1),
            support::bloch_state(0.05, -0.05, 0.12)};
}

SimulationConfig explicit_config(std::vector<DensityMatrix> states, std::int64_t size,
                                 const std::string& noise, std::uint64_t seed) {
    SimulationConfig cfg;
    cfg.dim = 2;
    cfg.observables = support::pauli_ops();
    cfg.names = support::pauli_names();
    cfg.sizes.assign(states.size(), size);
    cfg.states = std::move(states);
    cfg.noise_model = noise;
    cfg.seed = seed;
    return cfg;
}

int count_lines(const std::string& text) {
    int lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    return lines;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("gaussian noise vanishes at astronomical sample sizes") {
    const std::vector<DensityMatrix> states = probe_states();
    const Dataset ds = simulate_dataset(explicit_config(states, 100000000, "gaussian", 11));
    REQUIRE(ds.samples_count() == 3);
    for (int i = 0; i < 3; ++i) {
        const auto truth = support::bloch_of(states[static_cast<std::size_t>(i)]);
        for (int b = 0; b < 3; ++b)
            CHECK(std::abs(ds.samples()[static_cast<std::size_t>(i)].means[b] - truth[static_cast<std::size_t>(b)]) < 1e-3);
    }
}

TEST_CASE("multinomial means on the maximally mixed state stay within four sigma") {
    // 30000 shots split over three axes: 10000 per axis, so four standard
    // deviations of a +-1 outcome mean is 0.04.
    const double tol = 4.0 / std::sqrt(10000.0);
    int good = 0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        const Dataset ds = simulate_dataset(explicit_config(
            {DensityMatrix::uniform(2)}, 30000, "multinomial", 500 + static_cast<std::uint64_t>(s)));
        const RVector& f = ds.samples()[0].means;
        if (std::abs(f[0]) <= tol && std::abs(f[1]) <= tol && std::abs(f[2]) <= tol) ++good;
    }
    CHECK(good >= 198);  // 99% of seeds
}

TEST_CASE("a fixed seed reproduces the dataset byte for byte") {
    SimulationConfig cfg = preset_config("z-family", 42);
    const std::string first = dataset_to_json(simulate_dataset(cfg)).dump();
    const std::string second = dataset_to_json(simulate_dataset(cfg)).dump();
    CHECK(first == second);

    cfg.noise_model = "multinomial";
    cfg.sizes.assign(cfg.sizes.size(), 30000);
    const std::string multi_first = dataset_to_json(simulate_dataset(cfg)).dump();
    const std::string multi_second = dataset_to_json(simulate_dataset(cfg)).dump();
    CHECK(multi_first == multi_second);
    CHECK(multi_first != first);

    SimulationConfig other = preset_config("z-family", 43);
    CHECK(dataset_to_json(simulate_dataset(other)).dump() != first);
}

TEST_CASE("gaussian standardized residuals pass a KS test at the 1% level") {
    SimulationConfig cfg = preset_config("z-family", 0);
    const std::vector<DensityMatrix> truth = true_states(cfg);
    std::vector<double> z;
    for (int t = 0; t < 10; ++t) {
        cfg.seed = 5000 + static_cast<std::uint64_t>(t);
        const Dataset ds = simulate_dataset(cfg);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            for (int b = 0; b < 3; ++b) {
                const HermitianOperator& op = cfg.observables[static_cast<std::size_t>(b)];
                const double mean = expectation(op, truth[i]);
                const double second =
                    expectation(HermitianOperator(CMatrix(op.matrix() * op.matrix())), truth[i]);
                const double var = second - mean * mean;
                z.push_back((ds.samples()[i].means[b] - mean) *
                            std::sqrt(static_cast<double>(cfg.sizes[i]) / var));
            }
        }
    }
    REQUIRE(z.size() == 300);
    CHECK(support::ks_statistic(z) <= support::ks_critical_001(z.size()));
}

TEST_CASE("multinomial standardized residuals pass a KS test at the 1% level") {
    const std::vector<DensityMatrix> states = probe_states();
    std::vector<double> z;
    for (int t = 0; t < 10; ++t) {
        const Dataset ds = simulate_dataset(
            explicit_config(states, 30000, "multinomial", 6000 + static_cast<std::uint64_t>(t)));
        for (std::size_t i = 0; i < states.size(); ++i) {
            const auto truth = support::bloch_of(states[i]);
            for (int b = 0; b < 3; ++b) {
                const double mean = truth[static_cast<std::size_t>(b)];
                const double var = 1.0 - mean * mean;  // +-1 outcomes
                const double shots = 10000.0;          // size / three axes
                z.push_back((ds.samples()[i].means[b] - mean) * std::sqrt(shots / var));
            }
        }
    }
    REQUIRE(z.size() == 90);
    CHECK(support::ks_statistic(z) <= support::ks_critical_001(z.size()));
}

TEST_CASE("multinomial sampling is unbiased") {
    const DensityMatrix state = support::bloch_state(0.2, 0.0, 0.3);
    const auto truth = support::bloch_of(state);
    const int trials = 1000;
    const double shots = 1000.0;  // 3000 split over three axes
    RVector residual = RVector::Zero(3);
    for (int t = 0; t < trials; ++t) {
        const Dataset ds = simulate_dataset(
            explicit_config({state}, 3000, "multinomial", 7000 + static_cast<std::uint64_t>(t)));
        for (int b = 0; b < 3; ++b)
            residual[b] += ds.samples()[0].means[b] - truth[static_cast<std::size_t>(b)];
    }
    residual /= static_cast<double>(trials);
    for (int b = 0; b < 3; ++b) {
        const double var = 1.0 - truth[static_cast<std::size_t>(b)] * truth[static_cast<std::size_t>(b)];
        CHECK(std::abs(residual[b]) <= 3.0 * std::sqrt(var / (trials * shots)));
    }
}

TEST_CASE("family truth reproduces the closed-form Gibbs states") {
    SimulationConfig cfg = preset_config("z-family", 13);
    const std::vector<DensityMatrix> states = true_states(cfg);
    REQUIRE(states.size() == cfg.betas.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto b = support::bloch_of(states[i]);
        CHECK(std::abs(b[0]) < 1e-12);
        CHECK(std::abs(b[1]) < 1e-12);
        CHECK(b[2] == doctest::Approx(std::tanh(cfg.betas[i])).epsilon(1e-12));
    }

    // beta = 0 returns the reference state itself, uniform or not.
    SimulationConfig anchored;
    anchored.dim = 2;
    anchored.observables = support::pauli_ops();
    anchored.reference = support::bloch_state(0.0, 0.0, 0.5);
    anchored.xi_true = RVector::Zero(3);
    anchored.xi_true[2] = 1.0;
    anchored.betas = {0.0};
    anchored.sizes = {1000};
    const auto anchor = support::bloch_of(true_states(anchored)[0]);
    CHECK(std::abs(anchor[0]) < 1e-12);
    CHECK(std::abs(anchor[1]) < 1e-12);
    CHECK(anchor[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("simulated datasets carry their provenance in metadata") {
    const Dataset ds = simulate_dataset(preset_config("z-family", 21));
    CHECK(ds.metadata().at("noise_model") == "gaussian");
    CHECK(ds.metadata().at("rng") == kRngAlgorithm);
    CHECK(ds.metadata().at("seed") == "21");
    CHECK(ds.metadata().at("true_p") == "1");
    CHECK(ds.metadata().at("preset") == "z-family");
}

TEST_CASE("the reference preset cloud lands near its advertised geometry") {
    const Dataset ds = simulate_dataset(preset_config("paper-qubit", 7));
    const CorrelationMetric metric = correlation_metric(ds);
    const QubitGeometry geo = qubit_geometry(ds, metric);
    CHECK(geo.gamma_plus / 0.01 == doctest::Approx(1.0).epsilon(0.3));
    CHECK(geo.gamma_minus / 1e-4 == doctest::Approx(1.0).epsilon(0.3));
    const double center2 = geo.f_bar.dot(geo.metric_inverse * geo.f_bar);
    CHECK(center2 / 0.01 == doctest::Approx(1.0).epsilon(0.3));
    CHECK(std::abs(geo.theta - std::numbers::pi / 16.0) <= 0.3 * std::numbers::pi / 16.0);
}

TEST_CASE("study rows do not depend on how many trials follow them") {
    const SimulationConfig cfg = preset_config("z-family", 77);
    const StudySummary three = recovery_study(cfg, 3);
    const StudySummary five = recovery_study(cfg, 5);
    REQUIRE(three.rows.size() == 3);
    REQUIRE(five.rows.size() == 5);
    for (std::size_t t = 0; t < 3; ++t) {
        const StudyRow& a = three.rows[t];
        const StudyRow& b = five.rows[t];
        REQUIRE_FALSE(a.failed);
        CHECK(a.selected_p == b.selected_p);
        CHECK(a.verdict == b.verdict);
        CHECK(a.dim_correct == b.dim_correct);
        CHECK(a.xi_angle_error_deg == b.xi_angle_error_deg);
        CHECK(a.beta_rel_error_med == b.beta_rel_error_med);
        CHECK(a.margin == b.margin);
    }
}

TEST_CASE("a z-family study recovers the single conserved quantity") {
    const StudySummary summary = recovery_study(preset_config("z-family", 2026), 100);
    CHECK(summary.failed_count == 0);
    CHECK(summary.dim_recovery_fraction >= 0.9);
    CHECK(summary.xi_angle_error_median_deg < 5.0);
}

TEST_CASE("an isotropic cloud rarely passes as one-dimensional") {
    const StudySummary summary = recovery_study(preset_config("isotropic-3d", 4090), 100);
    int one_dim = 0;
    for (const StudyRow& row : summary.rows)
        if (!row.failed && row.selected_p == 1) ++one_dim;
    CHECK(one_dim <= 10);
}

TEST_CASE("a single-trial study yields one populated row") {
    const StudySummary summary = recovery_study(preset_config("z-family", 5), 1);
    REQUIRE(summary.rows.size() == 1);
    const StudyRow& row = summary.rows[0];
    CHECK(row.trial == 0);
    CHECK(row.true_p == 1);
    CHECK_FALSE(row.failed);
    CHECK_FALSE(row.verdict.empty());
    CHECK(row.selected_p >= 0);
    CHECK(std::isfinite(row.xi_angle_error_deg));
    CHECK(summary.thermalized_count + summary.not_thermalized_count + summary.inconclusive_count +
              summary.failed_count ==
          1);
    CHECK(count_lines(study_csv(summary)) == 3);  // header, one row, summary
}

TEST_CASE("the study table lists one line per trial plus a summary") {
    const StudySummary summary = recovery_study(preset_config("z-family", 9), 4);
    const std::string csv = study_csv(summary);
    CHECK(count_lines(csv) == 6);
    CHECK(csv.rfind("trial,", 0) == 0);
    CHECK(csv.find("\nsummary,") != std::string::npos);
    std::size_t pos = csv.find('\n') + 1;
    for (int t = 0; t < 4; ++t) {
        CHECK(csv.compare(pos, 2, std::to_string(t) + ",") == 0);
        pos = csv.find('\n', pos) + 1;
    }
}

TEST_CASE("malformed configurations are rejected") {
    SimulationConfig both = explicit_config(probe_states(), 1000, "gaussian", 1);
    both.xi_true = RVector::Zero(3);
    both.xi_true[2] = 1.0;
    CHECK_THROWS_AS(simulate_dataset(both), ValidationError);

    SimulationConfig neither = explicit_config({}, 1000, "gaussian", 1);
    neither.sizes = {1000};
    CHECK_THROWS_AS(simulate_dataset(neither), ValidationError);

    SimulationConfig no_betas;
    no_betas.dim = 2;
    no_betas.observables = support::pauli_ops();
    no_betas.xi_true = RVector::Zero(3);
    no_betas.xi_true[2] = 1.0;
    no_betas.sizes = {1000};
    CHECK_THROWS_AS(simulate_dataset(no_betas), ValidationError);

    SimulationConfig short_sizes = explicit_config(probe_states(), 1000, "gaussian", 1);
    short_sizes.sizes.pop_back();
    CHECK_THROWS_AS(simulate_dataset(short_sizes), ValidationError);

    SimulationConfig zero_size = explicit_config(probe_states(), 1000, "gaussian", 1);
    zero_size.sizes[1] = 0;
    CHECK_THROWS_AS(simulate_dataset(zero_size), ValidationError);

    // Two shots cannot be split across three observables.
    CHECK_THROWS_AS(simulate_dataset(explicit_config(probe_states(), 2, "multinomial", 1)),
                    ValidationError);

    SimulationConfig bad_noise = explicit_config(probe_states(), 1000, "poisson", 1);
    CHECK_THROWS_AS(simulate_dataset(bad_noise), ValidationError);

    CHECK_THROWS_AS(preset_config("unknown-preset", 1), ValidationError);
}

}  // TEST_SUITE
