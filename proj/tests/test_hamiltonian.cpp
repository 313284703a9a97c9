#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "thermoscope/hamiltonian.hpp"
#include "thermoscope/simulate.hpp"

using namespace thermoscope;

namespace {

RVector vec3(double x, double y, double z) {
    RVector v(3);
    v << x, y, z;
    return v;
}

// Flat metric: the Kubo-Mori matrix of the Paulis at the maximally mixed
// state is the identity, so C-dots reduce to Euclidean ones.
CorrelationMetric flat_metric() {
    return CorrelationMetric(DensityMatrix::uniform(2), RMatrix::Identity(3, 3));
}

// Spread with eigenvalue gplus along `axis` (Euclidean unit) and gminus on
// the transverse plane.
RMatrix axis_gamma(const RVector& axis, double gplus, double gminus) {
    return gminus * RMatrix::Identity(3, 3) + (gplus - gminus) * (axis * axis.transpose());
}

// The flat-metric counterpart of the anisotropic reference configuration:
// spread (0.01, 1e-4) along Z, center of squared length 0.01 tilted by
// `tilt`, ten samples of twenty thousand shots.
struct FlatFixture {
    CorrelationMetric metric = flat_metric();
    RMatrix gamma;
    RVector f_bar;
    double total_size = 200000.0;
    double log_size_sum = 10.0 * std::log(20000.0);

    explicit FlatFixture(double tilt)
        : gamma(axis_gamma(vec3(0, 0, 1), 0.01, 1e-4)),
          f_bar(vec3(0.1 * std::sin(tilt), 0.0, 0.1 * std::cos(tilt))) {}

    QubitGeometry geometry() const { return qubit_geometry(gamma, metric, f_bar); }
};

// Random small anisotropic cloud with exact second moments; uniform sigma,
// so the grid-search oracle's closed-form objective is exact.
Dataset random_cloud(std::uint64_t seed) {
    SplitMix64 rng(seed);
    auto unit = [&]() {
        RVector v(3);
        double n = 0.0;
        do {
            v << rng.next_normal(), rng.next_normal(), rng.next_normal();
            n = v.norm();
        } while (n < 1e-6);
        return RVector(v / n);
    };
    const RVector u = unit();
    RVector t = unit();
    t -= t.dot(u) * u;
    if (t.norm() < 1e-6) t = support::cross3(u, vec3(1, 0, 0));
    t.normalize();
    const RVector w = support::cross3(u, t);
    RVector center = unit() * (0.03 + 0.09 * rng.next_double());
    const double gplus = 0.003 + 0.017 * rng.next_double();
    const double gminus = gplus * (0.01 + 0.2 * rng.next_double());
    auto as_array = [](const RVector& v) { return std::array<double, 3>{v(0), v(1), v(2)}; };
    auto blochs = support::fourier_cloud(as_array(center), as_array(u), as_array(t), as_array(w),
                                         gplus, gminus);
    return support::make_qubit_dataset(blochs, std::vector<std::int64_t>(blochs.size(), 20000));
}

double euclid_angle(const RVector& a, const RVector& b) {
    return support::metric_angle(a, b, RMatrix::Identity(3, 3));
}

}  // namespace

TEST_SUITE("hamiltonian") {

TEST_CASE("qubit geometry satisfies its own contracts") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Dataset ds = seed == 0 ? support::tilted_cloud_dataset(M_PI / 16.0) : random_cloud(seed);
        CorrelationMetric metric = correlation_metric(ds);
        QubitGeometry geo = qubit_geometry(ds, metric);
        CHECK(geo.gamma_plus >= geo.gamma_minus);
        CHECK(geo.gamma_minus >= 0.0);
        CHECK(geo.dot(geo.gamma_dir, geo.gamma_dir) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(std::abs(geo.dot(geo.eta, geo.gamma_dir)) < 1e-10);
        CHECK(std::abs(std::sin(geo.theta) - geo.dot(geo.eta, geo.f_hat)) < 1e-10);
        CHECK(geo.theta >= 0.0);
        CHECK(geo.theta <= M_PI / 2.0 + 1e-12);
    }
}

TEST_CASE("an aligned cloud pins the direction to the common axis") {
    Dataset ds = support::tilted_cloud_dataset(0.0);
    CorrelationMetric metric = correlation_metric(ds);
    HamiltonianEstimate est = estimate_xi_general(ds, metric);
    CHECK(support::metric_angle(est.xi, vec3(0, 0, 1), metric.matrix()) < 1e-6);
    CHECK(std::abs(metric.dot(est.xi, est.xi) - 1.0) < 1e-10);
    CHECK(est.condition_residual <= 1e-8);
    CHECK(est.beta_bar >= 0.0);
    CHECK(est.xi(2) > 0.0);  // gauge: xi.fbar >= 0
}

TEST_CASE("the tilted cloud keeps the direction inside the preferred plane") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    HamiltonianEstimate est = estimate_xi_general(ds, metric);
    // span{gamma, f-hat} is the xz plane; y decouples in the metric too.
    CHECK(std::abs(est.xi(1)) <= 1e-6);
    CHECK(est.condition_residual <= 1e-8);
    QubitGeometry geo = qubit_geometry(ds, metric);
    RVector fp = qubit_mle_fixed_point(geo, covariance_matrix(ds).gamma, geo.f_bar);
    CHECK(std::abs(fp(1)) <= 1e-6);
}

TEST_CASE("the general optimizer matches an exhaustive direction search") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Dataset ds = random_cloud(seed);
        CorrelationMetric metric = correlation_metric(ds);
        auto [gamma, f_bar] = covariance_matrix(ds);
        HamiltonianEstimate est = estimate_xi_general(ds, metric);
        RVector grid = support::grid_search_xi(gamma, metric.matrix(), metric.inverse(), f_bar);
        const double deg = support::metric_angle_deg(est.xi, grid, metric.matrix());
        CAPTURE(seed);
        CHECK(deg <= 0.1);
        CHECK(est.condition_residual <= 1e-8);
        CHECK(std::abs(metric.dot(est.xi, est.xi) - 1.0) < 1e-10);
    }
}

TEST_CASE("the likelihood is stationary at the returned direction") {
    for (std::uint64_t seed = 3; seed <= 5; ++seed) {
        Dataset ds = random_cloud(seed);
        CorrelationMetric metric = correlation_metric(ds);
        const SpreadMoments moments = covariance_matrix(ds);
        HamiltonianEstimate est = estimate_xi_general(ds, metric);
        const double n = static_cast<double>(ds.total_size());
        const double h = 1e-5;
        // C-orthonormal tangent frame at xi.
        std::vector<RVector> frame;
        for (int axis = 0; axis < 3 && frame.size() < 2; ++axis) {
            RVector t = RVector::Zero(3);
            t(axis) = 1.0;
            t -= metric.dot(est.xi, t) * est.xi;
            for (const RVector& prev : frame) t -= metric.dot(prev, t) * prev;
            const double len = std::sqrt(metric.dot(t, t));
            if (len < 1e-6) continue;
            frame.push_back(t / len);
        }
        REQUIRE(frame.size() == 2);
        for (const RVector& t : frame) {
            const double up = xi_log_likelihood(ds, metric, moments, est.xi + h * t);
            const double down = xi_log_likelihood(ds, metric, moments, est.xi - h * t);
            CHECK(std::abs(up - down) / (2.0 * h) <= 1e-6 * n);
        }
    }
}

TEST_CASE("a spreadless cloud is rejected as degenerate") {
    std::vector<std::array<double, 3>> blochs(3, {0.0, 0.0, 0.1});
    Dataset ds = support::make_qubit_dataset(blochs, {10000, 10000, 10000});
    CorrelationMetric metric = correlation_metric(ds);
    CHECK_THROWS_AS(estimate_xi_general(ds, metric), DegenerateSpread);
}

TEST_CASE("a centered symmetric cloud has zero inverse temperature") {
    std::vector<std::array<double, 3>> blochs = {
        {0.0, 0.0, 1e-5}, {0.0, 0.0, -1e-5}, {1e-5, 0.0, 0.0}, {-1e-5, 0.0, 0.0}};
    Dataset ds = support::make_qubit_dataset(blochs, std::vector<std::int64_t>(4, 10000));
    CorrelationMetric metric = correlation_metric(ds);
    BetaEstimate beta = estimate_beta(ds, metric.normalized(vec3(0, 0, 1)), metric);
    CHECK(beta.closed_form);
    CHECK(std::abs(beta.beta_bar) < 1e-10);
    REQUIRE(beta.per_sample.size() == 4);
    for (double b : beta.per_sample) CHECK(std::abs(b) < 2e-5);
}

TEST_CASE("the fluctuation closed form reproduces the qubit inverse temperature") {
    const double b = 0.3;
    std::vector<std::array<double, 3>> blochs(3, {0.0, 0.0, b});
    Dataset ds = support::make_qubit_dataset(blochs, std::vector<std::int64_t>(3, 20000));
    CorrelationMetric metric = correlation_metric(ds);
    const RVector xi = metric.normalized(vec3(0, 0, 1));
    BetaEstimate beta = estimate_beta(ds, xi, metric);
    // The Gibbs state exp(beta' sigma_z)/Z with Bloch b has beta' = atanh(b);
    // C-normalization of xi rescales it by sqrt(1 - b^2).
    const double expected = std::sqrt(1.0 - b * b) * std::atanh(b);
    CHECK(beta.closed_form);
    CHECK(beta.beta_bar == doctest::Approx(expected).epsilon(1e-6));
    for (double bi : beta.per_sample) CHECK(bi == doctest::Approx(expected).epsilon(1e-6));

    // Quadrature cross-check of <d ln mu; d ln mu> at mu.
    const DensityMatrix& mu = ds.mean_image();
    const HermitianOperator lg = matrix_log(mu);
    const double mean_log = expectation(lg, mu);
    const HermitianOperator centered(lg.matrix() -
                                     mean_log * CMatrix::Identity(2, 2));
    const double quad = support::km_quadrature(centered, centered, mu);
    CHECK(beta.beta_bar * beta.beta_bar == doctest::Approx(quad).epsilon(1e-6));
}

TEST_CASE("per-sample temperatures reproduce the measured internal energies") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    HamiltonianEstimate est = estimate_xi_general(ds, metric);
    BetaEstimate beta = estimate_beta(ds, est.xi, metric);
    REQUIRE(beta.per_sample.size() == 10);
    const CMatrix field = est.xi(0) * pauli_x().matrix() + est.xi(1) * pauli_y().matrix() +
                          est.xi(2) * pauli_z().matrix();
    const HermitianOperator h(-field);
    for (std::size_t i = 0; i < beta.per_sample.size(); ++i) {
        const DensityMatrix state = gibbs_normalize(HermitianOperator(beta.per_sample[i] * field));
        CHECK(std::abs(expectation(h, state) - beta.internal_energies[i]) <= 1e-9);
    }
}

TEST_CASE("a non-uniform reference disables the closed form but not the solves") {
    std::vector<Sample> samples;
    for (int i = 0; i < 4; ++i) {
        Sample s;
        s.size = 20000;
        s.means = vec3(0.0, 0.0, 0.35 + 0.02 * i);
        samples.push_back(std::move(s));
    }
    Dataset ds(2, support::pauli_ops(), support::pauli_names(), support::bloch_state(0, 0, 0.5),
               std::move(samples));
    CorrelationMetric metric = correlation_metric(ds);
    BetaEstimate beta = estimate_beta(ds, metric.normalized(vec3(0, 0, 1)), metric);
    CHECK_FALSE(beta.closed_form);
    REQUIRE(beta.per_sample.size() == 4);
    const RVector& w = ds.weights();
    double mean = 0.0;
    for (int i = 0; i < 4; ++i) mean += w(i) * beta.per_sample[static_cast<std::size_t>(i)];
    CHECK(beta.beta_bar == doctest::Approx(mean).epsilon(1e-12));
    for (double bi : beta.per_sample) CHECK(std::isfinite(bi));
}

TEST_CASE("recovered temperatures match the generating ones within noise") {
    int good_seeds = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        SimulationConfig config;
        config.observables = support::pauli_ops();
        config.names = support::pauli_names();
        config.xi_true = vec3(0, 0, 1);
        for (int i = 0; i < 10; ++i) {
            config.betas.push_back(0.16 + 0.08 * i / 9.0);
            config.sizes.push_back(100000);
        }
        config.seed = 9000 + seed;
        const std::vector<DensityMatrix> truth = true_states(config);
        Dataset ds = simulate_dataset(config);
        CorrelationMetric metric = correlation_metric(ds);
        HamiltonianEstimate est = estimate_hamiltonian(ds, metric, 3.0);
        bool ok = true;
        for (int i = 0; i < 10; ++i) {
            const auto bloch = support::bloch_of(truth[static_cast<std::size_t>(i)]);
            const double b = std::sqrt(bloch[0] * bloch[0] + bloch[1] * bloch[1] +
                                       bloch[2] * bloch[2]);
            const double beta_true = std::atanh(b);
            // Euclidean z component of the effective field beta_i xi.
            const double beta_hat = est.per_sample_beta[static_cast<std::size_t>(i)] * est.xi(2);
            const double se = 1.0 / std::sqrt(100000.0 * (1.0 - b * b));
            if (std::abs(beta_hat - beta_true) > 3.0 * se) ok = false;
        }
        if (ok) ++good_seeds;
    }
    CHECK(good_seeds >= 27);
}

TEST_CASE("a noiseless one-parameter family passes the thermal check exactly") {
    std::vector<std::array<double, 3>> blochs;
    for (int i = 0; i < 10; ++i) blochs.push_back({0.0, 0.0, std::tanh(0.16 + 0.08 * i / 9.0)});
    Dataset ds = support::make_qubit_dataset(blochs, std::vector<std::int64_t>(10, 20000));
    CorrelationMetric metric = correlation_metric(ds);
    const SpreadMoments moments = covariance_matrix(ds);
    ThermalCheck thermal =
        thermalization_condition(ds, metric, moments, metric.normalized(vec3(0, 0, 1)), 3.0);
    CHECK(thermal.lhs <= 1e-9);
    CHECK(thermal.pass);
    CHECK(thermal.margin > 1e6);
}

TEST_CASE("the combined check is more conservative than the split qubit margins") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    const SpreadMoments moments = covariance_matrix(ds);
    HamiltonianEstimate est = estimate_xi_general(ds, metric);
    ThermalCheck thermal = thermalization_condition(ds, metric, moments, est.xi, 3.0);
    // Two manifold directions beyond the family: rhs = 2 Lambda / N.
    CHECK(thermal.rhs == doctest::Approx(2.0 * std::log(20000.0) / 20000.0).epsilon(1e-12));
    CHECK(thermal.margin > 2.2);
    CHECK(thermal.margin < 2.9);
    CHECK_FALSE(thermal.pass);
    QubitThermal split = qubit_thermal_conditions(qubit_geometry(ds, metric), ds.total_size(),
                                                  ds.log_size_sum(), 3.0);
    CHECK(split.pass);
    CHECK(split.margin_spread > thermal.margin);
    CHECK(split.margin_angle > thermal.margin);
}

TEST_CASE("the fixed point lands on the dominant axis when aligned or centerless") {
    FlatFixture aligned(0.0);
    QubitGeometry geo = aligned.geometry();
    RVector xi = qubit_mle_fixed_point(geo, aligned.gamma, aligned.f_bar);
    CHECK(euclid_angle(xi, vec3(0, 0, 1)) <= 1e-8);

    const RVector zero = RVector::Zero(3);
    QubitGeometry centerless = qubit_geometry(aligned.gamma, aligned.metric, zero);
    RVector xi0 = qubit_mle_fixed_point(centerless, aligned.gamma, zero);
    CHECK(euclid_angle(xi0, vec3(0, 0, 1)) <= 1e-8);
}

TEST_CASE("the fixed point agrees with the general optimizer on the reference cloud") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    QubitGeometry geo = qubit_geometry(ds, metric);
    RVector fp = qubit_mle_fixed_point(geo, covariance_matrix(ds).gamma, geo.f_bar);
    HamiltonianEstimate est = estimate_xi_general(ds, metric);
    const double angle = support::metric_angle(fp, est.xi, metric.matrix());
    CAPTURE(angle);
    CHECK(angle <= 1e-4);
}

TEST_CASE("the fixed point ignores rescaling of its start vector") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    QubitGeometry geo = qubit_geometry(ds, metric);
    const RMatrix gamma = covariance_matrix(ds).gamma;
    const RVector start = vec3(0.3, 0.2, 0.9);
    RVector base;
    bool first = true;
    for (double c : {1e-3, 1.0, 1e3}) {
        const RVector scaled = c * start;
        RVector xi = qubit_mle_fixed_point(geo, gamma, geo.f_bar, &scaled);
        if (first) {
            base = xi;
            first = false;
        } else {
            CHECK(support::metric_angle(xi, base, metric.matrix()) <= 1e-8);
        }
    }
}

TEST_CASE("the perturbative direction interpolates between axis and center") {
    FlatFixture fixture(M_PI / 16.0);
    QubitGeometry geo = fixture.geometry();
    RVector xi = qubit_xi_perturbative(geo);
    const double along_eta = geo.dot(geo.eta, xi);
    const double expected = std::sin(M_PI / 16.0) / 1.99;
    CHECK(along_eta == doctest::Approx(expected).epsilon(1e-10));
    const double deg = support::metric_angle_deg(xi, geo.gamma_dir, geo.metric);
    CHECK(deg == doctest::Approx(std::asin(expected) * 180.0 / M_PI).epsilon(1e-9));
    CHECK(std::abs(deg - 5.63) < 0.05);
    // Half the tilting angle: the direction nearly bisects gamma and f-hat.
    CHECK(std::abs(deg - (180.0 / M_PI) * (M_PI / 32.0)) < 0.01);
}

TEST_CASE("isotropic spread hands the direction to the center of mass") {
    CorrelationMetric metric = flat_metric();
    const RMatrix gamma = 0.005 * RMatrix::Identity(3, 3);
    const RVector f_bar = 0.1 * vec3(std::sin(0.4), 0.0, std::cos(0.4));
    QubitGeometry geo = qubit_geometry(gamma, metric, f_bar);
    RVector xi = qubit_xi_perturbative(geo);
    CHECK(euclid_angle(xi, f_bar) <= 1e-8);
}

TEST_CASE("strong anisotropy hands the direction to the spread axis") {
    CorrelationMetric metric = flat_metric();
    const RMatrix gamma = axis_gamma(vec3(0, 0, 1), 0.1, 1e-4);
    const RVector f_bar = 0.01 * vec3(std::sin(0.3), 0.0, std::cos(0.3));  // f.f = 1e-4
    QubitGeometry geo = qubit_geometry(gamma, metric, f_bar);
    RVector xi = qubit_xi_perturbative(geo);
    CHECK(std::abs(geo.dot(geo.eta, xi)) < 1e-3);
    CHECK(support::metric_angle_deg(xi, geo.gamma_dir, geo.metric) < 0.05);
}

TEST_CASE("the perturbative path warns outside the small-angle regime") {
    std::vector<std::string> warnings;
    FlatFixture wide(M_PI / 4.0);
    QubitGeometry geo = wide.geometry();
    qubit_xi_perturbative(geo, &warnings);
    CHECK_FALSE(warnings.empty());

    warnings.clear();
    FlatFixture narrow(M_PI / 16.0);
    QubitGeometry ngeo = narrow.geometry();
    qubit_xi_perturbative(ngeo, &warnings);
    CHECK(warnings.empty());
}

TEST_CASE("first-order accuracy degrades no faster than the squared tilt") {
    SplitMix64 rng(314);
    CorrelationMetric metric = flat_metric();
    auto unit = [&]() {
        RVector v(3);
        double n = 0.0;
        do {
            v << rng.next_normal(), rng.next_normal(), rng.next_normal();
            n = v.norm();
        } while (n < 1e-6);
        return RVector(v / n);
    };
    auto log_uniform = [&]() { return std::pow(10.0, -4.0 + 3.0 * rng.next_double()); };
    for (int trial = 0; trial < 40; ++trial) {
        double gplus = log_uniform();
        double gminus = log_uniform();
        if (gminus > gplus) std::swap(gplus, gminus);
        const double ff = log_uniform();
        const double theta = 0.02 + (M_PI / 8.0 - 0.02) * rng.next_double();
        const RVector axis = unit();
        RVector trans = unit();
        trans -= trans.dot(axis) * axis;
        if (trans.norm() < 1e-6) continue;
        trans.normalize();
        const RVector f_hat = std::cos(theta) * axis + std::sin(theta) * trans;
        const RMatrix gamma = axis_gamma(axis, gplus, gminus);
        const RVector f_bar = std::sqrt(ff) * f_hat;
        QubitGeometry geo = qubit_geometry(gamma, metric, f_bar);
        RVector pert = qubit_xi_perturbative(geo);
        RVector exact = qubit_mle_fixed_point(geo, gamma, f_bar);
        const double gap = std::abs(geo.dot(geo.eta, pert) - geo.dot(geo.eta, exact));
        CAPTURE(trial);
        CHECK(gap <= std::sin(geo.theta) * std::sin(geo.theta));
    }
}

TEST_CASE("the closed-form likelihood collapses correctly when aligned") {
    FlatFixture aligned(0.0);
    QubitGeometry geo = aligned.geometry();
    const double value = qubit_max_likelihood(geo, aligned.total_size, aligned.log_size_sum);
    const double expected = 0.5 * aligned.total_size * 0.01 - 0.5 * aligned.log_size_sum;
    CHECK(value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("the closed-form likelihood matches a direct evaluation on the cloud") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    const SpreadMoments moments = covariance_matrix(ds);
    QubitGeometry geo = qubit_geometry(ds, metric);
    RVector xi = qubit_xi_perturbative(geo);
    const double closed = qubit_max_likelihood(geo, ds.total_size(), ds.log_size_sum());
    const double direct = xi_log_likelihood(ds, metric, moments, xi);
    const double theta4 = std::pow(M_PI / 16.0, 4);
    CHECK(std::abs(closed - direct) <= theta4 * ds.total_size());
}

TEST_CASE("the likelihood is continuous into the isotropic limit") {
    CorrelationMetric metric = flat_metric();
    const RVector f_bar = 0.1 * vec3(std::sin(0.3), 0.0, std::cos(0.3));
    const double n = 200000.0;
    const double lam = 10.0 * std::log(20000.0);
    QubitGeometry iso = qubit_geometry(0.005 * RMatrix::Identity(3, 3), metric, f_bar);
    const double at_limit = qubit_max_likelihood(iso, n, lam);
    CHECK(at_limit == doctest::Approx(0.5 * n * 0.005 - 0.5 * lam).epsilon(1e-12));
    QubitGeometry near = qubit_geometry(axis_gamma(vec3(0, 0, 1), 0.005 + 1e-9, 0.005), metric, f_bar);
    const double nearby = qubit_max_likelihood(near, n, lam);
    CHECK(std::abs(nearby - at_limit) <= 1e-3);
}

TEST_CASE("the split thermal margins reproduce the reference arithmetic") {
    FlatFixture fixture(M_PI / 16.0);
    QubitGeometry geo = fixture.geometry();
    QubitThermal out =
        qubit_thermal_conditions(geo, fixture.total_size, fixture.log_size_sum, 3.0);
    const double ln_over_n = std::log(20000.0) / 20000.0;
    CHECK(out.margin_spread == doctest::Approx(ln_over_n / 1e-4).epsilon(1e-10));
    const double rhs_angle = ln_over_n * (1.0 / 0.01 + 1.0 / 0.0099);
    const double half_theta2 = 0.5 * (M_PI / 16.0) * (M_PI / 16.0);
    CHECK(out.margin_angle == doctest::Approx(rhs_angle / half_theta2).epsilon(1e-10));
    CHECK(out.margin_spread == doctest::Approx(4.95).epsilon(0.01));
    CHECK(out.margin_angle == doctest::Approx(5.16).epsilon(0.01));
    CHECK(out.pass);

    // Wider tilt: the angle condition fails on its own.
    FlatFixture wide(M_PI / 4.0);
    QubitGeometry wgeo = wide.geometry();
    QubitThermal wider = qubit_thermal_conditions(wgeo, wide.total_size, wide.log_size_sum, 3.0);
    CHECK(wider.margin_angle == doctest::Approx(0.3227).epsilon(5e-3));
    CHECK(wider.margin_angle < 1.0);
    CHECK_FALSE(wider.pass);

    // Transverse noise as large as the signal: the spread condition fails.
    QubitGeometry noisy = qubit_geometry(axis_gamma(vec3(0, 0, 1), 0.01, 0.01 - 1e-15),
                                         fixture.metric, fixture.f_bar);
    QubitThermal iso = qubit_thermal_conditions(noisy, fixture.total_size, fixture.log_size_sum, 3.0);
    CHECK(iso.margin_spread == doctest::Approx(0.0495).epsilon(1e-2));
    CHECK_FALSE(iso.pass);
}

TEST_CASE("a perfect canonical line makes both margins unbounded") {
    CorrelationMetric metric = flat_metric();
    QubitGeometry geo =
        qubit_geometry(axis_gamma(vec3(0, 0, 1), 0.01, 0.0), metric, 0.1 * vec3(0, 0, 1));
    QubitThermal out = qubit_thermal_conditions(geo, 200000.0, 10.0 * std::log(20000.0), 3.0);
    CHECK(out.margin_spread > 1e6);
    CHECK(out.margin_angle > 1e6);
    CHECK(out.pass);
}

TEST_CASE("the full pipeline assembles a consistent estimate") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    HamiltonianEstimate est = estimate_hamiltonian(ds, metric, 3.0);
    CHECK(std::abs(metric.dot(est.xi, est.xi) - 1.0) < 1e-10);
    CHECK(est.per_sample_beta.size() == 10);
    CHECK(est.internal_energies.size() == 10);
    CHECK_FALSE(est.effective);
    REQUIRE(est.thermal.has_value());
    REQUIRE(est.qubit.has_value());
    CHECK(est.qubit->pass);
    CHECK(est.qubit->margin_spread == doctest::Approx(4.95).epsilon(0.03));
    CHECK(est.qubit->margin_angle == doctest::Approx(5.16).epsilon(0.03));
    const SpreadMoments moments = covariance_matrix(ds);
    CHECK(est.mean_internal_energy == doctest::Approx(-est.xi.dot(moments.f_bar)).epsilon(1e-9));
}

TEST_CASE("the perturbative method routes through the closed forms") {
    Dataset ds = support::tilted_cloud_dataset(M_PI / 16.0);
    CorrelationMetric metric = correlation_metric(ds);
    HamiltonianEstimate est = estimate_hamiltonian(ds, metric, 3.0, "perturbative");
    QubitGeometry geo = qubit_geometry(ds, metric);
    CHECK(support::metric_angle(est.xi, qubit_xi_perturbative(geo), metric.matrix()) < 1e-12);
    CHECK(est.max_log_likelihood ==
          doctest::Approx(qubit_max_likelihood(geo, ds.total_size(), ds.log_size_sum()))
              .epsilon(1e-12));
    CHECK_THROWS_AS(estimate_hamiltonian(ds, metric, 3.0, "nonsense"), ValidationError);
}

}  // TEST_SUITE
