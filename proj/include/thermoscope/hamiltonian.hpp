#ifndef THERMOSCOPE_HAMILTONIAN_HPP
#define THERMOSCOPE_HAMILTONIAN_HPP

#include <optional>
#include <string>
#include <vector>

#include "thermoscope/model_selection.hpp"

namespace thermoscope {

// Outcome of the thermalization test: is the residual spread off the
// candidate one-parameter family small against what an extra manifold
// dimension would have to explain?
struct ThermalCheck {
    bool pass = false;
    double lhs = 0.0;     // [tr Gamma - <Gamma>_xi] + df.df
    double rhs = 0.0;     // (Lambda / N) (dim - 1)
    double margin = 0.0;  // rhs / lhs
    double margin_factor = 0.0;
};

// Qubit refinement of the thermal check: the spread and angle conditions
// tested separately, each as a margin rhs/lhs.
struct QubitThermal {
    bool pass = false;
    double margin_spread = 0.0;  // (Lambda/N) / Gamma_-
    double margin_angle = 0.0;   // (Lambda/N) [1/(fbar.fbar) + 1/(Gamma_+ - Gamma_-)] / (theta^2 / 2)
    double margin_factor = 0.0;
};

// Linear Hamiltonian ansatz H(xi) = -sum_b xi^b F_b with xi on the C-metric
// unit sphere, plus the per-sample inverse temperatures that match the
// measured internal energies.
struct HamiltonianEstimate {
    RVector xi;                          // C-normalized, gauge xi.fbar >= 0
    double beta_bar = 0.0;               // nonnegative by gauge
    std::vector<double> per_sample_beta;
    std::vector<double> internal_energies;  // U_i = <H(xi)>_{mu_i}
    double mean_internal_energy = 0.0;
    double max_log_likelihood = 0.0;
    double condition_residual = 0.0;     // stationarity residual at xi
    bool effective = false;              // observables span less than d^2 - 1 directions
    std::optional<ThermalCheck> thermal;
    std::optional<QubitThermal> qubit;  // filled for qubit datasets with a uniform reference
    std::vector<std::string> warnings;
};

// Spread geometry of a qubit dataset in the anisotropic model: dominant
// spread Gamma_+ along gamma_dir, isotropic remainder Gamma_-, and the mean
// values f_bar at angle theta from gamma_dir. All dots are C-metric.
struct QubitGeometry {
    double gamma_plus = 0.0;
    double gamma_minus = 0.0;
    RVector gamma_dir;  // C-unit vector
    RVector f_bar;      // covector of mean values
    RVector f_hat;      // C-unit vector along raised f_bar (zero when f_bar = 0)
    RVector eta;        // C-unit vector in span{gamma, f_hat} orthogonal to gamma
    double theta = 0.0; // angle(gamma, f_hat), in [0, pi/2]
    RMatrix metric;     // C
    RMatrix metric_inverse;

    double dot(const RVector& x, const RVector& y) const { return x.dot(metric * y); }
};

// Likelihood of the one-parameter family in direction xi (xi need not be
// normalized): (N/2) [<Gamma>_xi - df(xi).df(xi)] - Lambda/2, with df
// computed through an exact Gibbs solve at the energy <H(xi)>_{mu-bar}.
double xi_log_likelihood(const Dataset& dataset, const CorrelationMetric& metric,
                         const SpreadMoments& moments, const RVector& xi);

// Maximizer of xi_log_likelihood over the C-metric unit sphere by projected
// gradient ascent with multistart, polished on the stationarity condition
// (Gamma - <Gamma>_xi C) xi = beta-bar (xi.xi) df(xi).
HamiltonianEstimate estimate_xi_general(const Dataset& dataset, const CorrelationMetric& metric);

struct BetaEstimate {
    double beta_bar = 0.0;
    std::vector<double> per_sample;
    std::vector<double> internal_energies;
    bool closed_form = true;  // false when the reference is not uniform
};

// beta-bar from the fluctuation closed form sqrt(<d ln mu-bar; d ln mu-bar>)
// (uniform reference only; otherwise the weighted mean of the per-sample
// values is reported), and per-sample beta_i from 1-parameter moment solves.
BetaEstimate estimate_beta(const Dataset& dataset, const RVector& xi, const CorrelationMetric& metric);

ThermalCheck thermalization_condition(const Dataset& dataset, const CorrelationMetric& metric,
                                      const SpreadMoments& moments, const RVector& xi,
                                      double margin_factor);

QubitGeometry qubit_geometry(const RMatrix& gamma, const CorrelationMetric& metric, const RVector& f_bar);
QubitGeometry qubit_geometry(const Dataset& dataset, const CorrelationMetric& metric);

// Root of (Gamma - <Gamma>_xi C) xi = (xi.fbar)^2/(xi.xi) C xi - (xi.fbar) fbar
// by damped fixed-point iteration on the unit sphere; beta-free and invariant
// under rescaling of the start vector.
RVector qubit_mle_fixed_point(const QubitGeometry& geometry, const RMatrix& gamma, const RVector& f_bar,
                              const RVector* initial = nullptr);

// First-order solution eta.xi = [1 + (Gamma_+ - Gamma_-)/(fbar.fbar)]^{-1} eta.fhat.
// Warns (when a sink is given) outside the small-angle regime |sin theta| > 0.3.
RVector qubit_xi_perturbative(const QubitGeometry& geometry, std::vector<std::string>* warnings = nullptr);

// (N/2) {Gamma_+ - [1/(fbar.fbar) + 1/(Gamma_+ - Gamma_-)]^{-1} (eta.fhat)^2} - Lambda/2.
double qubit_max_likelihood(const QubitGeometry& geometry, double total_size, double log_size_sum);

QubitThermal qubit_thermal_conditions(const QubitGeometry& geometry, double total_size,
                                      double log_size_sum, double margin_factor);

// Full estimation pipeline: direction (exact optimizer or qubit perturbative
// closed form), temperatures, and the thermal check, with consistency
// warnings collected on the estimate.
HamiltonianEstimate estimate_hamiltonian(const Dataset& dataset, const CorrelationMetric& metric,
                                         double margin_factor, const std::string& method = "exact");

}  // namespace thermoscope

#endif
