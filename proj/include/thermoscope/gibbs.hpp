#ifndef THERMOSCOPE_GIBBS_HPP
#define THERMOSCOPE_GIBBS_HPP

#include <string>
#include <vector>

#include "thermoscope/operators.hpp"

namespace thermoscope {

// An ordered set of linearly independent observables {G_a} spanning, together
// with the (implicit) unit operator, the exponents of a Gibbs family. The unit
// operator is never stored; normalization supplies it.
class LevelOfDescription {
public:
    LevelOfDescription(std::vector<HermitianOperator> observables, std::string label);
    // Empty level (p = 0): the family degenerates to the reference state alone.
    static LevelOfDescription empty(int dim, std::string label = "p0");

    int p() const { return static_cast<int>(observables_.size()); }
    int dim() const { return dim_; }
    const std::vector<HermitianOperator>& observables() const { return observables_; }
    const std::string& label() const { return label_; }

private:
    LevelOfDescription() = default;
    std::vector<HermitianOperator> observables_;
    std::string label_;
    int dim_ = 0;
};

// A point on a Gibbs manifold: state = exp(ln ref - <ln ref>_ref - sum_a
// lagrange_a G_a) / Z, carried with its parameters.
struct GibbsState {
    DensityMatrix reference;
    LevelOfDescription level;
    RVector lagrange;
    DensityMatrix state;
    double log_partition = 0.0;
};

struct CenterOfMass {
    DensityMatrix exponential_mean;  // normalized exp(sum w_i ln rho_i)
    DensityMatrix mixture_mean;      // sum w_i rho_i
};

// Per-sample geometric bundle used by the finite-sample likelihood.
struct SampleGeometry {
    DensityMatrix image;       // mu_i
    GibbsState projection;     // pi_i
    DensityMatrix interpolant; // rho_i at mixing x_i
    double mixing = 0.0;       // x_i = alpha / (alpha + N_i)
    double weight = 0.0;       // w_i = N_i / N
};

// ln sigma - <ln sigma>_sigma as an operator; identically zero for the
// uniform state.
HermitianOperator reference_exponent(const DensityMatrix& reference);

bool is_uniform(const DensityMatrix& state, double tol = 1e-12);

// Condition number of the Hilbert-Schmidt Gram matrix of {1, ops...} with
// each operator scaled to unit HS norm. Levels and observable sets whose
// condition number exceeds kGramConditionMax are rejected as dependent.
double gram_condition(const std::vector<HermitianOperator>& ops);

// True when every operator of `inner` lies in span{1, outer...} with relative
// Hilbert-Schmidt residual <= tol.
bool spans_contain(const std::vector<HermitianOperator>& inner,
                   const std::vector<HermitianOperator>& outer, double tol = 1e-8);

// The unique state of Gibbs form on the full observable manifold with
// <F_b> = means_b. Throws InfeasibleMoments when the means are not attainable
// in the interior.
DensityMatrix tomographic_image(const RVector& means, const std::vector<HermitianOperator>& observables,
                                const DensityMatrix& reference);

// Coarse-graining projection: the Gibbs state on the level's manifold
// matching <G_a>_mu, which minimizes S(mu || .) over the manifold.
GibbsState project(const DensityMatrix& mu, const LevelOfDescription& level,
                   const DensityMatrix& reference);

// Normalized exp[(1-x) ln pi + x ln reference].
DensityMatrix interpolate(const GibbsState& projection, const DensityMatrix& reference, double x);

CenterOfMass center_of_mass(const std::vector<DensityMatrix>& states, const RVector& weights);

// S(mu||omega) - S(mu||pi) - S(pi||omega) with pi = project(mu, ...); exact
// up to solver tolerance for any omega on the same manifold.
double pythagoras_residual(const DensityMatrix& mu, const LevelOfDescription& level,
                           const DensityMatrix& reference, const GibbsState& omega);

}  // namespace thermoscope

#endif
