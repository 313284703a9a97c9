#ifndef THERMOSCOPE_OPERATORS_HPP
#define THERMOSCOPE_OPERATORS_HPP

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "thermoscope/errors.hpp"

namespace thermoscope {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Numerical policy shared across modules.
inline constexpr double kHermitianSymTol = 1e-12;   // symmetrize below this
inline constexpr double kHermitianRejectTol = 1e-8; // reject above this
inline constexpr double kRankEpsilon = 1e-12;       // eigenvalue floor for states
inline constexpr double kMomentTol = 1e-10;         // max moment residual
inline constexpr int kMomentMaxIter = 200;
inline constexpr double kGramConditionMax = 1e8;
inline constexpr double kMetricFloor = 1e-12;

// Hermitian operator on a d-dimensional Hilbert space. Construction
// symmetrizes (A + A^dag)/2 and rejects matrices further than 1e-8 from
// Hermitian in max-norm.
class HermitianOperator {
public:
    explicit HermitianOperator(CMatrix entries);

    static HermitianOperator identity(int dim);
    static HermitianOperator zero(int dim);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const CMatrix& matrix() const { return entries_; }

    double hs_norm() const { return entries_.norm(); }

private:
    CMatrix entries_;
};

struct Spectrum {
    RVector eigenvalues;  // ascending
    CMatrix eigenvectors; // columns
};

// Eigensystem of a Hermitian matrix (symmetrized input assumed).
Spectrum spectral_decompose(const CMatrix& hermitian);
inline Spectrum spectral_decompose(const HermitianOperator& op) { return spectral_decompose(op.matrix()); }

// Unit-trace positive state. Construction validates trace within 1e-12 and
// eigenvalues >= -1e-12, then clamps the spectrum to kRankEpsilon and
// renormalizes, caching the eigensystem.
class DensityMatrix {
public:
    // Zero-dimensional placeholder so aggregates can reserve a slot; every
    // operation on it is a bug. Valid states come from the paths below.
    DensityMatrix() = default;
    explicit DensityMatrix(const CMatrix& entries);

    static DensityMatrix uniform(int dim);
    // Trusted path: clamps/renormalizes the given spectrum without the trace
    // and positivity pre-checks (used where the spectrum is built internally).
    static DensityMatrix from_spectrum(RVector eigenvalues, CMatrix eigenvectors);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const CMatrix& matrix() const { return entries_; }
    const RVector& eigenvalues() const { return eigenvalues_; }
    const CMatrix& eigenvectors() const { return eigenvectors_; }

private:
    CMatrix entries_;
    RVector eigenvalues_;
    CMatrix eigenvectors_;
};

// exp(A)/tr exp(A), evaluated spectrally with max-eigenvalue shift.
DensityMatrix gibbs_normalize(const HermitianOperator& exponent);
// Also returns ln tr exp(A).
std::pair<DensityMatrix, double> gibbs_normalize_logz(const HermitianOperator& exponent);

// Principal logarithm of a full-rank state.
HermitianOperator matrix_log(const DensityMatrix& rho);

// Re tr(rho X); imaginary residue beyond 1e-12 is a bug guard.
double expectation(const HermitianOperator& x, const DensityMatrix& rho);

// S(rho||tau) = tr rho (ln rho - ln tau), in nats.
double relative_entropy(const DensityMatrix& rho, const DensityMatrix& tau);

// Canonical correlation <X;Y>_rho = int_0^1 dnu tr(rho^nu X rho^{1-nu} Y),
// evaluated in closed form in the eigenbasis of rho with the logarithmic-mean
// weight w(p,q) = (p-q)/(ln p - ln q), w(p,p) = p.
double kubo_mori(const HermitianOperator& x, const HermitianOperator& y, const DensityMatrix& rho);

// Centered second-moment matrix K_ab = <dG_a; dG_b>_rho, dG = G - <G>.
// This is the exact Jacobian of Gibbs expectation values in the Lagrange
// parameters, and the metric used throughout model selection.
RMatrix kubo_mori_matrix(const std::vector<HermitianOperator>& ops, const DensityMatrix& rho);

// Pauli basis, used by qubit-specific code paths and the simulator.
HermitianOperator pauli_x();
HermitianOperator pauli_y();
HermitianOperator pauli_z();

}  // namespace thermoscope

#endif
