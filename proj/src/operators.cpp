#include "thermoscope/operators.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace thermoscope {

namespace {

void check_square(const CMatrix& m, const char* who) {
    if (m.rows() != m.cols() || m.rows() < 2) {
        std::ostringstream os;
        os << who << ": expected a square matrix of dimension >= 2, got " << m.rows() << "x" << m.cols();
        throw DimMismatch(os.str());
    }
}

}  // namespace

HermitianOperator::HermitianOperator(CMatrix entries) {
    check_square(entries, "HermitianOperator");
    const CMatrix adj = entries.adjoint();
    const double asym = (entries - adj).cwiseAbs().maxCoeff();
    if (asym > kHermitianRejectTol) {
        std::ostringstream os;
        os << "HermitianOperator: matrix is not Hermitian (max |A - A^dag| = " << asym << ")";
        throw ValidationError(os.str());
    }
    entries_ = 0.5 * (entries + adj);
}

HermitianOperator HermitianOperator::identity(int dim) {
    return HermitianOperator(CMatrix::Identity(dim, dim));
}

HermitianOperator HermitianOperator::zero(int dim) {
    return HermitianOperator(CMatrix::Zero(dim, dim));
}

Spectrum spectral_decompose(const CMatrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian);
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "spectral_decompose: eigensolver failed to converge on a " << hermitian.rows() << "x"
           << hermitian.cols() << " matrix";
        throw SolverError(os.str());
    }
    return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

DensityMatrix::DensityMatrix(const CMatrix& entries) {
    check_square(entries, "DensityMatrix");
    const CMatrix adj = entries.adjoint();
    const double asym = (entries - adj).cwiseAbs().maxCoeff();
    if (asym > kHermitianRejectTol) {
        throw ValidationError("DensityMatrix: entries are not Hermitian");
    }
    const CMatrix sym = 0.5 * (entries + adj);
    const double tr = sym.trace().real();
    if (std::abs(tr - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "DensityMatrix: trace must be 1 within 1e-12, got " << tr;
        throw ValidationError(os.str());
    }
    Spectrum spec = spectral_decompose(sym);
    if (spec.eigenvalues.minCoeff() < -1e-12) {
        std::ostringstream os;
        os << "DensityMatrix: negative eigenvalue " << spec.eigenvalues.minCoeff();
        throw ValidationError(os.str());
    }
    *this = from_spectrum(std::move(spec.eigenvalues), std::move(spec.eigenvectors));
}

DensityMatrix DensityMatrix::from_spectrum(RVector eigenvalues, CMatrix eigenvectors) {
    RVector p = eigenvalues.cwiseMax(kRankEpsilon);
    p /= p.sum();
    DensityMatrix rho;
    rho.eigenvalues_ = std::move(p);
    rho.eigenvectors_ = std::move(eigenvectors);
    CMatrix m = rho.eigenvectors_ * rho.eigenvalues_.asDiagonal() * rho.eigenvectors_.adjoint();
    rho.entries_ = 0.5 * (m + m.adjoint());
    return rho;
}

DensityMatrix DensityMatrix::uniform(int dim) {
    RVector p = RVector::Constant(dim, 1.0 / dim);
    return from_spectrum(p, CMatrix::Identity(dim, dim));
}

DensityMatrix gibbs_normalize(const HermitianOperator& exponent) {
    return gibbs_normalize_logz(exponent).first;
}

std::pair<DensityMatrix, double> gibbs_normalize_logz(const HermitianOperator& exponent) {
    Spectrum spec = spectral_decompose(exponent);
    const double shift = spec.eigenvalues.maxCoeff();
    RVector w = (spec.eigenvalues.array() - shift).exp();
    const double z = w.sum();
    w /= z;
    return {DensityMatrix::from_spectrum(std::move(w), std::move(spec.eigenvectors)),
            shift + std::log(z)};
}

HermitianOperator matrix_log(const DensityMatrix& rho) {
    const RVector& p = rho.eigenvalues();
    if (p.minCoeff() < kRankEpsilon * 0.5) {
        throw RankDeficient("matrix_log: state has an eigenvalue below the rank floor");
    }
    RVector lp = p.array().log();
    CMatrix m = rho.eigenvectors() * lp.asDiagonal() * rho.eigenvectors().adjoint();
    return HermitianOperator(std::move(m));
}

double expectation(const HermitianOperator& x, const DensityMatrix& rho) {
    if (x.dim() != rho.dim()) throw DimMismatch("expectation: operator and state dimensions differ");
    const Complex tr = (rho.matrix() * x.matrix()).trace();
    return tr.real();
}

double relative_entropy(const DensityMatrix& rho, const DensityMatrix& tau) {
    if (rho.dim() != tau.dim()) throw DimMismatch("relative_entropy: state dimensions differ");
    const RVector& p = rho.eigenvalues();
    const RVector& q = tau.eigenvalues();
    double s = 0.0;
    for (int j = 0; j < p.size(); ++j) {
        if (p[j] > 0.0) s += p[j] * std::log(p[j]);
    }
    // overlap_{jk} = |<u_j|v_k>|^2 couples the two eigenbases
    const CMatrix ov = rho.eigenvectors().adjoint() * tau.eigenvectors();
    for (int j = 0; j < p.size(); ++j) {
        for (int k = 0; k < q.size(); ++k) {
            const double w = std::norm(ov(j, k));
            if (w > 0.0) s -= p[j] * w * std::log(q[k]);
        }
    }
    if (s < 0.0 && s > -1e-9) s = 0.0;  // roundoff on coincident states
    return s;
}

namespace {

// Logarithmic mean; the nu-integral of p^nu q^(1-nu).
inline double log_mean(double p, double q, double lp, double lq) {
    const double dl = lp - lq;
    if (std::abs(dl) < 1e-12) return 0.5 * (p + q);
    return (p - q) / dl;
}

}  // namespace

double kubo_mori(const HermitianOperator& x, const HermitianOperator& y, const DensityMatrix& rho) {
    if (x.dim() != rho.dim() || y.dim() != rho.dim()) {
        throw DimMismatch("kubo_mori: operator and state dimensions differ");
    }
    const int d = rho.dim();
    const RVector& p = rho.eigenvalues();
    RVector lp = p.array().log();
    const CMatrix xt = rho.eigenvectors().adjoint() * x.matrix() * rho.eigenvectors();
    const CMatrix yt = rho.eigenvectors().adjoint() * y.matrix() * rho.eigenvectors();
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) {
            const double w = log_mean(p[j], p[k], lp[j], lp[k]);
            s += w * (xt(j, k) * yt(k, j)).real();
        }
    }
    return s;
}

RMatrix kubo_mori_matrix(const std::vector<HermitianOperator>& ops, const DensityMatrix& rho) {
    const int m = static_cast<int>(ops.size());
    const int d = rho.dim();
    const RVector& p = rho.eigenvalues();
    RVector lp = p.array().log();
    std::vector<CMatrix> tilde(m);
    for (int a = 0; a < m; ++a) {
        if (ops[a].dim() != d) throw DimMismatch("kubo_mori_matrix: operator dimension mismatch");
        CMatrix t = rho.eigenvectors().adjoint() * ops[a].matrix() * rho.eigenvectors();
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += p[j] * t(j, j).real();
        t -= mean * CMatrix::Identity(d, d);
        tilde[a] = std::move(t);
    }
    RMatrix k = RMatrix::Zero(m, m);
    for (int j = 0; j < d; ++j) {
        for (int l = 0; l < d; ++l) {
            const double w = log_mean(p[j], p[l], lp[j], lp[l]);
            for (int a = 0; a < m; ++a) {
                for (int b = a; b < m; ++b) {
                    k(a, b) += w * (tilde[a](j, l) * tilde[b](l, j)).real();
                }
            }
        }
    }
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < a; ++b) k(a, b) = k(b, a);
    }
    return k;
}

HermitianOperator pauli_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return HermitianOperator(m);
}

HermitianOperator pauli_y() {
    CMatrix m(2, 2);
    m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
    return HermitianOperator(m);
}

HermitianOperator pauli_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return HermitianOperator(m);
}

}  // namespace thermoscope
