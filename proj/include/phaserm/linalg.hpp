#pragma once

// Shared dense-linear-algebra typedefs and small helpers.
//
// Complex data is stored as std::complex<double> (interleaved re/im pairs) in
// row-major Eigen matrices, so a frame row or a stacked measurement block is
// contiguous in memory.

#include <Eigen/Dense>
#include <complex>

#include "phaserm/rng.hpp"

namespace phaserm {

using Complex = std::complex<double>;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using MatC = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Random complex vector with i.i.d. standard complex-normal-ish entries,
// normalized to unit length. Used for power-iteration starts.
inline VecC random_unit_vector(int d, RandomStream& stream) {
    VecC v(d);
    for (int i = 0; i < d; ++i) v(i) = Complex(stream.normal(), stream.normal());
    const double nrm = v.norm();
    if (nrm == 0.0) {
        v.setZero();
        v(0) = 1.0;
        return v;
    }
    return v / nrm;
}

struct EigPair {
    VecC vector;
    double value = 0.0;
};

// Leading eigenpair (largest |eigenvalue|) of a Hermitian matrix by block
// power iteration with a two-vector subspace and Rayleigh-Ritz extraction.
// The block keeps convergence fast even when the two largest-magnitude
// eigenvalues have opposite signs and nearly equal size (a single power
// iterate stalls there); the iteration budget caps the work and an early
// exit fires once the subspace is stationary to `tol`. The returned value is
// the signed Ritz value of largest magnitude.
inline EigPair hermitian_leading_eig(const MatC& M, RandomStream& stream, int max_iters = 200,
                                     double tol = 1e-10) {
    const int d = static_cast<int>(M.rows());
    const int b = d >= 2 ? 2 : 1;
    MatC V(d, b);
    for (int c = 0; c < b; ++c) V.col(c) = random_unit_vector(d, stream);
    {
        Eigen::HouseholderQR<MatC> qr(V);
        V = qr.householderQ() * MatC::Identity(d, b);
    }
    MatC W(d, b);
    for (int it = 0; it < max_iters; ++it) {
        W.noalias() = M * V;
        if (W.norm() == 0.0) break;  // subspace landed in the kernel; keep V
        Eigen::HouseholderQR<MatC> qr(W);
        MatC Vnew = qr.householderQ() * MatC::Identity(d, b);
        const double overlap = (V.adjoint() * Vnew).squaredNorm();
        const double delta = std::sqrt(std::max(static_cast<double>(b) - overlap, 0.0));
        V = Vnew;
        if (delta < tol) break;
    }
    // Ritz extraction on the final subspace.
    MatC H = V.adjoint() * (M * V);
    H = (H + MatC(H.adjoint())) / 2.0;
    Eigen::SelfAdjointEigenSolver<MatC> es(H);
    int best = 0;
    for (int i = 1; i < b; ++i)
        if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(best))) best = i;
    EigPair out;
    out.vector = V * es.eigenvectors().col(best);
    out.value = es.eigenvalues()(best);
    return out;
}

// Operator (spectral) norm of a Hermitian matrix, i.e. max |eigenvalue|.
inline double hermitian_opnorm(const MatC& M, int max_iters = 200, double tol = 1e-10) {
    RandomStream stream(derive_seed(0x9c0ffee1u, "opnorm-start", M.rows()));
    return std::abs(hermitian_leading_eig(M, stream, max_iters, tol).value);
}

}  // namespace phaserm
