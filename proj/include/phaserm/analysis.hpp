#pragma once

// Error metrics, theoretical error bounds, and frame-property checks.

#include <cstdint>
#include <string>
#include <vector>

#include "phaserm/ensembles.hpp"
#include "phaserm/linalg.hpp"

namespace phaserm {

// ---------------------------------------------------------------------------
// Error metrics.
// ---------------------------------------------------------------------------

// Lifted-matrix distance d(x, y) = || x x^* - y y^* ||_F. Never forms the
// d x d outer products: with [x y] = Q R (thin QR), the distance equals
// || r1 r1^* - r2 r2^* ||_F over the 2x2 triangular columns. Unlike the Gram
// expansion ||x||^4 + ||y||^4 - 2|x^* y|^2, this has no quartic cancellation,
// so near-identical inputs resolve down to machine scale instead of
// bottoming out at sqrt(eps) ||x||^2.
// Rank-r overload: d(U, V) = || U U^* - V V^* ||_F via QR of [U V].
double matrix_distance(const VecC& x, const VecC& y);
double matrix_distance(const MatC& U, const MatC& V);

// Phase-aligned vector distance d'(xhat, x0) = || xhat - w x0 || minimized
// over unit scalars w; the minimizer is w = sign(x0^* xhat) with sign(0) = 1.
double phase_aligned_distance(const VecC& xhat, const VecC& x0);
// Rank-r: min over unitary W of || Uhat - U0 W ||_F (orthogonal Procrustes,
// via the SVD of U0^* Uhat).
double phase_aligned_distance(const MatC& Uhat, const MatC& U0);

// ---------------------------------------------------------------------------
// Theoretical error bounds evaluated on a concrete noise vector.
// ---------------------------------------------------------------------------

struct BoundReport {
    double rank1_generic = 0.0;   // ||eta|| / sqrt(n)
    double rank1_refined = 0.0;   // ||eta||_inf sqrt(d/n) + |1^T eta| / n
    double hermitian = 0.0;       // ||eta|| sqrt(d) / n
    double spikiness = 0.0;       // sqrt(n) ||eta||_inf / ||eta|| (1 when eta = 0)
};

BoundReport evaluate_bounds(const VecR& eta, int d);

// ---------------------------------------------------------------------------
// Frame-property checks (restricted isometry / boundedness on low-rank sets).
// ---------------------------------------------------------------------------

// Random unit-Frobenius-norm Hermitian matrix of rank <= r:
// X = sum_{l<r} s_l beta_l beta_l^* with s_l ~ N(0,1) and beta_l complex
// Gaussian, normalized to ||X||_F = 1.
MatC sample_unit_hermitian(int d, int r, RandomStream& stream);

enum class FrameCheckMode {
    rank1_l1,         // stat = (1/n) sum_k |alpha_k^* X alpha_k|
    hermitian_rip,    // stat = sqrt((1/n) sum_k <A_k, X>^2)
    weighted_opnorm,  // stat = || sum_k (r_k/sqrt(n)) alpha_k alpha_k^* ||_op
};

enum class WeightKind { ones, e1, gaussian };

struct FrameCheckReport {
    FrameCheckMode mode;
    int samples = 0;
    double min_stat = 0.0;
    double max_stat = 0.0;
    // weighted_opnorm only: min/max over samples of stat / raw_bound with
    // raw_bound = sqrt(d) ||r||_inf + |sum_k r_k| / sqrt(n).
    double min_ratio = 0.0;
    double max_ratio = 0.0;
};

// Run the named check over `samples` random unit test matrices (modes
// rank1_l1 / hermitian_rip, rank <= r) or weight vectors (weighted_opnorm:
// sample 0 uses r = ones, sample 1 uses r = e1, the rest i.i.d. Gaussian).
FrameCheckReport empirical_frame_check(const Rank1Frame& frame, FrameCheckMode mode, int r,
                                       int samples, std::uint64_t seed);
FrameCheckReport empirical_frame_check(const HermitianFrame& frame, FrameCheckMode mode, int r,
                                       int samples, std::uint64_t seed);

// || sum_k (r_k / sqrt(n)) alpha_k alpha_k^* ||_op for one weight vector.
double weighted_opnorm_stat(const Rank1Frame& frame, const VecR& weights);

// ---------------------------------------------------------------------------
// Log-log slope fitting for error-scaling curves.
// ---------------------------------------------------------------------------

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;  // 1 when the responses are exactly constant
};

// Least-squares fit of log(y) = slope * log(x) + intercept over (x_i, y_i)
// pairs with x_i, y_i > 0 (non-positive pairs are skipped). Throws if the
// lengths differ or fewer than two usable pairs remain.
SlopeFit fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace phaserm
