#pragma once

// Measurement ensembles and ground-truth signals.
//
// Two frame families:
//  * Rank1Frame: n rows alpha_k in C^d, each built from 2d i.i.d. real draws
//    of a scalar distribution M (real part = draw i, imaginary part = draw
//    i+d). With the default M = N(0, 0.5), E|alpha_i|^2 = 1.
//  * HermitianFrame: n Hermitian matrices A_k in C^{d x d}. Each is obtained
//    by drawing a real d x d matrix with vec ~ N(0, Sigma) and hermitianizing
//    it (diagonal kept, off-diagonal pairs combined into one complex entry).
//
// Hermitian frames can be large (n * d^2 complex doubles); they support a
// streaming mode that regenerates blocks of rows on the fly from per-row
// seeds, producing bit-identical draws to the materialized mode.

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phaserm/linalg.hpp"
#include "phaserm/rng.hpp"

namespace phaserm {

// ---------------------------------------------------------------------------
// Scalar distribution for frame entries.
// ---------------------------------------------------------------------------

// A real scalar law M used for the i.i.d. entries of rank-one frame rows.
// Exposes its exact second and fourth moments so the heavy-tail condition
// E M^4 > (E M^2)^2 can be checked analytically as well as empirically.
class ScalarDist {
  public:
    enum class Kind { gaussian, rademacher, gaussian_rademacher_mixture };

    // N(0, variance). Default variance 0.5 gives unit-variance complex entries.
    static ScalarDist gaussian(double variance = 0.5);
    // +/- scale with probability 1/2 each.
    static ScalarDist rademacher(double scale = 1.0);
    // With probability (1 - p) draw N(0, v); with probability p draw a
    // Rademacher variable at +/- s. Defaults p = 1/17, v = 0.5, s = 3 give
    // E M^2 = 1 and E M^4 = 93/17.
    static ScalarDist mixture(double p = 1.0 / 17.0, double gaussian_variance = 0.5,
                              double rademacher_scale = 3.0);

    double sample(RandomStream& stream) const;
    double second_moment() const;
    double fourth_moment() const;
    // True when E M^4 > (E M^2)^2, the regime where truncated estimation is
    // required for heavy-tailed rows.
    bool exceeds_squared_second_moment() const;
    Kind kind() const { return kind_; }

  private:
    Kind kind_ = Kind::gaussian;
    double gaussian_variance_ = 0.5;
    double rademacher_scale_ = 1.0;
    double mixture_p_ = 0.0;
};

struct FourthMomentReport {
    double analytic_gap = 0.0;    // E M^4 - (E M^2)^2 from closed forms
    double estimate_gap = 0.0;    // empirical gap from `samples` draws
    double std_error = 0.0;       // jackknife standard error of the gap
    bool pass = false;            // estimate_gap > 3 * std_error
};

// Monte-Carlo verification that the fourth moment strictly exceeds the squared
// second moment. Uses a leave-one-out jackknife for the standard error.
FourthMomentReport verify_fourth_moment(const ScalarDist& dist, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Covariance of the pre-hermitianization real matrix (vec ~ N(0, Sigma)).
// ---------------------------------------------------------------------------

class CovarianceSpec {
  public:
    enum class Kind { identity, scaled_identity, explicit_spd, random_spectrum };

    static CovarianceSpec identity();
    static CovarianceSpec scaled_identity(double variance);
    // Caller-supplied SPD matrix of size (d*d) x (d*d).
    static CovarianceSpec explicit_spd(MatR sigma);
    // Sigma = R1^T R2 R1 with R1 an orthogonalized Gaussian matrix and R2
    // diagonal with entries ~ U[lambda0, lambda1], drawn from `seed`.
    // Sampling uses the factor F = R1^T diag(sqrt(r2)) so one draw costs one
    // gemv.
    static CovarianceSpec random_spectrum(double lambda0, double lambda1, std::uint64_t seed);

    Kind kind() const { return kind_; }
    // True when sampling reduces to scale * standard normal per entry
    // (identity: scale 1; scaled_identity: scale sqrt(variance)).
    bool is_scalar(double* scale_out = nullptr) const;
    // Factor F with F F^T = Sigma for vectors of length dim = d*d (matrix
    // kinds only; memoized per dimension).
    const MatR& factor(int dim) const;
    // Dense Sigma (factor * factor^T), for tests and diagnostics.
    MatR dense(int dim) const;
    // The diagonal spectrum drawn for random_spectrum (empty otherwise).
    const VecR& drawn_spectrum(int dim) const;

  private:
    Kind kind_ = Kind::identity;
    double variance_ = 1.0;
    double lambda0_ = 0.4;
    double lambda1_ = 2.5;
    std::uint64_t seed_ = 0;
    std::shared_ptr<MatR> explicit_sigma_;
    struct Cache {
        int dim = -1;
        MatR factor;
        VecR spectrum;
    };
    mutable std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
    void build_cache(int dim) const;
};

// ---------------------------------------------------------------------------
// Frames.
// ---------------------------------------------------------------------------

struct Rank1Frame {
    int n = 0;
    int d = 0;
    // n x d, row k stores alpha_k^* (entry (k, j) = conj(alpha_k(j))), so
    // rows * x yields the inner products (alpha_k^* x)_k directly.
    MatC rows;
};

// Map a real d x d matrix to a Hermitian one: diagonal kept as-is, and for
// i < j the (i, j) entry becomes (a_ij + i * a_ji) / sqrt(2) with the mirror
// entry its conjugate. Exposed for direct testing.
MatC hermitianize(const MatR& raw);

class HermitianFrame {
  public:
    HermitianFrame() = default;

    // Frame holding caller-supplied Hermitian matrices (each must satisfy
    // A = A^H within 1e-12).
    static HermitianFrame from_blocks(const std::vector<MatC>& blocks);

    int n() const { return n_; }
    int d() const { return d_; }
    bool materialized() const { return materialized_; }

    // Row-major stacked storage: block k occupies rows [k*d, (k+1)*d).
    // Only valid in materialized mode.
    const MatC& stacked() const;

    // Dense copy of A_k (always available; regenerates in streaming mode).
    MatC block(int k) const;

    // Iterate blocks in order, materializing at most `chunk` of them at a
    // time into a stacked buffer handed to `fn(first_k, count, stacked_rows)`.
    // In materialized mode this walks the existing storage without copying.
    void visit_blocks(int chunk,
                      const std::function<void(int, int, const Eigen::Ref<const MatC>&)>& fn) const;

    friend HermitianFrame sample_hermitian_frame(int n, int d, const CovarianceSpec& cov,
                                                 std::uint64_t seed, bool materialize);

  private:
    int n_ = 0;
    int d_ = 0;
    std::uint64_t seed_ = 0;
    CovarianceSpec cov_;
    bool materialized_ = true;
    MatC stacked_;  // (n*d) x d when materialized
    MatC generate_block(int k) const;
};

// Draw a rank-one frame: entry draws use per-row streams derived from `seed`
// with tag "r1row" so rows are independent of n ordering.
Rank1Frame sample_rank1_frame(int n, int d, const ScalarDist& dist, std::uint64_t seed);

// Draw a Hermitian frame; per-block streams derived with tag "hblk" so
// materialized and streaming modes produce identical matrices.
HermitianFrame sample_hermitian_frame(int n, int d, const CovarianceSpec& cov, std::uint64_t seed,
                                      bool materialize = true);

// ---------------------------------------------------------------------------
// Ground truth signals.
// ---------------------------------------------------------------------------

enum class SignalKind {
    ones_phase,      // x0 = (1 + 1i)/sqrt(2d) * ones: unit norm, fixed phase
    uniform_sphere,  // complex Gaussian vector normalized to unit norm
};

VecC make_signal(int d, SignalKind kind, std::uint64_t seed);

// Low-rank ground truth U0 in C^{d x r} with ||U0||_F = 1 (complex Gaussian,
// normalized).
MatC make_low_rank_factor(int d, int r, std::uint64_t seed);

}  // namespace phaserm
