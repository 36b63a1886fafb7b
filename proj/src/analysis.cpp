#include "phaserm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace phaserm {

namespace {

Complex unit_sign(Complex c) {
    const double mag = std::abs(c);
    return mag > 0.0 ? c / mag : Complex(1.0, 0.0);
}

}  // namespace

namespace {

// || U U^* - V V^* ||_F via thin QR of the stacked factors: with
// [U V] = Q R, the lifted difference is Q (R_U R_U^* - R_V R_V^*) Q^*, so its
// Frobenius norm is that of the small triangular-factor expression. The
// subtraction happens entrywise at the natural O(||U||^2) scale, avoiding the
// quartic cancellation of the Gram expansion.
double lifted_distance(const MatC& U, const MatC& V) {
    if (U.rows() != V.rows()) throw std::invalid_argument("factor row counts differ");
    const Eigen::Index d = U.rows();
    const Eigen::Index k = U.cols() + V.cols();
    MatC B(d, k);
    B.leftCols(U.cols()) = U;
    B.rightCols(V.cols()) = V;
    const Eigen::Index m = std::min(d, k);
    Eigen::HouseholderQR<MatC> qr(B);
    MatC R = MatC(qr.matrixQR().topRows(m).triangularView<Eigen::Upper>());
    MatC RU = R.leftCols(U.cols());
    MatC RV = R.rightCols(V.cols());
    return (RU * RU.adjoint() - RV * RV.adjoint()).norm();
}

}  // namespace

double matrix_distance(const VecC& x, const VecC& y) {
    return lifted_distance(MatC(x), MatC(y));
}

double matrix_distance(const MatC& U, const MatC& V) { return lifted_distance(U, V); }

double phase_aligned_distance(const VecC& xhat, const VecC& x0) {
    if (xhat.size() != x0.size()) throw std::invalid_argument("dimension mismatch");
    const Complex w = unit_sign(x0.dot(xhat));  // sign(x0^* xhat)
    return (xhat - w * x0).norm();
}

double phase_aligned_distance(const MatC& Uhat, const MatC& U0) {
    if (Uhat.rows() != U0.rows() || Uhat.cols() != U0.cols())
        throw std::invalid_argument("dimension mismatch");
    MatC M = U0.adjoint() * Uhat;
    Eigen::JacobiSVD<MatC> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    MatC W = svd.matrixU() * svd.matrixV().adjoint();
    return (Uhat - U0 * W).norm();
}

BoundReport evaluate_bounds(const VecR& eta, int d) {
    const int n = static_cast<int>(eta.size());
    if (n < 1) throw std::invalid_argument("noise vector must be non-empty");
    if (d < 1) throw std::invalid_argument("signal dimension must be positive");
    const double nn = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    const double linf = eta.cwiseAbs().maxCoeff();
    const double mean_abs = std::abs(eta.sum()) / nn;
    BoundReport rep;
    if (linf == 0.0) {
        rep.spikiness = 1.0;  // zero noise: pinned by convention
        return rep;
    }
    // Work with eta / ||eta||_inf so every provable ordering between the
    // bounds survives rounding: the normalized mean square lies in [1/n, 1]
    // exactly, and clamping it there keeps
    //   hermitian <= generic        (factor sqrt(d/n) <= 1 for d <= n),
    //   hermitian <= refined        (generic <= ||eta||_inf),
    //   1 <= spikiness <= sqrt(n)
    // true bit-for-bit, not just up to rounding error.
    const double mean_sq =
        std::clamp((eta / linf).squaredNorm() / nn, 1.0 / nn, 1.0);
    const double root = std::sqrt(mean_sq);                // ||eta|| / (sqrt(n) ||eta||_inf)
    const double shrink = std::sqrt(dd / nn);              // <= 1 iff d <= n
    rep.rank1_generic = linf * root;                       // ||eta|| / sqrt(n)
    rep.rank1_refined = linf * shrink + mean_abs;
    rep.hermitian = rep.rank1_generic * shrink;            // ||eta|| sqrt(d) / n
    rep.spikiness = 1.0 / root;                            // sqrt(n) ||eta||_inf / ||eta||
    return rep;
}

MatC sample_unit_hermitian(int d, int r, RandomStream& stream) {
    if (d < 1 || r < 1 || r > d) throw std::invalid_argument("need 1 <= r <= d");
    MatC X = MatC::Zero(d, d);
    for (int l = 0; l < r; ++l) {
        const double s = stream.normal();
        VecC beta(d);
        for (int i = 0; i < d; ++i) beta(i) = Complex(stream.normal(), stream.normal());
        X.noalias() += s * (beta * beta.adjoint());
    }
    const double nrm = X.norm();
    if (nrm == 0.0) {
        X.setZero();
        X(0, 0) = 1.0;
        return X;
    }
    return X / nrm;
}

namespace {

// <A_k, X> for every k of a rank-one frame: alpha_k^* X alpha_k, real for
// Hermitian X. Computed as the row-wise sum of (rows X) .* conj(rows).
VecR rank1_quadratic_forms(const Rank1Frame& frame, const MatC& X) {
    MatC P = frame.rows * X;
    VecC vals = P.cwiseProduct(frame.rows.conjugate()).rowwise().sum();
    return vals.real();
}

VecR hermitian_inner_products(const HermitianFrame& frame, const MatC& X) {
    const int d = frame.d();
    VecR vals(frame.n());
    frame.visit_blocks(256, [&](int first, int count, const Eigen::Ref<const MatC>& rows) {
        for (int k = 0; k < count; ++k) {
            auto blk = rows.middleRows(static_cast<Eigen::Index>(k) * d, d);
            vals(first + k) = std::real(blk.conjugate().cwiseProduct(X).sum());
        }
    });
    return vals;
}

double l1_stat(const VecR& vals) {
    return vals.cwiseAbs().sum() / static_cast<double>(vals.size());
}

double rip_stat(const VecR& vals) {
    return std::sqrt(vals.squaredNorm() / static_cast<double>(vals.size()));
}

VecR weight_vector(int sample_index, int n, RandomStream& stream) {
    if (sample_index == 0) return VecR::Ones(n);
    if (sample_index == 1) {
        VecR w = VecR::Zero(n);
        w(0) = 1.0;
        return w;
    }
    VecR w(n);
    for (int k = 0; k < n; ++k) w(k) = stream.normal();
    return w;
}

double weight_raw_bound(const VecR& w, int d) {
    const double n = static_cast<double>(w.size());
    return std::sqrt(static_cast<double>(d)) * w.cwiseAbs().maxCoeff() +
           std::abs(w.sum()) / std::sqrt(n);
}

template <typename StatFn, typename WeightStatFn>
FrameCheckReport run_frame_check(FrameCheckMode mode, int d, int n, int r, int samples,
                                 std::uint64_t seed, StatFn&& low_rank_stat,
                                 WeightStatFn&& weight_stat) {
    if (samples < 1) throw std::invalid_argument("need at least one sample");
    FrameCheckReport rep;
    rep.mode = mode;
    rep.samples = samples;
    RandomStream stream(seed);
    bool first = true;
    for (int i = 0; i < samples; ++i) {
        double stat = 0.0;
        double ratio = 0.0;
        if (mode == FrameCheckMode::weighted_opnorm) {
            VecR w = weight_vector(i, n, stream);
            stat = weight_stat(w);
            ratio = stat / weight_raw_bound(w, d);
        } else {
            MatC X = sample_unit_hermitian(d, r, stream);
            stat = low_rank_stat(X);
        }
        if (first) {
            rep.min_stat = rep.max_stat = stat;
            rep.min_ratio = rep.max_ratio = ratio;
            first = false;
        } else {
            rep.min_stat = std::min(rep.min_stat, stat);
            rep.max_stat = std::max(rep.max_stat, stat);
            rep.min_ratio = std::min(rep.min_ratio, ratio);
            rep.max_ratio = std::max(rep.max_ratio, ratio);
        }
    }
    return rep;
}

}  // namespace

FrameCheckReport empirical_frame_check(const Rank1Frame& frame, FrameCheckMode mode, int r,
                                       int samples, std::uint64_t seed) {
    return run_frame_check(
        mode, frame.d, frame.n, r, samples, seed,
        [&](const MatC& X) {
            VecR vals = rank1_quadratic_forms(frame, X);
            return mode == FrameCheckMode::rank1_l1 ? l1_stat(vals) : rip_stat(vals);
        },
        [&](const VecR& w) { return weighted_opnorm_stat(frame, w); });
}

FrameCheckReport empirical_frame_check(const HermitianFrame& frame, FrameCheckMode mode, int r,
                                       int samples, std::uint64_t seed) {
    return run_frame_check(
        mode, frame.d(), frame.n(), r, samples, seed,
        [&](const MatC& X) {
            VecR vals = hermitian_inner_products(frame, X);
            return mode == FrameCheckMode::rank1_l1 ? l1_stat(vals) : rip_stat(vals);
        },
        [&](const VecR& w) {
            const int d = frame.d();
            MatC M = MatC::Zero(d, d);
            const double root_n = std::sqrt(static_cast<double>(frame.n()));
            frame.visit_blocks(256, [&](int first, int count,
                                        const Eigen::Ref<const MatC>& rows) {
                for (int k = 0; k < count; ++k)
                    M.noalias() += (w(first + k) / root_n) *
                                   rows.middleRows(static_cast<Eigen::Index>(k) * d, d);
            });
            return hermitian_opnorm(M);
        });
}

double weighted_opnorm_stat(const Rank1Frame& frame, const VecR& weights) {
    if (weights.size() != frame.n) throw std::invalid_argument("weight length mismatch");
    MatC scaled = weights.cast<Complex>().asDiagonal() * frame.rows;
    MatC M = frame.rows.adjoint() * scaled / std::sqrt(static_cast<double>(frame.n));
    M = (M + MatC(M.adjoint())) / 2.0;
    return hermitian_opnorm(M);
}

SlopeFit fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("series lengths differ");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    const std::size_t m = lx.size();
    if (m < 2) throw std::invalid_argument("need at least two usable (positive) pairs");
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mean_x += lx[i];
        mean_y += ly[i];
    }
    mean_x /= static_cast<double>(m);
    mean_y /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dx = lx[i] - mean_x;
        const double dy = ly[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw std::invalid_argument("all abscissae coincide");
    bool constant_y = true;
    for (std::size_t i = 1; i < m && constant_y; ++i) constant_y = (ly[i] == ly[0]);
    SlopeFit fit;
    if (constant_y) {
        // The rounded mean of m identical values can differ from them by one
        // ulp, which would make syy spuriously positive; the exact
        // least-squares answer for constant responses is the flat line.
        fit.slope = 0.0;
        fit.intercept = ly[0];
        fit.r_squared = 1.0;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double resid = ly[i] - (fit.intercept + fit.slope * lx[i]);
            ss_res += resid * resid;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    } else {
        fit.r_squared = 1.0;  // constant responses: the flat fit is exact
    }
    return fit;
}

}  // namespace phaserm
