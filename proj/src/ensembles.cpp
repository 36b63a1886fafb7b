#include "phaserm/ensembles.hpp"

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

namespace phaserm {

// ---------------------------------------------------------------------------
// ScalarDist
// ---------------------------------------------------------------------------

ScalarDist ScalarDist::gaussian(double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("gaussian variance must be positive");
    ScalarDist d;
    d.kind_ = Kind::gaussian;
    d.gaussian_variance_ = variance;
    return d;
}

ScalarDist ScalarDist::rademacher(double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("rademacher scale must be positive");
    ScalarDist d;
    d.kind_ = Kind::rademacher;
    d.rademacher_scale_ = scale;
    return d;
}

ScalarDist ScalarDist::mixture(double p, double gaussian_variance, double rademacher_scale) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mixture weight must be in [0, 1]");
    if (!(gaussian_variance > 0.0))
        throw std::invalid_argument("mixture gaussian variance must be positive");
    if (!(rademacher_scale > 0.0))
        throw std::invalid_argument("mixture rademacher scale must be positive");
    ScalarDist d;
    d.kind_ = Kind::gaussian_rademacher_mixture;
    d.gaussian_variance_ = gaussian_variance;
    d.rademacher_scale_ = rademacher_scale;
    d.mixture_p_ = p;
    return d;
}

double ScalarDist::sample(RandomStream& stream) const {
    switch (kind_) {
        case Kind::gaussian:
            return std::sqrt(gaussian_variance_) * stream.normal();
        case Kind::rademacher:
            return stream.uniform01() < 0.5 ? -rademacher_scale_ : rademacher_scale_;
        case Kind::gaussian_rademacher_mixture: {
            if (stream.uniform01() < mixture_p_)
                return stream.uniform01() < 0.5 ? -rademacher_scale_ : rademacher_scale_;
            return std::sqrt(gaussian_variance_) * stream.normal();
        }
    }
    throw std::logic_error("unreachable scalar distribution kind");
}

double ScalarDist::second_moment() const {
    switch (kind_) {
        case Kind::gaussian:
            return gaussian_variance_;
        case Kind::rademacher:
            return rademacher_scale_ * rademacher_scale_;
        case Kind::gaussian_rademacher_mixture:
            return (1.0 - mixture_p_) * gaussian_variance_ +
                   mixture_p_ * rademacher_scale_ * rademacher_scale_;
    }
    throw std::logic_error("unreachable scalar distribution kind");
}

double ScalarDist::fourth_moment() const {
    switch (kind_) {
        case Kind::gaussian:
            return 3.0 * gaussian_variance_ * gaussian_variance_;
        case Kind::rademacher: {
            const double s2 = rademacher_scale_ * rademacher_scale_;
            return s2 * s2;
        }
        case Kind::gaussian_rademacher_mixture: {
            const double s2 = rademacher_scale_ * rademacher_scale_;
            return (1.0 - mixture_p_) * 3.0 * gaussian_variance_ * gaussian_variance_ +
                   mixture_p_ * s2 * s2;
        }
    }
    throw std::logic_error("unreachable scalar distribution kind");
}

bool ScalarDist::exceeds_squared_second_moment() const {
    const double m2 = second_moment();
    return fourth_moment() > m2 * m2;
}

FourthMomentReport verify_fourth_moment(const ScalarDist& dist, int samples, std::uint64_t seed) {
    if (samples < 1000) throw std::invalid_argument("need at least 1000 samples");
    RandomStream stream(seed);
    VecR x2(samples), x4(samples);
    double s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double v = dist.sample(stream);
        x2(i) = v * v;
        x4(i) = x2(i) * x2(i);
        s2 += x2(i);
        s4 += x4(i);
    }
    const double N = static_cast<double>(samples);
    const double m2 = s2 / N;
    const double m4 = s4 / N;

    FourthMomentReport rep;
    const double am2 = dist.second_moment();
    rep.analytic_gap = dist.fourth_moment() - am2 * am2;
    rep.estimate_gap = m4 - m2 * m2;

    // Leave-one-out jackknife: the loo means are cheap closed forms.
    double mean_loo = 0.0;
    VecR loo(samples);
    for (int i = 0; i < samples; ++i) {
        const double m2i = (s2 - x2(i)) / (N - 1.0);
        const double m4i = (s4 - x4(i)) / (N - 1.0);
        loo(i) = m4i - m2i * m2i;
        mean_loo += loo(i);
    }
    mean_loo /= N;
    double ss = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double diff = loo(i) - mean_loo;
        ss += diff * diff;
    }
    rep.std_error = std::sqrt((N - 1.0) / N * ss);
    rep.pass = rep.estimate_gap > 3.0 * rep.std_error;
    return rep;
}

// ---------------------------------------------------------------------------
// CovarianceSpec
// ---------------------------------------------------------------------------

CovarianceSpec CovarianceSpec::identity() { return {}; }

CovarianceSpec CovarianceSpec::scaled_identity(double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("covariance variance must be positive");
    CovarianceSpec c;
    c.kind_ = Kind::scaled_identity;
    c.variance_ = variance;
    return c;
}

CovarianceSpec CovarianceSpec::explicit_spd(MatR sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() < 1)
        throw std::invalid_argument("explicit covariance must be square");
    CovarianceSpec c;
    c.kind_ = Kind::explicit_spd;
    c.explicit_sigma_ = std::make_shared<MatR>(std::move(sigma));
    return c;
}

CovarianceSpec CovarianceSpec::random_spectrum(double lambda0, double lambda1,
                                               std::uint64_t seed) {
    if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be positive");
    if (!(lambda1 >= lambda0)) throw std::invalid_argument("lambda1 must be >= lambda0");
    CovarianceSpec c;
    c.kind_ = Kind::random_spectrum;
    c.lambda0_ = lambda0;
    c.lambda1_ = lambda1;
    c.seed_ = seed;
    return c;
}

bool CovarianceSpec::is_scalar(double* scale_out) const {
    if (kind_ == Kind::identity) {
        if (scale_out) *scale_out = 1.0;
        return true;
    }
    if (kind_ == Kind::scaled_identity) {
        if (scale_out) *scale_out = std::sqrt(variance_);
        return true;
    }
    return false;
}

void CovarianceSpec::build_cache(int dim) const {
    if (cache_->dim == dim) return;
    Cache fresh;
    fresh.dim = dim;
    switch (kind_) {
        case Kind::identity:
            fresh.factor = MatR::Identity(dim, dim);
            break;
        case Kind::scaled_identity:
            fresh.factor = std::sqrt(variance_) * MatR::Identity(dim, dim);
            break;
        case Kind::explicit_spd: {
            if (explicit_sigma_->rows() != dim)
                throw std::invalid_argument("explicit covariance has the wrong dimension");
            Eigen::LLT<Eigen::MatrixXd> llt(*explicit_sigma_);
            if (llt.info() != Eigen::Success)
                throw std::invalid_argument("explicit covariance is not positive definite");
            fresh.factor = llt.matrixL();
            break;
        }
        case Kind::random_spectrum: {
            // Draw order: dim^2 normals (row-major) for the orthogonal basis,
            // then dim uniforms on [lambda0, lambda1] for the spectrum.
            RandomStream stream(seed_);
            MatR g(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) g(i, j) = stream.normal();
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
            MatR q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
            fresh.spectrum = VecR(dim);
            for (int i = 0; i < dim; ++i)
                fresh.spectrum(i) = stream.uniform(lambda0_, lambda1_);
            // F = Q diag(sqrt(spectrum)) gives F F^T = Q diag(spectrum) Q^T.
            fresh.factor = q * fresh.spectrum.cwiseSqrt().asDiagonal();
            break;
        }
    }
    *cache_ = std::move(fresh);
}

const MatR& CovarianceSpec::factor(int dim) const {
    build_cache(dim);
    return cache_->factor;
}

MatR CovarianceSpec::dense(int dim) const {
    build_cache(dim);
    return cache_->factor * cache_->factor.transpose();
}

const VecR& CovarianceSpec::drawn_spectrum(int dim) const {
    build_cache(dim);
    return cache_->spectrum;
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

Rank1Frame sample_rank1_frame(int n, int d, const ScalarDist& dist, std::uint64_t seed) {
    if (n < 1 || d < 1) throw std::invalid_argument("frame dimensions must be positive");
    Rank1Frame frame;
    frame.n = n;
    frame.d = d;
    frame.rows.resize(n, d);
    std::vector<double> draws(2 * d);
    for (int k = 0; k < n; ++k) {
        RandomStream stream(derive_seed(seed, "r1row", static_cast<std::uint64_t>(k)));
        for (auto& v : draws) v = dist.sample(stream);
        for (int j = 0; j < d; ++j) frame.rows(k, j) = Complex(draws[j], -draws[j + d]);
    }
    return frame;
}

MatC hermitianize(const MatR& raw) {
    if (raw.rows() != raw.cols()) throw std::invalid_argument("hermitianize needs a square matrix");
    const int d = static_cast<int>(raw.rows());
    const double inv_root2 = 1.0 / std::sqrt(2.0);
    MatC out(d, d);
    for (int i = 0; i < d; ++i) {
        out(i, i) = Complex(raw(i, i), 0.0);
        for (int j = i + 1; j < d; ++j) {
            const Complex v(raw(i, j) * inv_root2, raw(j, i) * inv_root2);
            out(i, j) = v;
            out(j, i) = std::conj(v);
        }
    }
    return out;
}

HermitianFrame HermitianFrame::from_blocks(const std::vector<MatC>& blocks) {
    if (blocks.empty()) throw std::invalid_argument("from_blocks needs at least one matrix");
    const int d = static_cast<int>(blocks.front().rows());
    HermitianFrame frame;
    frame.n_ = static_cast<int>(blocks.size());
    frame.d_ = d;
    frame.materialized_ = true;
    frame.stacked_.resize(static_cast<Eigen::Index>(frame.n_) * d, d);
    for (int k = 0; k < frame.n_; ++k) {
        const MatC& blk = blocks[static_cast<size_t>(k)];
        if (blk.rows() != d || blk.cols() != d)
            throw std::invalid_argument("from_blocks matrices must share one square size");
        if ((blk - blk.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("from_blocks matrix is not Hermitian");
        frame.stacked_.middleRows(static_cast<Eigen::Index>(k) * d, d) = blk;
    }
    return frame;
}

const MatC& HermitianFrame::stacked() const {
    if (!materialized_) throw std::logic_error("stacked() requires a materialized frame");
    return stacked_;
}

MatC HermitianFrame::generate_block(int k) const {
    RandomStream stream(derive_seed(seed_, "hblk", static_cast<std::uint64_t>(k)));
    double scale = 1.0;
    MatR raw(d_, d_);
    if (cov_.is_scalar(&scale)) {
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) raw(i, j) = scale * stream.normal();
    } else {
        const int dim = d_ * d_;
        const MatR& F = cov_.factor(dim);
        VecR g(dim);
        for (int i = 0; i < dim; ++i) g(i) = stream.normal();
        VecR vec = F * g;
        raw = Eigen::Map<MatR>(vec.data(), d_, d_);  // row-major vec convention
    }
    return hermitianize(raw);
}

MatC HermitianFrame::block(int k) const {
    if (k < 0 || k >= n_) throw std::out_of_range("block index out of range");
    if (materialized_) return stacked_.middleRows(static_cast<Eigen::Index>(k) * d_, d_);
    return generate_block(k);
}

void HermitianFrame::visit_blocks(
    int chunk, const std::function<void(int, int, const Eigen::Ref<const MatC>&)>& fn) const {
    if (chunk < 1) chunk = n_;
    if (materialized_) {
        for (int first = 0; first < n_; first += chunk) {
            const int count = std::min(chunk, n_ - first);
            fn(first, count,
               stacked_.middleRows(static_cast<Eigen::Index>(first) * d_,
                                   static_cast<Eigen::Index>(count) * d_));
        }
        return;
    }
    MatC buffer(static_cast<Eigen::Index>(chunk) * d_, d_);
    for (int first = 0; first < n_; first += chunk) {
        const int count = std::min(chunk, n_ - first);
        for (int k = 0; k < count; ++k)
            buffer.middleRows(static_cast<Eigen::Index>(k) * d_, d_) = generate_block(first + k);
        fn(first, count, buffer.topRows(static_cast<Eigen::Index>(count) * d_));
    }
}

HermitianFrame sample_hermitian_frame(int n, int d, const CovarianceSpec& cov, std::uint64_t seed,
                                      bool materialize) {
    if (n < 1 || d < 1) throw std::invalid_argument("frame dimensions must be positive");
    HermitianFrame frame;
    frame.n_ = n;
    frame.d_ = d;
    frame.seed_ = seed;
    frame.cov_ = cov;
    frame.materialized_ = materialize;
    if (materialize) {
        frame.stacked_.resize(static_cast<Eigen::Index>(n) * d, d);
        for (int k = 0; k < n; ++k)
            frame.stacked_.middleRows(static_cast<Eigen::Index>(k) * d, d) =
                frame.generate_block(k);
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Signals
// ---------------------------------------------------------------------------

VecC make_signal(int d, SignalKind kind, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("signal dimension must be positive");
    VecC x(d);
    switch (kind) {
        case SignalKind::ones_phase: {
            const double a = 1.0 / std::sqrt(2.0 * d);
            x.setConstant(Complex(a, a));
            return x;
        }
        case SignalKind::uniform_sphere: {
            RandomStream stream(seed);
            std::vector<double> g(2 * static_cast<size_t>(d));
            double sq = 0.0;
            for (auto& v : g) {
                v = stream.normal();
                sq += v * v;
            }
            const double nrm = std::sqrt(sq);
            if (nrm == 0.0) {
                x.setZero();
                x(0) = 1.0;
                return x;
            }
            for (int j = 0; j < d; ++j)
                x(j) = Complex(g[static_cast<size_t>(j)] / nrm,
                               g[static_cast<size_t>(j) + static_cast<size_t>(d)] / nrm);
            return x;
        }
    }
    throw std::logic_error("unreachable signal kind");
}

MatC make_low_rank_factor(int d, int r, std::uint64_t seed) {
    if (d < 1 || r < 1 || r > d) throw std::invalid_argument("factor needs 1 <= r <= d");
    RandomStream stream(seed);
    MatC u(d, r);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) u(i, j) = Complex(stream.normal(), stream.normal());
    const double nrm = u.norm();
    if (nrm == 0.0) {
        u.setZero();
        u(0, 0) = 1.0;
        return u;
    }
    return u / nrm;
}

}  // namespace phaserm
