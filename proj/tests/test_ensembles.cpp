#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "phaserm/ensembles.hpp"

using namespace phaserm;

namespace {
constexpr double kRoot2 = 1.4142135623730951;

template <typename A, typename B>
bool same_matrix(const A& a, const B& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}
}  // namespace

// ---------------------------------------------------------------------------
// Scalar distributions.
// ---------------------------------------------------------------------------

TEST_CASE("scalar distributions expose exact moments") {
    auto g = ScalarDist::gaussian(0.5);
    CHECK(g.second_moment() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.fourth_moment() == doctest::Approx(0.75).epsilon(1e-15));  // 3 sigma^4
    CHECK(g.exceeds_squared_second_moment());

    auto r = ScalarDist::rademacher(1.0);
    CHECK(r.second_moment() == doctest::Approx(1.0));
    CHECK(r.fourth_moment() == doctest::Approx(1.0));
    CHECK_FALSE(r.exceeds_squared_second_moment());

    // Mixture: E M^2 = (16/17) 0.5 + (1/17) 9 = 1; E M^4 = (16/17) 0.75 +
    // (1/17) 81 = 93/17.
    auto m = ScalarDist::mixture();
    CHECK(m.second_moment() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.fourth_moment() == doctest::Approx(93.0 / 17.0).epsilon(1e-14));
    CHECK(m.exceeds_squared_second_moment());

    CHECK_THROWS(ScalarDist::gaussian(-0.5));
    CHECK_THROWS(ScalarDist::mixture(1.5));
    CHECK_THROWS(ScalarDist::mixture(-0.1));
}

TEST_CASE("verify_fourth_moment agrees with closed forms") {
    auto rep = verify_fourth_moment(ScalarDist::gaussian(0.5), 200000, 99);
    CHECK(rep.analytic_gap == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(rep.pass);
    CHECK(std::abs(rep.estimate_gap - 0.5) < 5.0 * rep.std_error);

    // Rademacher: M^2 and M^4 are both constant 1, so the gap estimate is
    // exactly zero and the 3-sigma test must fail.
    auto rad = verify_fourth_moment(ScalarDist::rademacher(1.0), 5000, 7);
    CHECK(rad.analytic_gap == doctest::Approx(0.0));
    CHECK(rad.estimate_gap == doctest::Approx(0.0));
    CHECK_FALSE(rad.pass);

    auto mix = verify_fourth_moment(ScalarDist::mixture(), 400000, 3);
    CHECK(mix.analytic_gap == doctest::Approx(76.0 / 17.0).epsilon(1e-14));
    CHECK(mix.pass);
    CHECK(std::abs(mix.estimate_gap - 76.0 / 17.0) < 5.0 * mix.std_error);

    CHECK_THROWS(verify_fourth_moment(ScalarDist::gaussian(0.5), 10, 1));
}

// ---------------------------------------------------------------------------
// Rank-one frames.
// ---------------------------------------------------------------------------

TEST_CASE("rank1 frame is deterministic and follows the pairing contract") {
    auto f1 = sample_rank1_frame(4, 2, ScalarDist::gaussian(0.5), 7);
    auto f2 = sample_rank1_frame(4, 2, ScalarDist::gaussian(0.5), 7);
    CHECK(same_matrix(f1.rows, f2.rows));  // bitwise
    CHECK(f1.n == 4);
    CHECK(f1.d == 2);

    // Row k is built from its own stream: 2d sequential draws, entry j paired
    // with entry j+d as real/imaginary part of alpha; the stored row is
    // alpha^*.
    auto dist = ScalarDist::gaussian(0.5);
    for (int k = 0; k < 4; ++k) {
        RandomStream s(derive_seed(7, "r1row", k));
        std::vector<double> v(4);
        for (auto& x : v) x = dist.sample(s);
        for (int j = 0; j < 2; ++j) {
            const Complex alpha(v[j], v[j + 2]);
            CHECK(f1.rows(k, j) == std::conj(alpha));
        }
    }

    // Different seeds give different frames.
    auto f3 = sample_rank1_frame(4, 2, ScalarDist::gaussian(0.5), 8);
    CHECK_FALSE(same_matrix(f1.rows, f3.rows));
}

TEST_CASE("rank1 entries have unit second moment and isotropic covariance") {
    const int N = 10000;
    auto f = sample_rank1_frame(N, 1, ScalarDist::gaussian(0.5), 1);
    double mean_sq = 0;
    for (int k = 0; k < N; ++k) mean_sq += std::norm(f.rows(k, 0));
    mean_sq /= N;
    // |alpha|^2 is Exp(1): variance 1, so SE = 1/sqrt(N).
    CHECK(std::abs(mean_sq - 1.0) < 3.0 / std::sqrt(static_cast<double>(N)));

    // E[alpha alpha^*] = I_d entrywise within 5% at 1e5 samples.
    const int M = 100000;
    auto g = sample_rank1_frame(M, 3, ScalarDist::gaussian(0.5), 2);
    MatC cov = (g.rows.adjoint() * g.rows) / static_cast<double>(M);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = (i == j) ? 1.0 : 0.0;
            CHECK(std::abs(cov(i, j) - want) < 0.05);
        }
}

TEST_CASE("mixture ensemble entry moments match the closed form") {
    // Per real component: N(0, 0.5) w.p. 16/17, +/-3 w.p. 1/17, so
    // E M^2 = (16/17)*0.5 + (1/17)*9 = 1 and a complex entry X + iY has
    // E|alpha|^2 = 2 E M^2 = 2.
    const double m2 = (16.0 / 17.0) * 0.5 + (1.0 / 17.0) * 9.0;
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ScalarDist::mixture().second_moment() == doctest::Approx(m2).epsilon(1e-14));

    const int N = 100000;
    auto f = sample_rank1_frame(N, 1, ScalarDist::mixture(), 5);
    double mean_sq = 0;
    for (int k = 0; k < N; ++k) mean_sq += std::norm(f.rows(k, 0));
    mean_sq /= N;
    // Var(|alpha|^2) = 2 E M^4 + 2 (E M^2)^2 - 4 (E M^2)^2 with
    // E M^4 = (16/17)*0.75 + (1/17)*81 = 93/17, giving Var ~ 8.9.
    CHECK(std::abs(mean_sq - 2.0 * m2) < 5.0 * std::sqrt(9.0 / N));
}

// ---------------------------------------------------------------------------
// Covariance specs.
// ---------------------------------------------------------------------------

TEST_CASE("covariance spec scalar kinds") {
    double scale = 0;
    CHECK(CovarianceSpec::identity().is_scalar(&scale));
    CHECK(scale == doctest::Approx(1.0));
    CHECK(CovarianceSpec::scaled_identity(0.25).is_scalar(&scale));
    CHECK(scale == doctest::Approx(0.5));  // multiplier = sqrt(variance)
    CHECK_FALSE(CovarianceSpec::random_spectrum(0.4, 2.5, 1).is_scalar());
    CHECK_THROWS(CovarianceSpec::scaled_identity(-1.0));
    CHECK_THROWS(CovarianceSpec::random_spectrum(0.0, 2.5, 1));
    CHECK_THROWS(CovarianceSpec::random_spectrum(1.0, 0.5, 1));
}

TEST_CASE("random_spectrum covariance has exactly the drawn eigenvalues") {
    auto cov = CovarianceSpec::random_spectrum(0.4, 2.5, 31);
    const int dim = 9;
    MatR sigma = cov.dense(dim);
    CHECK(sigma.rows() == dim);

    VecR drawn = cov.drawn_spectrum(dim);
    REQUIRE(drawn.size() == dim);
    for (int i = 0; i < dim; ++i) {
        CHECK(drawn(i) >= 0.4);
        CHECK(drawn(i) <= 2.5);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    VecR eigs = es.eigenvalues();
    std::vector<double> a(eigs.data(), eigs.data() + dim);
    std::vector<double> b(drawn.data(), drawn.data() + dim);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (int i = 0; i < dim; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));

    // Factor consistency: dense = F F^T.
    const MatR& F = cov.factor(dim);
    MatR ff = F * F.transpose();
    CHECK((ff - sigma).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random_spectrum sample covariance spectrum stays in band") {
    // 5000 draws of v = F g with g ~ N(0, I); sample covariance eigenvalues
    // should stay within [0.3, 2.7] around the drawn band [0.4, 2.5].
    auto cov = CovarianceSpec::random_spectrum(0.4, 2.5, 8);
    const int dim = 4;
    const MatR& F = cov.factor(dim);
    RandomStream s(77);
    MatR acc = MatR::Zero(dim, dim);
    VecR g(dim);
    const int N = 5000;
    for (int t = 0; t < N; ++t) {
        for (int i = 0; i < dim; ++i) g(i) = s.normal();
        VecR v = F * g;
        acc += v * v.transpose();
    }
    acc /= static_cast<double>(N);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(acc);
    CHECK(es.eigenvalues().minCoeff() > 0.3);
    CHECK(es.eigenvalues().maxCoeff() < 2.7);
}

// ---------------------------------------------------------------------------
// Hermitianization and Hermitian frames.
// ---------------------------------------------------------------------------

TEST_CASE("hermitianize matches the hand formula on a 2x2 matrix") {
    MatR raw(2, 2);
    raw << 1, 2, 3, 4;
    MatC h = hermitianize(raw);
    CHECK(h(0, 0) == Complex(1, 0));
    CHECK(h(1, 1) == Complex(4, 0));
    CHECK(std::abs(h(0, 1) - Complex(2 / kRoot2, 3 / kRoot2)) < 1e-15);
    CHECK(std::abs(h(1, 0) - Complex(2 / kRoot2, -3 / kRoot2)) < 1e-15);
}

TEST_CASE("hermitian frame blocks are Hermitian and deterministic") {
    auto f = sample_hermitian_frame(3, 4, CovarianceSpec::identity(), 5);
    CHECK(f.n() == 3);
    CHECK(f.d() == 4);
    for (int k = 0; k < 3; ++k) {
        MatC A = f.block(k);
        CHECK((A - A.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    }
    auto f2 = sample_hermitian_frame(3, 4, CovarianceSpec::identity(), 5);
    CHECK(same_matrix(f.stacked(), f2.stacked()));
}

TEST_CASE("hermitian frame block matches a hand hermitianization of its draws") {
    // Reconstruct the raw 2x2 matrix for block 0 from an identically seeded
    // stream (row-major draw order), hermitianize by hand, compare.
    const std::uint64_t seed = 12;
    auto f = sample_hermitian_frame(1, 2, CovarianceSpec::identity(), seed);
    RandomStream s(derive_seed(seed, "hblk", 0));
    MatR raw(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) raw(i, j) = s.normal();
    MatC want = hermitianize(raw);
    CHECK((f.block(0) - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("hermitian frame with random-spectrum covariance matches its factor route") {
    const std::uint64_t seed = 13;
    auto cov = CovarianceSpec::random_spectrum(0.4, 2.5, 99);
    auto f = sample_hermitian_frame(2, 3, cov, seed);
    const MatR& F = cov.factor(9);
    for (int k = 0; k < 2; ++k) {
        RandomStream s(derive_seed(seed, "hblk", k));
        VecR g(9);
        for (int i = 0; i < 9; ++i) g(i) = s.normal();
        VecR vec = F * g;  // row-major vec of the raw matrix
        MatR raw = Eigen::Map<MatR>(vec.data(), 3, 3);
        MatC want = hermitianize(raw);
        CHECK((f.block(k) - want).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("streaming mode reproduces materialized blocks exactly") {
    auto dense = sample_hermitian_frame(7, 3, CovarianceSpec::identity(), 21, true);
    auto lazy = sample_hermitian_frame(7, 3, CovarianceSpec::identity(), 21, false);
    CHECK(dense.materialized());
    CHECK_FALSE(lazy.materialized());
    for (int k = 0; k < 7; ++k) CHECK(same_matrix(dense.block(k), lazy.block(k)));

    // visit_blocks walks every block once, in order, with identical content.
    int seen = 0;
    lazy.visit_blocks(3, [&](int first, int count, const Eigen::Ref<const MatC>& rows) {
        CHECK(first == seen);
        for (int k = 0; k < count; ++k) {
            MatC blk = rows.middleRows(k * 3, 3);
            CHECK(same_matrix(blk, dense.block(first + k)));
        }
        seen += count;
    });
    CHECK(seen == 7);
}

TEST_CASE("from_blocks keeps caller matrices and rejects non-Hermitian input") {
    MatC a = MatC::Identity(2, 2);
    MatC b(2, 2);
    b << Complex(0, 0), Complex(0, 1), Complex(0, -1), Complex(2, 0);
    auto f = HermitianFrame::from_blocks({a, b});
    CHECK(f.n() == 2);
    CHECK(f.d() == 2);
    CHECK(same_matrix(f.block(0), a));
    CHECK(same_matrix(f.block(1), b));

    MatC bad(2, 2);
    bad << Complex(0, 0), Complex(1, 0), Complex(2, 0), Complex(0, 0);
    CHECK_THROWS(HermitianFrame::from_blocks({bad}));
}

// ---------------------------------------------------------------------------
// Signals.
// ---------------------------------------------------------------------------

TEST_CASE("ones_phase signal is the exact constant vector") {
    VecC x = make_signal(2, SignalKind::ones_phase, 0);
    CHECK(x.size() == 2);
    CHECK(std::abs(x(0) - Complex(0.5, 0.5)) < 1e-16);
    CHECK(std::abs(x(1) - Complex(0.5, 0.5)) < 1e-16);
    CHECK(x.norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("uniform_sphere signal has unit norm and follows the draw contract") {
    VecC x = make_signal(30, SignalKind::uniform_sphere, 9);
    CHECK(std::abs(x.norm() - 1.0) < 1e-12);

    VecC x1 = make_signal(1, SignalKind::uniform_sphere, 3);
    CHECK(std::abs(std::abs(x1(0)) - 1.0) < 1e-12);

    // Contract: 2d sequential normals, first half real parts, second half
    // imaginary parts, normalized by the 2d-vector norm.
    const int d = 4;
    VecC got = make_signal(d, SignalKind::uniform_sphere, 17);
    RandomStream s(17);
    std::vector<double> g(2 * d);
    for (auto& v : g) v = s.normal();
    double nrm = 0;
    for (double v : g) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (int j = 0; j < d; ++j) {
        CHECK(got(j) == Complex(g[j] / nrm, g[j + d] / nrm));
    }

    CHECK(same_matrix(make_signal(5, SignalKind::uniform_sphere, 8),
                      make_signal(5, SignalKind::uniform_sphere, 8)));
}

TEST_CASE("low-rank factor has unit Frobenius norm") {
    MatC U = make_low_rank_factor(6, 2, 11);
    CHECK(U.rows() == 6);
    CHECK(U.cols() == 2);
    CHECK(std::abs(U.norm() - 1.0) < 1e-12);
    CHECK(same_matrix(U, make_low_rank_factor(6, 2, 11)));
}
