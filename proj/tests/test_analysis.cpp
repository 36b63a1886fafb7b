#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <vector>

#include "phaserm/analysis.hpp"
#include "phaserm/noise.hpp"

using namespace phaserm;

namespace {

// Dense lifted-matrix route for the d-metric.
double dense_matrix_distance(const MatC& U, const MatC& V) {
    MatC X = U * U.adjoint();
    MatC Y = V * V.adjoint();
    return (X - Y).norm();
}

double dense_matrix_distance(const VecC& x, const VecC& y) {
    return dense_matrix_distance(MatC(x), MatC(y));
}

}  // namespace

TEST_CASE("matrix distance: hand values, phase invariance, dense oracle") {
    VecC e1 = VecC::Zero(2), e2 = VecC::Zero(2);
    e1(0) = 1.0;
    e2(1) = 1.0;
    CHECK(matrix_distance(e1, e2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    VecC x = make_signal(4, SignalKind::uniform_sphere, 1);
    for (double theta : {0.0, 0.4, 2.0}) {
        VecC rx = std::exp(Complex(0, theta)) * x;
        CHECK(matrix_distance(x, rx) < 1e-10);
    }

    RandomStream s(2);
    for (int t = 0; t < 20; ++t) {
        VecC a(4), b(4);
        for (int j = 0; j < 4; ++j) {
            a(j) = Complex(s.normal(), s.normal());
            b(j) = Complex(s.normal(), s.normal());
        }
        CHECK(matrix_distance(a, b) == doctest::Approx(dense_matrix_distance(a, b)).epsilon(1e-10));
        CHECK(matrix_distance(a, b) == doctest::Approx(matrix_distance(b, a)).epsilon(1e-12));
    }

    // Triangle inequality on the lifted matrices.
    for (int t = 0; t < 20; ++t) {
        VecC a(3), b(3), c(3);
        for (int j = 0; j < 3; ++j) {
            a(j) = Complex(s.normal(), s.normal());
            b(j) = Complex(s.normal(), s.normal());
            c(j) = Complex(s.normal(), s.normal());
        }
        CHECK(matrix_distance(a, c) <= matrix_distance(a, b) + matrix_distance(b, c) + 1e-8);
    }
}

TEST_CASE("matrix distance for factors matches the dense route") {
    RandomStream s(3);
    for (int t = 0; t < 10; ++t) {
        MatC U(5, 2), V(5, 2);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 2; ++j) {
                U(i, j) = Complex(s.normal(), s.normal());
                V(i, j) = Complex(s.normal(), s.normal());
            }
        CHECK(matrix_distance(U, V) == doctest::Approx(dense_matrix_distance(U, V)).epsilon(1e-10));
    }
    // Unitary mixing of the columns leaves UU* unchanged.
    MatC U = make_low_rank_factor(5, 2, 4);
    MatC A(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) A(i, j) = Complex(s.normal(), s.normal());
    Eigen::JacobiSVD<MatC> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    MatC W = svd.matrixU() * svd.matrixV().adjoint();
    REQUIRE((W.adjoint() * W - MatC::Identity(2, 2)).norm() < 1e-12);
    CHECK(matrix_distance(U, MatC(U * W)) < 1e-10);
}

TEST_CASE("phase-aligned distance: conventions and grid oracle") {
    VecC x = make_signal(5, SignalKind::uniform_sphere, 5);
    VecC rx = std::exp(Complex(0, 2.2)) * x;
    CHECK(phase_aligned_distance(rx, x) < 1e-12);

    // Orthogonal pair: sign(0) = 1 means the distance is ||xhat - x0||.
    VecC e1 = VecC::Zero(2), e2 = VecC::Zero(2);
    e1(0) = 1.0;
    e2(1) = 1.0;
    CHECK(phase_aligned_distance(e1, e2) == doctest::Approx((e1 - e2).norm()).epsilon(1e-12));

    RandomStream s(6);
    for (int t = 0; t < 10; ++t) {
        VecC a(4), b(4);
        for (int j = 0; j < 4; ++j) {
            a(j) = Complex(s.normal(), s.normal());
            b(j) = Complex(s.normal(), s.normal());
        }
        const double got = phase_aligned_distance(a, b);
        double grid = 1e300;
        for (int k = 0; k < 3600; ++k) {
            const double theta = 2.0 * M_PI * k / 3600.0;
            grid = std::min(grid, (a - std::exp(Complex(0, theta)) * b).norm());
        }
        CHECK(got <= grid + 1e-6);
        CHECK(got >= grid - 1e-4);  // grid resolution slack
        CHECK(got >= 0.0);
        CHECK(got <= a.norm() + b.norm() + 1e-12);
    }
}

TEST_CASE("procrustes-aligned factor distance") {
    // Uhat = U0 W for unitary W has distance 0.
    MatC U0 = make_low_rank_factor(6, 2, 7);
    MatC A(2, 2);
    RandomStream s(8);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) A(i, j) = Complex(s.normal(), s.normal());
    Eigen::JacobiSVD<MatC> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    MatC W = svd.matrixU() * svd.matrixV().adjoint();  // random unitary
    CHECK(phase_aligned_distance(MatC(U0 * W), U0) < 1e-10);

    // r = 1 reduces to the phase-aligned vector distance.
    VecC a(4), b(4);
    for (int j = 0; j < 4; ++j) {
        a(j) = Complex(s.normal(), s.normal());
        b(j) = Complex(s.normal(), s.normal());
    }
    CHECK(phase_aligned_distance(MatC(a), MatC(b)) ==
          doctest::Approx(phase_aligned_distance(a, b)).epsilon(1e-10));
}

TEST_CASE("bound report on hand-checkable noise vectors") {
    // eta = ones, n = 100, d = 4.
    VecR ones = VecR::Ones(100);
    BoundReport r = evaluate_bounds(ones, 4);
    CHECK(r.rank1_generic == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.rank1_refined == doctest::Approx(1.2).epsilon(1e-12));  // 0.2 + 1
    CHECK(r.hermitian == doctest::Approx(0.2).epsilon(1e-12));      // 10*2/100
    CHECK(r.spikiness == doctest::Approx(1.0).epsilon(1e-12));

    // Single spike: maximal spikiness sqrt(n).
    VecR spike = VecR::Zero(100);
    spike(0) = 3.0;
    CHECK(evaluate_bounds(spike, 4).spikiness == doctest::Approx(10.0).epsilon(1e-12));

    // Half-flipped ones: the sign sum vanishes, so the refined bound is
    // exactly ||eta||_inf sqrt(d/n).
    VecR half = deterministic_noise(100, 100, 0.5, 1.0);
    BoundReport h = evaluate_bounds(half, 4);
    CHECK(h.rank1_refined == doctest::Approx(std::sqrt(4.0 / 100.0)).epsilon(1e-12));

    // Zero noise: spikiness pinned to 1 by convention.
    CHECK(evaluate_bounds(VecR::Zero(50), 4).spikiness == doctest::Approx(1.0));
}

TEST_CASE("bound ordering invariants hold on random noise") {
    RandomStream s(9);
    for (int t = 0; t < 200; ++t) {
        const int n = 20 + static_cast<int>(s.uniform_index(200));
        const int d = 1 + static_cast<int>(s.uniform_index(n));  // d <= n
        VecR eta(n);
        for (int i = 0; i < n; ++i)
            eta(i) = (t % 3 == 0) ? s.student_t(2.5) : (t % 3 == 1) ? s.laplace_unit_sd(0.0)
                                                                    : s.normal();
        BoundReport r = evaluate_bounds(eta, d);
        // Cauchy-Schwarz: |1^T eta| / n <= ||eta|| / sqrt(n).
        const double mean_term = std::abs(eta.sum()) / n;
        CHECK(mean_term <= r.rank1_generic + 1e-12);
        // Hermitian-model bound never exceeds either rank-one bound at n >= d.
        CHECK(r.hermitian <= std::min(r.rank1_generic, r.rank1_refined));
        CHECK(r.spikiness >= 1.0 - 1e-12);
        CHECK(r.spikiness <= std::sqrt(static_cast<double>(n)) + 1e-12);
    }
}

TEST_CASE("sample_unit_hermitian: symmetry, norm, rank") {
    RandomStream s(10);
    for (int r : {1, 2, 3}) {
        MatC X = sample_unit_hermitian(6, r, s);
        CHECK((X - X.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(X.norm() - 1.0) <= 1e-12);
        Eigen::SelfAdjointEigenSolver<MatC> es(X);
        VecR ev = es.eigenvalues().cwiseAbs();
        std::vector<double> mags(ev.data(), ev.data() + 6);
        std::sort(mags.begin(), mags.end(), std::greater<>());
        for (int i = r; i < 6; ++i) CHECK(mags[i] <= 1e-8);
    }
    // r = 1: normalized rank one has eigenvalues {+-1, 0, ...}.
    MatC X1 = sample_unit_hermitian(4, 1, s);
    Eigen::SelfAdjointEigenSolver<MatC> es(X1);
    VecR ev = es.eigenvalues().cwiseAbs();
    CHECK(ev.maxCoeff() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("operator norm by power iteration matches a dense eigensolver") {
    RandomStream s(11);
    for (int t = 0; t < 5; ++t) {
        MatC G(20, 20);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j) G(i, j) = Complex(s.normal(), s.normal());
        MatC H = (G + G.adjoint()) / 2.0;
        Eigen::SelfAdjointEigenSolver<MatC> es(H);
        const double want = es.eigenvalues().cwiseAbs().maxCoeff();
        CHECK(hermitian_opnorm(H) == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("slope fits recover exact power laws") {
    std::vector<double> ns = {100, 200, 400, 800, 1600};
    std::vector<double> inv_sqrt, inv, flat;
    for (double n : ns) {
        inv_sqrt.push_back(3.2 / std::sqrt(n));
        inv.push_back(7.0 / n);
        flat.push_back(0.42);
    }
    auto f1 = fit_log_slope(ns, inv_sqrt);
    CHECK(f1.slope == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(f1.r_squared == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::exp(f1.intercept) == doctest::Approx(3.2).epsilon(1e-8));

    auto f2 = fit_log_slope(ns, inv);
    CHECK(f2.slope == doctest::Approx(-1.0).epsilon(1e-10));

    auto f3 = fit_log_slope(ns, flat);
    CHECK(f3.slope == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(f3.r_squared == doctest::Approx(1.0));  // constant data: perfect flat fit

    // Two exact points still determine the line.
    auto f4 = fit_log_slope({10.0, 1000.0}, {1.0, 0.01});
    CHECK(f4.slope == doctest::Approx(-1.0).epsilon(1e-10));

    CHECK_THROWS(fit_log_slope({1.0, 2.0}, {1.0, 2.0, 3.0}));   // length mismatch
    CHECK_THROWS(fit_log_slope({1.0, -2.0}, {1.0, 2.0}));       // one usable pair
    CHECK_THROWS(fit_log_slope({1.0}, {1.0}));                  // too few points
}

TEST_CASE("frame checks: low-rank restricted bounds at n = 40d") {
    const int d = 10, n = 400;
    auto rf = sample_rank1_frame(n, d, ScalarDist::gaussian(0.5), 12);
    for (int r : {1, 2}) {
        auto rep = empirical_frame_check(rf, FrameCheckMode::rank1_l1, r, 500, 13);
        CHECK(rep.samples == 500);
        CHECK(rep.min_stat > 0.1);
        CHECK(rep.max_stat <= 10.0 * std::sqrt(static_cast<double>(r)));
        CHECK(rep.min_stat <= rep.max_stat);
    }

    auto hf = sample_hermitian_frame(n, d, CovarianceSpec::identity(), 14);
    for (int r : {1, 2}) {
        auto rep = empirical_frame_check(hf, FrameCheckMode::hermitian_rip, r, 500, 15);
        CHECK(rep.min_stat > 0.0);
        CHECK(rep.max_stat / rep.min_stat <= 3.0);
    }
}

TEST_CASE("frame check statistics are stable across sampler seeds") {
    const int d = 10, n = 400;
    auto rf = sample_rank1_frame(n, d, ScalarDist::gaussian(0.5), 16);
    auto a = empirical_frame_check(rf, FrameCheckMode::rank1_l1, 2, 500, 17);
    auto b = empirical_frame_check(rf, FrameCheckMode::rank1_l1, 2, 500, 18);
    CHECK(a.min_stat == doctest::Approx(b.min_stat).epsilon(0.2));
    CHECK(a.max_stat == doctest::Approx(b.max_stat).epsilon(0.2));
}

TEST_CASE("weighted operator norm statistic and its raw bound") {
    const int d = 10, n = 400;
    auto rf = sample_rank1_frame(n, d, ScalarDist::gaussian(0.5), 19);

    // Dual route for one weight vector: materialize the weighted sum.
    VecR w = VecR::Zero(n);
    w(0) = 1.0;  // e1: sum is alpha_1 alpha_1^* / sqrt(n)
    const double stat = weighted_opnorm_stat(rf, w);
    VecC alpha1 = rf.rows.row(0).conjugate().transpose();
    CHECK(stat == doctest::Approx(alpha1.squaredNorm() / std::sqrt(n)).epsilon(1e-8));

    MatC M = MatC::Zero(d, d);
    RandomStream s(20);
    VecR wg(n);
    for (int k = 0; k < n; ++k) wg(k) = s.normal();
    for (int k = 0; k < n; ++k) {
        VecC alpha = rf.rows.row(k).conjugate().transpose();
        M += (wg(k) / std::sqrt(n)) * (alpha * alpha.adjoint());
    }
    Eigen::SelfAdjointEigenSolver<MatC> es(M);
    CHECK(weighted_opnorm_stat(rf, wg) ==
          doctest::Approx(es.eigenvalues().cwiseAbs().maxCoeff()).epsilon(1e-8));

    // Report over 20 weight vectors: first two are the canonical ones / e1.
    auto rep = empirical_frame_check(rf, FrameCheckMode::weighted_opnorm, 1, 20, 21);
    CHECK(rep.min_ratio > 0.0);
    CHECK(rep.min_ratio <= rep.max_ratio);
    CHECK(rep.max_ratio <= 2.0);  // raw bound with unit constants is the right scale
}
