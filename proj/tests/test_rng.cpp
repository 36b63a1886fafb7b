#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

#include "phaserm/rng.hpp"

using namespace phaserm;

namespace {

// Empirical CDF of `draws` at x.
double ecdf(const std::vector<double>& draws, double x) {
    std::size_t c = 0;
    for (double v : draws) c += (v <= x);
    return static_cast<double>(c) / static_cast<double>(draws.size());
}

// 5-sigma binomial tolerance for an empirical CDF value.
double cdf_tol(double p, std::size_t n) {
    return 5.0 * std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(n));
}

template <typename F>
std::vector<double> draw(std::size_t n, std::uint64_t seed, F&& f) {
    RandomStream s(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = f(s);
    return out;
}

struct Moments {
    double mean, var;
};

Moments moments(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= static_cast<double>(v.size() - 1);
    return {m, s2};
}

}  // namespace

TEST_CASE("streams are deterministic and tag-separated") {
    RandomStream a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    // Different tags / indices give different streams.
    CHECK(derive_seed(7, "frame", 1, 2) != derive_seed(7, "noise", 1, 2));
    CHECK(derive_seed(7, "frame", 1, 2) != derive_seed(7, "frame", 1, 3));
    CHECK(derive_seed(7, "frame", 2, 2) != derive_seed(7, "frame", 1, 2));
    CHECK(derive_seed(7, "frame", 1, 2) != derive_seed(8, "frame", 1, 2));
    // And are themselves deterministic.
    CHECK(derive_seed(7, "frame", 1, 2) == derive_seed(7, "frame", 1, 2));
}

TEST_CASE("uniform01 lies in [0,1) with mean 1/2") {
    const std::size_t N = 200000;
    auto v = draw(N, 11, [](RandomStream& s) { return s.uniform01(); });
    for (double x : {v[0], v[N / 2], v[N - 1]}) {
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(*std::min_element(v.begin(), v.end()) >= 0.0);
    CHECK(*std::max_element(v.begin(), v.end()) < 1.0);
    auto m = moments(v);
    // SD of the mean = 1/sqrt(12 N).
    CHECK(std::abs(m.mean - 0.5) < 5.0 / std::sqrt(12.0 * N));
    CHECK(m.var == doctest::Approx(1.0 / 12.0).epsilon(0.05));
}

TEST_CASE("uniform_index covers the range uniformly") {
    RandomStream s(5);
    std::vector<int> counts(7, 0);
    const int N = 70000;
    for (int i = 0; i < N; ++i) counts[s.uniform_index(7)]++;
    for (int c : counts) CHECK(std::abs(c - N / 7) < 5 * std::sqrt(N / 7.0));
}

TEST_CASE("normal matches N(0,1) moments and CDF") {
    const std::size_t N = 200000;
    auto v = draw(N, 17, [](RandomStream& s) { return s.normal(); });
    auto m = moments(v);
    CHECK(std::abs(m.mean) < 5.0 / std::sqrt(static_cast<double>(N)));
    // Var of the sample variance of N(0,1) is 2/N.
    CHECK(std::abs(m.var - 1.0) < 5.0 * std::sqrt(2.0 / N));
    for (double x : {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0}) {
        const double p = 0.5 * std::erfc(-x / std::sqrt(2.0));
        CHECK(std::abs(ecdf(v, x) - p) < cdf_tol(p, N));
    }
}

TEST_CASE("laplace_unit_sd has unit variance, requested mean, Laplace CDF") {
    const std::size_t N = 200000;
    auto v = draw(N, 19, [](RandomStream& s) { return s.laplace_unit_sd(0.0); });
    auto m = moments(v);
    CHECK(std::abs(m.mean) < 5.0 / std::sqrt(static_cast<double>(N)));
    // For Laplace(0, b) with 2b^2 = 1: E X^4 = 24 b^4 = 6, so Var(X^2) = 5.
    CHECK(std::abs(m.var - 1.0) < 5.0 * std::sqrt(5.0 / N));

    boost::math::laplace_distribution<double> ref(0.0, 1.0 / std::sqrt(2.0));
    for (double x : {-2.0, -0.7, 0.0, 0.3, 1.5}) {
        const double p = boost::math::cdf(ref, x);
        CHECK(std::abs(ecdf(v, x) - p) < cdf_tol(p, N));
    }

    auto shifted = draw(50000, 21, [](RandomStream& s) { return s.laplace_unit_sd(3.0); });
    CHECK(moments(shifted).mean == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("gamma matches boost gamma CDF for small and large shape") {
    const std::size_t N = 200000;
    for (double shape : {0.5, 1.7, 4.0}) {
        auto v = draw(N, 23 + static_cast<std::uint64_t>(10 * shape),
                      [shape](RandomStream& s) { return s.gamma(shape); });
        auto m = moments(v);
        // Gamma(shape, 1): mean = var = shape; Var(sample mean) = shape/N.
        CHECK(std::abs(m.mean - shape) < 5.0 * std::sqrt(shape / N));
        boost::math::gamma_distribution<double> ref(shape, 1.0);
        for (double q : {0.25, 0.5, 0.9}) {
            const double x = boost::math::quantile(ref, q);
            CHECK(std::abs(ecdf(v, x) - q) < cdf_tol(q, N));
        }
    }
}

TEST_CASE("chi_square matches boost chi-squared CDF") {
    const std::size_t N = 100000;
    const double nu = 2.5;
    auto v = draw(N, 29, [nu](RandomStream& s) { return s.chi_square(nu); });
    boost::math::chi_squared_distribution<double> ref(nu);
    for (double q : {0.2, 0.5, 0.8}) {
        const double x = boost::math::quantile(ref, q);
        CHECK(std::abs(ecdf(v, x) - q) < cdf_tol(q, N));
    }
}

TEST_CASE("student_t matches boost t CDF at nu = 2.5") {
    const std::size_t N = 200000;
    auto v = draw(N, 31, [](RandomStream& s) { return s.student_t(2.5); });
    boost::math::students_t_distribution<double> ref(2.5);
    for (double x : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0}) {
        const double p = boost::math::cdf(ref, x);
        CHECK(std::abs(ecdf(v, x) - p) < cdf_tol(p, N));
    }
}

TEST_CASE("student_t_unit_var rescales to unit variance") {
    // nu = 10 keeps the fourth moment finite so the variance check is stable:
    // for t(10), E X^4 = 3 nu^2 / ((nu-2)(nu-4)) = 6.25; after the sqrt(0.8)
    // rescale E X^4 = 4, so Var(X^2) = 3.
    const std::size_t N = 200000;
    auto v = draw(N, 37, [](RandomStream& s) { return s.student_t_unit_var(10.0); });
    auto m = moments(v);
    CHECK(std::abs(m.var - 1.0) < 5.0 * std::sqrt(3.0 / N));

    // The rescaled draw equals sqrt(1 - 2/nu) times the plain draw.
    RandomStream a(41), b(41);
    for (int i = 0; i < 100; ++i) {
        const double plain = a.student_t(2.5);
        const double scaled = b.student_t_unit_var(2.5);
        CHECK(scaled == doctest::Approx(std::sqrt(1.0 - 2.0 / 2.5) * plain).epsilon(1e-12));
    }
}
