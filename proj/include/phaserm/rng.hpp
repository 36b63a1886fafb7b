#pragma once

// Deterministic random streams.
//
// Every random draw in the library flows through RandomStream, a xoshiro256++
// generator seeded via splitmix64. Distribution transforms are implemented
// here (polar normal, inverse-CDF Laplace, Marsaglia-Tsang gamma, Student-t as
// normal over a scaled chi-square) so that a fixed seed reproduces the exact
// same draw sequence independent of the C++ standard library in use.
//
// Streams are organized hierarchically: derive_seed(master, tag, a, b) hashes
// a purpose tag and two indices (typically sample size and trial number) into
// an independent per-purpose seed, which makes Monte-Carlo runs reproducible
// regardless of scheduling or worker count.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace phaserm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    // FNV-1a, then one splitmix round to spread the bits.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

// Hash (master seed, purpose tag, a, b) into a stream seed. Used as
// derive_seed(master, "noise", n, trial) and similar throughout the harness.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s) ^ hash_tag(tag);
    h = splitmix64(h);
    h ^= 0x9e3779b97f4a7c15ULL * (a + 1);
    h = splitmix64(h);
    h ^= 0xc2b2ae3d27d4eb4fULL * (b + 1);
    return splitmix64(h);
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) {
        // Expand the 64-bit seed into xoshiro256++ state.
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
        has_cached_normal_ = false;
        cached_normal_ = 0.0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free would bias for huge n; n here is always small.
        return next_u64() % n;
    }

    // Standard normal via the Marsaglia polar method (pairs are cached).
    double normal() {
        if (has_cached_normal_) {
            has_cached_normal_ = false;
            return cached_normal_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        cached_normal_ = v * m;
        has_cached_normal_ = true;
        return u * m;
    }

    // Laplace location mu with unit standard deviation (scale b = 1/sqrt(2)).
    double laplace_unit_sd(double mu) {
        constexpr double b = 0.70710678118654752440;  // 1/sqrt(2)
        const double u = uniform01();
        if (u < 0.5) return mu + b * std::log(2.0 * u + 1e-300);
        return mu - b * std::log(2.0 * (1.0 - u) + 1e-300);
    }

    // Gamma(shape, scale 1), Marsaglia-Tsang squeeze method. For shape < 1 the
    // standard boost (Gamma(shape+1) scaled by U^{1/shape}) is applied.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be positive");
        if (shape < 1.0) {
            const double u = uniform01();
            return gamma(shape + 1.0) * std::pow(u + 1e-300, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u + 1e-300) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double nu) { return 2.0 * gamma(0.5 * nu); }

    // Student-t with nu degrees of freedom, sampled as N(0,1)/sqrt(chi2_nu/nu).
    double student_t(double nu) {
        if (!(nu > 0.0)) throw std::invalid_argument("student_t nu must be positive");
        return normal() / std::sqrt(chi_square(nu) / nu);
    }

    // Student-t rescaled to unit variance: sqrt(1 - 2/nu) * t(nu). Needs nu > 2.
    double student_t_unit_var(double nu) {
        if (!(nu > 2.0)) throw std::invalid_argument("rescaled student_t needs nu > 2");
        return std::sqrt(1.0 - 2.0 / nu) * student_t(nu);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double cached_normal_;
    bool has_cached_normal_;
};

}  // namespace phaserm
