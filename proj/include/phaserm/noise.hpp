#pragma once

// Noise generators for the measurement models.
//
// Families:
//  * deterministic: the first floor(rho*s) entries are +phi, the next
//    s - floor(rho*s) entries are -phi, the rest are zero.
//  * gaussian: mean mu * ones, identity or correlated unit-diagonal
//    covariance, scaled by phi.
//  * laplace: unit-SD Laplace (b = 1/sqrt(2)) shifted by mu, scaled by phi.
//  * student_t: Student-t with nu dof, optionally rescaled by sqrt(1 - 2/nu)
//    to unit SD (requires nu > 2), scaled by phi.
//  * repeated_block: eta_k = base_k mod block, so the same block of draws
//    repeats down the vector.
//
// The scale phi multiplies the whole vector after generation, so for the
// biased Gaussian family mean and SD scale together.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "phaserm/linalg.hpp"
#include "phaserm/rng.hpp"

namespace phaserm {

// How the support size s of deterministic noise depends on n.
struct SupportRule {
    enum class Kind { absolute, full_n, fraction };
    Kind kind = Kind::absolute;
    double value = 0.0;  // absolute: s = value; fraction: s = round(value * n)

    static SupportRule absolute(double s) { return {Kind::absolute, s}; }
    static SupportRule full_n() { return {Kind::full_n, 0.0}; }
    static SupportRule fraction(double f) { return {Kind::fraction, f}; }
    int resolve(int n) const;
};

struct NoiseSpec {
    enum class Kind { none, deterministic, gaussian, laplace, student_t, repeated_block };
    enum class Cov { iid, correlated };

    Kind kind = Kind::none;
    double phi = 1.0;          // overall scale applied to the generated vector
    // deterministic
    SupportRule support = SupportRule::absolute(0.0);
    double rho = 1.0;
    // gaussian / laplace: mean of the unscaled vector
    double mu = 0.0;
    Cov cov = Cov::iid;        // gaussian only
    // student_t
    double nu = 3.0;
    bool rescaled = false;     // scale by sqrt(1 - 2/nu) for unit SD
    // repeated_block
    int block = 1;
    std::shared_ptr<NoiseSpec> base;  // inner spec for repeated_block

    static NoiseSpec none();
    static NoiseSpec deterministic(SupportRule s, double rho, double phi);
    static NoiseSpec gaussian(double mu, Cov cov, double phi);
    static NoiseSpec laplace(double mu, double phi);
    static NoiseSpec student_t(double nu, bool rescaled, double phi);
    static NoiseSpec repeated_block(int block, NoiseSpec base, double phi);

    // Compact textual form, e.g. "gauss(mu=1,cov=iid,phi=0.2)"; parse() is its
    // inverse. Used for CLI arguments and CSV labels.
    std::string encode() const;
    static NoiseSpec parse(const std::string& text);
};

struct NoiseVector {
    VecR values;        // length n
    std::string label;  // encoded spec (for records)
};

// The deterministic vector described above; exposed directly for tests.
VecR deterministic_noise(int n, int s, double rho, double phi);

// Cholesky-style factor L (n x n, lower triangular) of the unit-diagonal
// correlated covariance Sigma_n = D^{-1/2} (R R^T) D^{-1/2} with R an i.i.d.
// standard Gaussian n x n matrix drawn from `stream` and D = diag(R R^T).
// Retries with fresh R (at most 3 times) if the LLT factorization fails.
MatR correlated_unit_diag_factor(int n, RandomStream& stream);

// Generate the noise vector for a spec. Random draws come from `stream`;
// deterministic specs ignore it. For correlated Gaussian noise the covariance
// factor is drawn from `cov_stream` (kept separate so the covariance can be
// fixed per cell while the Gaussian draws vary per trial).
NoiseVector sample_noise(const NoiseSpec& spec, int n, RandomStream& stream,
                         RandomStream* cov_stream = nullptr);

}  // namespace phaserm
