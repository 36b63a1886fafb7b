#pragma once

// Empirical-risk minimization by spectral initialization + Wirtinger flow.
//
// Loss (mean convention): f(z) = (1/n) sum_k (q_k(z) - y_k)^2, with
// q_k(z) = |alpha_k^* z|^2 (rank-one) or z^* A_k z (Hermitian). The Wirtinger
// gradient w.r.t. conj(z) of f is grad(z) = (2/n) sum_k (q_k - y_k) A_k z
// (with A_k = alpha_k alpha_k^* in the rank-one case).
//
// Initialization: leading eigenvectors of S = (1/n) sum_k y_k A_k by power
// iteration (deflation for rank r > 1), scaled per model:
//  * rank-one model: z0 = lambda * v with lambda = sqrt(max(mean(y), 0))
//    (lambda = 1 if the mean is non-positive).
//  * Hermitian model: z0 = (||y||^2 / n)^{1/4} * v.
//  * rank-r: column i scaled by sqrt(max(lambda_i, 0)) of S's eigenvalues.
//
// Step rules:
//  * rank-one model: z <- z - (mu_t / ||z0||^2) * (1/n) sum (q - y) alpha (alpha^* z)
//    with mu_t = min(1 - exp(-t / 330), 0.2).
//  * Hermitian model: constant step s = 0.01 * sqrt(n / ||y||^2) applied to
//    the (2/n)-convention gradient.

#include <cstdint>
#include <optional>
#include <vector>

#include "phaserm/ensembles.hpp"
#include "phaserm/forward_model.hpp"
#include "phaserm/linalg.hpp"

namespace phaserm {

struct StepRule {
    enum class Kind { npr_schedule, ngpr_fixed };
    Kind kind = Kind::npr_schedule;
    // npr_schedule: mu_t = min(1 - exp(-t / t0), mu_max), applied as
    // mu_t / ||z0||^2 to the (1/n)-residual gradient. The cap 0.2 is the
    // stability edge for this normalization: at 0.4 roughly a quarter of
    // clean rank-one solves orbit instead of converging, at 0.2 none do.
    double t0 = 330.0;
    double mu_max = 0.2;
    // ngpr_fixed: step = c * sqrt(n / ||y||^2), constant over iterations.
    double c = 0.01;

    static StepRule npr_schedule() { return {Kind::npr_schedule, 330.0, 0.2, 0.0}; }
    static StepRule ngpr_fixed() { return {Kind::ngpr_fixed, 0.0, 0.0, 0.01}; }
};

struct SolverConfig {
    int max_iters = 2000;
    int power_iters = 50;          // spectral-init power iterations
    std::uint64_t init_seed = 1;   // seed for the power-iteration start vector
    double divergence_norm = 1e8;  // ||z|| beyond this flags divergence
    // Streaming chunk (rows of stacked blocks) when the Hermitian frame is
    // not materialized.
    int chunk = 256;
};

struct SpectralInit {
    MatC directions;  // d x r, unit columns (descending |eigenvalue|)
    VecR values;      // Rayleigh quotients, length r
};

// Leading r eigenpairs of S = (1/n) sum_k y_k A_k via power iteration with
// deflation. Callers apply the model-specific scaling.
SpectralInit spectral_init(const Rank1Frame& frame, const VecR& y, int r,
                           const SolverConfig& cfg);
SpectralInit spectral_init(const HermitianFrame& frame, const VecR& y, int r,
                           const SolverConfig& cfg);

// Model-scaled initial iterates (what run_wirtinger_flow / run_factored_gd
// start from):
//  * rank-one frame: lambda * v1, lambda = sqrt(max(mean(y), 0)) or 1 if the
//    mean is non-positive;
//  * Hermitian frame: (||y||^2 / n)^{1/4} * v1;
//  * factored: column i of the top-r directions scaled by sqrt(max(l_i, 0)).
VecC initial_point(const Rank1Frame& frame, const VecR& y, const SolverConfig& cfg);
VecC initial_point(const HermitianFrame& frame, const VecR& y, const SolverConfig& cfg);
MatC initial_factor(const HermitianFrame& frame, const VecR& y, int r, const SolverConfig& cfg);

// Wirtinger gradient of the mean-squared loss, (2/n) sum (q_k - y_k) A_k z.
VecC wirtinger_gradient(const Rank1Frame& frame, const VecR& y, const VecC& z);
VecC wirtinger_gradient(const HermitianFrame& frame, const VecR& y, const VecC& z);
// Factored model: gradient w.r.t. conj(U) of (1/n) sum (<A_k, UU^*> - y_k)^2,
// which is (2/n) sum (q_k - y_k) A_k U.
MatC factored_gradient(const HermitianFrame& frame, const VecR& y, const MatC& U);

double residual_loss(const Rank1Frame& frame, const VecR& y, const VecC& z);
double residual_loss(const HermitianFrame& frame, const VecR& y, const VecC& z);
double residual_loss(const HermitianFrame& frame, const VecR& y, const MatC& U);

struct SolveResult {
    VecC z;                 // final iterate (vector models)
    MatC U;                 // final iterate (factored model)
    double final_loss = 0;  // mean-squared loss at the final iterate
    int iters = 0;
    bool diverged = false;
};

SolveResult run_wirtinger_flow(const Rank1Frame& frame, const VecR& y, const StepRule& rule,
                               const SolverConfig& cfg);
SolveResult run_wirtinger_flow(const HermitianFrame& frame, const VecR& y, const StepRule& rule,
                               const SolverConfig& cfg);
// Same flows from an explicit starting iterate (the parameterless overloads
// call these with the model-scaled spectral initializer).
SolveResult run_wirtinger_flow(const Rank1Frame& frame, const VecR& y, const VecC& z0,
                               const StepRule& rule, const SolverConfig& cfg);
SolveResult run_wirtinger_flow(const HermitianFrame& frame, const VecR& y, const VecC& z0,
                               const StepRule& rule, const SolverConfig& cfg);
// Factored gradient descent for rank r >= 1 (reduces to Wirtinger flow on the
// Hermitian model when r = 1).
SolveResult run_factored_gd(const HermitianFrame& frame, const VecR& y, int r,
                            const StepRule& rule, const SolverConfig& cfg);

struct OptimalityReport {
    double candidate_loss = 0.0;  // loss at the solver output
    double truth_loss = 0.0;      // loss at the ground truth
    bool optimal = false;
};

// ERM sanity filter: the estimate only counts as an empirical minimizer if it
// achieves loss no larger than the ground truth does on the same responses,
// up to numerical slack: candidate <= truth * (1 + 1e-6) + 1e-12. The
// absolute term keeps noiseless solves (truth loss exactly 0, candidate at
// machine-level residual) classified as optimal.
OptimalityReport inspect_optimality(double candidate_loss, double truth_loss);

}  // namespace phaserm
