#pragma once

// Forward measurement maps, noisy response generation, and truncation.
//
// Models:
//  * npr:    y_k = |alpha_k^* x0|^2 + eta_k          (rank-one frame)
//  * ngpr:   y_k = x0^* A_k x0 + eta_k               (Hermitian frame)
//  * rank-r: y_k = <A_k, U0 U0^*> + eta_k            (Hermitian frame)
//
// Truncation for heavy-tailed responses: y~ = sign(y) * min(|y|, tau), with
// sign(0) = +1 and tau = +infinity meaning "no truncation".

#include <limits>
#include <optional>

#include "phaserm/ensembles.hpp"
#include "phaserm/linalg.hpp"
#include "phaserm/noise.hpp"

namespace phaserm {

enum class Model { npr, ngpr, rank_r };

// Noiseless responses q_k(x) under each model. The factor overloads give the
// rank-r responses <A_k, U U^*> (for a rank-one frame A_k = alpha_k alpha_k^*,
// so q_k = ||U^* alpha_k||^2).
VecR apply_operator(const Rank1Frame& frame, const VecC& x);
VecR apply_operator(const HermitianFrame& frame, const VecC& x);
VecR apply_operator(const Rank1Frame& frame, const MatC& factor);
VecR apply_operator(const HermitianFrame& frame, const MatC& factor);

// Element-wise y~ = sign(y) * min(|y|, tau); sign(0) = +1, tau = inf is the
// identity.
VecR truncate_responses(const VecR& y, double tau);

// Truncation level tau = c * (n/d)^{1/(2l)} * g(n) with g(n) = log n for the
// rank-one model and sqrt(log n) for the Hermitian model, or the power-law
// variant tau = c * (n/d)^{1/(2l)} used by the error-scaling experiments
// (pass log_factor = false). Defaults follow the experiment settings:
// l = 2.45 with c = 2.8 (rank-one) / 2.4 (Hermitian).
double recommended_tau(int n, int d, Model model, double c, double l = 2.45,
                       bool log_factor = false);

struct MeasurementSet {
    VecR y;       // raw noisy responses
    VecR y_used;  // after truncation (== y when tau = inf)
    double tau = std::numeric_limits<double>::infinity();
};

MeasurementSet generate_measurements(const VecR& clean, const NoiseVector& noise, double tau);

}  // namespace phaserm
