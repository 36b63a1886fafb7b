#include "phaserm/forward_model.hpp"

#include <cmath>
#include <stdexcept>

namespace phaserm {

VecR apply_operator(const Rank1Frame& frame, const VecC& x) {
    if (x.size() != frame.d) throw std::invalid_argument("signal dimension mismatch");
    // rows stores alpha_k^*, so one gemv gives all inner products.
    VecC inner = frame.rows * x;
    return inner.cwiseAbs2();
}

VecR apply_operator(const Rank1Frame& frame, const MatC& factor) {
    if (factor.rows() != frame.d) throw std::invalid_argument("factor dimension mismatch");
    // q_k = ||U^* alpha_k||^2 = row-wise squared norm of (rows * U).
    MatC inner = frame.rows * factor;
    return inner.cwiseAbs2().rowwise().sum();
}

VecR apply_operator(const HermitianFrame& frame, const VecC& x) {
    if (x.size() != frame.d()) throw std::invalid_argument("signal dimension mismatch");
    const int d = frame.d();
    VecR out(frame.n());
    frame.visit_blocks(256, [&](int first, int count, const Eigen::Ref<const MatC>& rows) {
        // Stacked gemv: (count*d x d) * x, then block-wise x^* (A_k x).
        VecC prod = rows * x;
        for (int k = 0; k < count; ++k)
            out(first + k) = std::real(x.dot(prod.segment(static_cast<Eigen::Index>(k) * d, d)));
    });
    return out;
}

VecR apply_operator(const HermitianFrame& frame, const MatC& factor) {
    if (factor.rows() != frame.d()) throw std::invalid_argument("factor dimension mismatch");
    const int d = frame.d();
    VecR out(frame.n());
    frame.visit_blocks(256, [&](int first, int count, const Eigen::Ref<const MatC>& rows) {
        MatC prod = rows * factor;  // stacked A_k U
        for (int k = 0; k < count; ++k) {
            // <A_k, UU^*> = Re tr(U^* A_k U)
            const auto blockProd = prod.middleRows(static_cast<Eigen::Index>(k) * d, d);
            out(first + k) = std::real((factor.adjoint() * blockProd).trace());
        }
    });
    return out;
}

VecR truncate_responses(const VecR& y, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (std::isinf(tau)) return y;
    VecR out(y.size());
    for (Eigen::Index k = 0; k < y.size(); ++k) {
        const double sign = (y(k) < 0.0) ? -1.0 : 1.0;  // sign(0) = +1
        out(k) = sign * std::min(std::abs(y(k)), tau);
    }
    return out;
}

double recommended_tau(int n, int d, Model model, double c, double l, bool log_factor) {
    if (n <= d) throw std::invalid_argument("recommended_tau needs n > d");
    if (!(c > 0.0)) throw std::invalid_argument("recommended_tau needs c > 0");
    if (!(l > 1.0)) throw std::invalid_argument("recommended_tau needs l > 1");
    const double ratio = static_cast<double>(n) / static_cast<double>(d);
    double tau = c * std::pow(ratio, 1.0 / (2.0 * l));
    if (log_factor) {
        const double g = std::log(static_cast<double>(n));
        tau *= (model == Model::npr) ? g : std::sqrt(g);
    }
    return tau;
}

MeasurementSet generate_measurements(const VecR& clean, const NoiseVector& noise, double tau) {
    if (noise.values.size() != clean.size())
        throw std::invalid_argument("noise and response lengths differ");
    MeasurementSet m;
    m.y = clean + noise.values;
    m.tau = tau;
    m.y_used = truncate_responses(m.y, tau);
    return m;
}

}  // namespace phaserm
