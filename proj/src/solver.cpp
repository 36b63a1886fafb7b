#include "phaserm/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace phaserm {

namespace {

// S = (1/n) sum_k y_k A_k for either frame family.
MatC build_spectral_matrix(const Rank1Frame& frame, const VecR& y) {
    // rows^H diag(y) rows; evaluated row-wise to keep memory access sequential.
    MatC s = MatC::Zero(frame.d, frame.d);
    for (int k = 0; k < frame.n; ++k) {
        // row k is alpha_k^*, so alpha_k is its conjugate.
        VecC alpha = frame.rows.row(k).conjugate().transpose();
        s.noalias() += y(k) * (alpha * alpha.adjoint());
    }
    return s / static_cast<double>(frame.n);
}

MatC build_spectral_matrix(const HermitianFrame& frame, const VecR& y, int chunk) {
    const int d = frame.d();
    MatC s = MatC::Zero(d, d);
    frame.visit_blocks(chunk, [&](int first, int count, const Eigen::Ref<const MatC>& rows) {
        for (int k = 0; k < count; ++k)
            s.noalias() += y(first + k) * rows.middleRows(static_cast<Eigen::Index>(k) * d, d);
    });
    return s / static_cast<double>(frame.n());
}

SpectralInit leading_eigs(MatC s, int r, const SolverConfig& cfg) {
    const int d = static_cast<int>(s.rows());
    if (r < 1 || r > d) throw std::invalid_argument("spectral rank must satisfy 1 <= r <= d");
    RandomStream stream(cfg.init_seed);
    SpectralInit init;
    init.directions.resize(d, r);
    init.values.resize(r);
    for (int i = 0; i < r; ++i) {
        EigPair pair = hermitian_leading_eig(s, stream, cfg.power_iters);
        init.directions.col(i) = pair.vector;
        init.values(i) = pair.value;
        if (i + 1 < r) s -= pair.value * (pair.vector * pair.vector.adjoint());
    }
    return init;
}

double ngpr_step(const StepRule& rule, int n, const VecR& y) {
    const double ysq = y.squaredNorm();
    if (!(ysq > 0.0)) return rule.c;
    return rule.c * std::sqrt(static_cast<double>(n) / ysq);
}

bool iterate_bad(const VecC& z, double divergence_norm) {
    return !z.allFinite() || z.norm() > divergence_norm;
}

bool iterate_bad(const MatC& u, double divergence_norm) {
    return !u.allFinite() || u.norm() > divergence_norm;
}

}  // namespace

SpectralInit spectral_init(const Rank1Frame& frame, const VecR& y, int r,
                           const SolverConfig& cfg) {
    if (y.size() != frame.n) throw std::invalid_argument("response length mismatch");
    return leading_eigs(build_spectral_matrix(frame, y), r, cfg);
}

SpectralInit spectral_init(const HermitianFrame& frame, const VecR& y, int r,
                           const SolverConfig& cfg) {
    if (y.size() != frame.n()) throw std::invalid_argument("response length mismatch");
    return leading_eigs(build_spectral_matrix(frame, y, cfg.chunk), r, cfg);
}

VecC initial_point(const Rank1Frame& frame, const VecR& y, const SolverConfig& cfg) {
    SpectralInit init = spectral_init(frame, y, 1, cfg);
    const double mean_y = y.mean();
    const double lambda = mean_y > 0.0 ? std::sqrt(mean_y) : 1.0;
    return lambda * init.directions.col(0);
}

VecC initial_point(const HermitianFrame& frame, const VecR& y, const SolverConfig& cfg) {
    SpectralInit init = spectral_init(frame, y, 1, cfg);
    const double scale =
        std::pow(y.squaredNorm() / static_cast<double>(frame.n()), 0.25);
    return scale * init.directions.col(0);
}

MatC initial_factor(const HermitianFrame& frame, const VecR& y, int r, const SolverConfig& cfg) {
    SpectralInit init = spectral_init(frame, y, r, cfg);
    MatC u = init.directions;
    for (int i = 0; i < r; ++i) u.col(i) *= std::sqrt(std::max(init.values(i), 0.0));
    return u;
}

VecC wirtinger_gradient(const Rank1Frame& frame, const VecR& y, const VecC& z) {
    if (y.size() != frame.n || z.size() != frame.d)
        throw std::invalid_argument("dimension mismatch");
    VecC inner = frame.rows * z;           // (alpha_k^* z)_k
    VecR q = inner.cwiseAbs2();            // same path as apply_operator
    VecC weighted = inner.cwiseProduct((q - y).cast<Complex>());
    // g = (2/n) rows^H weighted, evaluated as (weighted^H rows)^H for
    // sequential row access.
    VecC g = (weighted.adjoint() * frame.rows).adjoint();
    return (2.0 / static_cast<double>(frame.n)) * g;
}

VecC wirtinger_gradient(const HermitianFrame& frame, const VecR& y, const VecC& z) {
    const int d = frame.d();
    if (y.size() != frame.n() || z.size() != d) throw std::invalid_argument("dimension mismatch");
    VecC g = VecC::Zero(d);
    frame.visit_blocks(256, [&](int first, int count, const Eigen::Ref<const MatC>& rows) {
        VecC prod = rows * z;  // stacked (A_k z)
        for (int k = 0; k < count; ++k) {
            auto seg = prod.segment(static_cast<Eigen::Index>(k) * d, d);
            const double q = std::real(z.dot(seg));
            g.noalias() += (q - y(first + k)) * seg;
        }
    });
    return (2.0 / static_cast<double>(frame.n())) * g;
}

MatC factored_gradient(const HermitianFrame& frame, const VecR& y, const MatC& u) {
    const int d = frame.d();
    const int r = static_cast<int>(u.cols());
    if (y.size() != frame.n() || u.rows() != d) throw std::invalid_argument("dimension mismatch");
    MatC g = MatC::Zero(d, r);
    frame.visit_blocks(256, [&](int first, int count, const Eigen::Ref<const MatC>& rows) {
        MatC prod = rows * u;  // stacked (A_k U)
        for (int k = 0; k < count; ++k) {
            auto blk = prod.middleRows(static_cast<Eigen::Index>(k) * d, d);
            double q = 0.0;
            for (int c = 0; c < r; ++c) q += std::real(u.col(c).dot(blk.col(c)));
            g.noalias() += (q - y(first + k)) * blk;
        }
    });
    return (2.0 / static_cast<double>(frame.n())) * g;
}

double residual_loss(const Rank1Frame& frame, const VecR& y, const VecC& z) {
    VecR q = apply_operator(frame, z);
    return (q - y).squaredNorm() / static_cast<double>(frame.n);
}

double residual_loss(const HermitianFrame& frame, const VecR& y, const VecC& z) {
    VecR q = apply_operator(frame, z);
    return (q - y).squaredNorm() / static_cast<double>(frame.n());
}

double residual_loss(const HermitianFrame& frame, const VecR& y, const MatC& u) {
    VecR q = apply_operator(frame, u);
    return (q - y).squaredNorm() / static_cast<double>(frame.n());
}

SolveResult run_wirtinger_flow(const Rank1Frame& frame, const VecR& y, const VecC& z0,
                               const StepRule& rule, const SolverConfig& cfg) {
    if (y.size() != frame.n || z0.size() != frame.d)
        throw std::invalid_argument("dimension mismatch");
    SolveResult res;
    res.z = z0;
    if (iterate_bad(res.z, cfg.divergence_norm)) {
        res.diverged = true;
        res.final_loss = residual_loss(frame, y, res.z);
        return res;
    }
    const double n = static_cast<double>(frame.n);
    const double z0_sq = std::max(z0.squaredNorm(), 1e-300);
    const double fixed_step = rule.kind == StepRule::Kind::ngpr_fixed
                                  ? 2.0 * ngpr_step(rule, frame.n, y) / n
                                  : 0.0;
    VecC inner(frame.n), weighted(frame.n), g(frame.d);
    VecR q(frame.n), r(frame.n);
    for (int t = 1; t <= cfg.max_iters; ++t) {
        inner.noalias() = frame.rows * res.z;
        q = inner.cwiseAbs2();
        r = q - y;
        weighted = inner.cwiseProduct(r.cast<Complex>());
        g.noalias() = (weighted.adjoint() * frame.rows).adjoint();
        double step = fixed_step;
        if (rule.kind == StepRule::Kind::npr_schedule) {
            const double mu = std::min(1.0 - std::exp(-t / rule.t0), rule.mu_max);
            step = mu / (z0_sq * n);  // (1/n)-residual convention
        }
        res.z.noalias() -= step * g;
        res.iters = t;
        if (iterate_bad(res.z, cfg.divergence_norm)) {
            res.diverged = true;
            break;
        }
    }
    res.final_loss = residual_loss(frame, y, res.z);
    return res;
}

SolveResult run_wirtinger_flow(const HermitianFrame& frame, const VecR& y, const VecC& z0,
                               const StepRule& rule, const SolverConfig& cfg) {
    const int d = frame.d();
    const int nn = frame.n();
    if (y.size() != nn || z0.size() != d) throw std::invalid_argument("dimension mismatch");
    SolveResult res;
    res.z = z0;
    if (iterate_bad(res.z, cfg.divergence_norm)) {
        res.diverged = true;
        res.final_loss = residual_loss(frame, y, res.z);
        return res;
    }
    const double n = static_cast<double>(nn);
    const double z0_sq = std::max(z0.squaredNorm(), 1e-300);
    const double fixed_step =
        rule.kind == StepRule::Kind::ngpr_fixed ? 2.0 * ngpr_step(rule, nn, y) / n : 0.0;
    VecC g(d);
    for (int t = 1; t <= cfg.max_iters; ++t) {
        g.setZero();
        frame.visit_blocks(cfg.chunk, [&](int first, int count,
                                          const Eigen::Ref<const MatC>& rows) {
            VecC prod = rows * res.z;
            for (int k = 0; k < count; ++k) {
                auto seg = prod.segment(static_cast<Eigen::Index>(k) * d, d);
                const double qk = std::real(res.z.dot(seg));
                g.noalias() += (qk - y(first + k)) * seg;
            }
        });
        double step = fixed_step;  // already folds the (2/n) gradient scale
        if (rule.kind == StepRule::Kind::npr_schedule) {
            const double mu = std::min(1.0 - std::exp(-t / rule.t0), rule.mu_max);
            step = mu / (z0_sq * n);
        }
        res.z.noalias() -= step * g;
        res.iters = t;
        if (iterate_bad(res.z, cfg.divergence_norm)) {
            res.diverged = true;
            break;
        }
    }
    res.final_loss = residual_loss(frame, y, res.z);
    return res;
}

SolveResult run_wirtinger_flow(const Rank1Frame& frame, const VecR& y, const StepRule& rule,
                               const SolverConfig& cfg) {
    return run_wirtinger_flow(frame, y, initial_point(frame, y, cfg), rule, cfg);
}

SolveResult run_wirtinger_flow(const HermitianFrame& frame, const VecR& y, const StepRule& rule,
                               const SolverConfig& cfg) {
    return run_wirtinger_flow(frame, y, initial_point(frame, y, cfg), rule, cfg);
}

SolveResult run_factored_gd(const HermitianFrame& frame, const VecR& y, int r,
                            const StepRule& rule, const SolverConfig& cfg) {
    const int d = frame.d();
    const int nn = frame.n();
    if (y.size() != nn) throw std::invalid_argument("response length mismatch");
    SolveResult res;
    res.U = initial_factor(frame, y, r, cfg);
    if (iterate_bad(res.U, cfg.divergence_norm)) {
        res.diverged = true;
        res.final_loss = residual_loss(frame, y, res.U);
        return res;
    }
    const double n = static_cast<double>(nn);
    const double u0_sq = std::max(res.U.squaredNorm(), 1e-300);
    const double fixed_step =
        rule.kind == StepRule::Kind::ngpr_fixed ? 2.0 * ngpr_step(rule, nn, y) / n : 0.0;
    MatC g(d, r);
    for (int t = 1; t <= cfg.max_iters; ++t) {
        g.setZero();
        frame.visit_blocks(cfg.chunk, [&](int first, int count,
                                          const Eigen::Ref<const MatC>& rows) {
            MatC prod = rows * res.U;
            for (int k = 0; k < count; ++k) {
                auto blk = prod.middleRows(static_cast<Eigen::Index>(k) * d, d);
                double qk = 0.0;
                for (int c = 0; c < r; ++c) qk += std::real(res.U.col(c).dot(blk.col(c)));
                g.noalias() += (qk - y(first + k)) * blk;
            }
        });
        double step = fixed_step;
        if (rule.kind == StepRule::Kind::npr_schedule) {
            const double mu = std::min(1.0 - std::exp(-t / rule.t0), rule.mu_max);
            step = mu / (u0_sq * n);
        }
        res.U.noalias() -= step * g;
        res.iters = t;
        if (iterate_bad(res.U, cfg.divergence_norm)) {
            res.diverged = true;
            break;
        }
    }
    res.final_loss = residual_loss(frame, y, res.U);
    return res;
}

OptimalityReport inspect_optimality(double candidate_loss, double truth_loss) {
    OptimalityReport rep;
    rep.candidate_loss = candidate_loss;
    rep.truth_loss = truth_loss;
    rep.optimal = candidate_loss <= truth_loss * (1.0 + 1e-6) + 1e-12;
    return rep;
}

}  // namespace phaserm
