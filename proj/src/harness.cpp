#include "phaserm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>
#include <utility>

#include <json.hpp>

namespace phaserm {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::vector<int> grid(int factor, std::initializer_list<int> multipliers) {
    std::vector<int> out;
    out.reserve(multipliers.size());
    for (int m : multipliers) out.push_back(factor * m);
    return out;
}

NoiseVariant plain(NoiseSpec noise) {
    return {std::move(noise), TauRule::none(), std::nullopt, ""};
}

}  // namespace

// ---------------------------------------------------------------------------
// Small declarative pieces.
// ---------------------------------------------------------------------------

std::string axis_name(Axis a) {
    switch (a) {
        case Axis::invsqrt_n: return "invsqrt_n";
        case Axis::inv_n: return "inv_n";
        case Axis::n: return "n";
    }
    throw std::logic_error("unreachable axis");
}

Axis parse_axis(const std::string& name) {
    if (name == "invsqrt_n") return Axis::invsqrt_n;
    if (name == "inv_n") return Axis::inv_n;
    if (name == "n") return Axis::n;
    throw std::invalid_argument("unknown axis: " + name);
}

int DRule::resolve(int n) const {
    if (value < 1) throw std::invalid_argument("dimension rule value must be positive");
    if (kind == Kind::fixed) return value;
    if (n % value != 0)
        throw std::invalid_argument("n = " + std::to_string(n) +
                                    " is not a multiple of the dimension divisor " +
                                    std::to_string(value));
    const int d = n / value;
    if (d < 1) throw std::invalid_argument("resolved dimension must be positive");
    return d;
}

TauRule TauRule::fixed_value(double v) {
    if (!(v > 0.0)) throw std::invalid_argument("truncation level must be positive");
    TauRule r;
    r.kind = Kind::fixed_value;
    r.value = v;
    return r;
}

TauRule TauRule::recommended(double c, double l) {
    if (!(c > 0.0)) throw std::invalid_argument("truncation constant must be positive");
    if (!(l > 1.0)) throw std::invalid_argument("moment order must exceed 1");
    TauRule r;
    r.kind = Kind::recommended;
    r.c = c;
    r.l = l;
    return r;
}

double TauRule::resolve(int n, int d, Model model) const {
    switch (kind) {
        case Kind::none: return std::numeric_limits<double>::infinity();
        case Kind::fixed_value: return value;
        case Kind::recommended: return recommended_tau(n, d, model, c, l, false);
    }
    throw std::logic_error("unreachable tau rule");
}

std::string TauRule::label_suffix() const {
    switch (kind) {
        case Kind::none: return "";
        case Kind::fixed_value: return "|tau=" + fmt_double(value);
        case Kind::recommended: return "|tau=auto";
    }
    throw std::logic_error("unreachable tau rule");
}

std::string NoiseVariant::effective_label() const {
    if (!label.empty()) return label;
    return noise.encode() + tau.label_suffix();
}

int ExperimentSpec::resolve_d(int n, const NoiseVariant& variant) const {
    const DRule& rule = variant.d_override ? *variant.d_override : d_rule;
    int d = rule.resolve(n);
    if (d_cap > 0) d = std::min(d, d_cap);
    return d;
}

// ---------------------------------------------------------------------------
// Overrides.
// ---------------------------------------------------------------------------

ExperimentSpec apply_overrides(const ExperimentSpec& spec, const Overrides& ov) {
    ExperimentSpec out = spec;
    if (ov.master_seed) out.master_seed = *ov.master_seed;
    if (ov.trials) out.trials = *ov.trials;
    if (ov.scale) {
        const double f = *ov.scale;
        if (!(f > 0.0)) throw std::invalid_argument("scale must be positive");
        std::vector<int> scaled;
        for (int n : out.n_grid) {
            long nn;
            if (out.d_rule.kind == DRule::Kind::ratio) {
                // Snap to the nearest multiple of the divisor so d = n / value
                // stays resolvable (half rounds away from zero).
                const long mult = std::lround(static_cast<double>(n) * f / out.d_rule.value);
                nn = mult * static_cast<long>(out.d_rule.value);
            } else {
                nn = std::lround(static_cast<double>(n) * f);
            }
            scaled.push_back(static_cast<int>(nn));
        }
        std::sort(scaled.begin(), scaled.end());
        scaled.erase(std::unique(scaled.begin(), scaled.end()), scaled.end());
        out.n_grid = scaled;
    }
    if (ov.fast) {
        out.trials = std::min(out.trials, 20);
        if (out.n_grid.size() > 5) out.n_grid.resize(5);
        if (out.model != Model::npr)  // Hermitian frames scale as n d^2
            out.d_cap = out.d_cap > 0 ? std::min(out.d_cap, 20) : 20;
    }
    if (ov.n_filter) {
        std::vector<int> kept;
        for (int n : out.n_grid)
            if (n == *ov.n_filter) kept.push_back(n);
        if (kept.empty())
            throw std::invalid_argument("n filter " + std::to_string(*ov.n_filter) +
                                        " matches no grid point");
        out.n_grid = kept;
    }
    if (out.trials < 1) throw std::invalid_argument("need at least one trial");
    if (out.n_grid.empty()) throw std::invalid_argument("empty n grid");
    if (out.variants.empty()) throw std::invalid_argument("need at least one noise variant");
    for (int n : out.n_grid)
        for (const auto& v : out.variants) {
            const int d = out.resolve_d(n, v);
            if (n < d)
                throw std::invalid_argument("n = " + std::to_string(n) +
                                            " fell below the signal dimension " +
                                            std::to_string(d));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Presets.
// ---------------------------------------------------------------------------

namespace {

const double kPhiMatchedLaplace = std::sqrt(2.0) / 5.0;  // same E eta^2 as 0.2*N(1, I)

ExperimentSpec make_exp1() {
    ExperimentSpec s;
    s.id = "exp1";
    s.model = Model::npr;
    s.n_grid = grid(15, {10, 15, 20, 30, 40, 50, 60, 70});
    s.d_rule = DRule::ratio(15);
    s.signal = SignalKind::ones_phase;
    s.variants = {plain(NoiseSpec::deterministic(SupportRule::absolute(10), 1.0, 3.5)),
                  plain(NoiseSpec::deterministic(SupportRule::absolute(10), 1.0, 4.0))};
    s.axis = Axis::invsqrt_n;
    s.theory = {{"7.35/sqrt(n)", 7.35, -0.5}};
    return s;
}

ExperimentSpec make_exp2() {
    ExperimentSpec s;
    s.id = "exp2";
    s.model = Model::npr;
    s.n_grid = grid(30, {10, 15, 20, 30, 40, 50, 60, 70});
    s.d_rule = DRule::fixed(30);
    s.signal = SignalKind::uniform_sphere;
    s.fixed_signal = true;
    for (double phi : {0.2, 0.3, 0.4})
        s.variants.push_back(plain(NoiseSpec::deterministic(SupportRule::full_n(), 0.5, phi)));
    s.axis = Axis::invsqrt_n;
    s.theory = {{"3.12/sqrt(n)", 3.12, -0.5}};
    return s;
}

ExperimentSpec make_exp3() {
    ExperimentSpec s;
    s.id = "exp3";
    s.model = Model::ngpr;
    s.n_grid = grid(30, {10, 15, 20, 30, 40, 50, 60, 70});
    s.d_rule = DRule::fixed(30);
    s.signal = SignalKind::uniform_sphere;
    s.variants = {plain(NoiseSpec::deterministic(SupportRule::absolute(20), 1.0, 4.0)),
                  plain(NoiseSpec::deterministic(SupportRule::absolute(20), 1.0, 6.0)),
                  plain(NoiseSpec::deterministic(SupportRule::absolute(45), 1.0, 4.0))};
    s.axis = Axis::inv_n;
    s.theory = {{"255/n", 255.0, -1.0}};
    return s;
}

ExperimentSpec make_exp4() {
    ExperimentSpec s;
    s.id = "exp4";
    s.model = Model::ngpr;
    s.n_grid = grid(15, {10, 15, 20, 30, 40, 50, 60});
    s.d_rule = DRule::ratio(15);
    s.signal = SignalKind::ones_phase;
    // (d, s) = (n/15, 20): dimension grows with n, fixed corruption count.
    s.variants.push_back(plain(NoiseSpec::deterministic(SupportRule::absolute(20), 1.0, 4.0)));
    // (d, s) = (15, 0.2 n): fixed dimension, fixed corruption fraction.
    NoiseVariant fraction = plain(NoiseSpec::deterministic(SupportRule::fraction(0.2), 1.0, 4.0));
    fraction.d_override = DRule::fixed(15);
    s.variants.push_back(std::move(fraction));
    s.axis = Axis::invsqrt_n;
    return s;
}

ExperimentSpec make_exp5() {
    ExperimentSpec s;
    s.id = "exp5";
    s.model = Model::ngpr;
    s.n_grid = grid(30, {10, 20, 30, 40, 50, 60, 70});
    s.d_rule = DRule::fixed(30);
    s.signal = SignalKind::uniform_sphere;
    for (double phi : {0.2, 0.3, 0.4})
        s.variants.push_back(plain(NoiseSpec::deterministic(SupportRule::full_n(), 1.0, phi)));
    s.axis = Axis::invsqrt_n;
    return s;
}

ExperimentSpec make_exp6() {
    ExperimentSpec s;
    s.id = "exp6";
    s.model = Model::npr;
    s.n_grid = grid(30, {10, 15, 20, 30, 40, 50, 60, 70, 80});
    s.d_rule = DRule::fixed(30);
    s.signal = SignalKind::uniform_sphere;
    s.variants = {plain(NoiseSpec::gaussian(0.0, NoiseSpec::Cov::iid, 0.2)),
                  plain(NoiseSpec::gaussian(0.0, NoiseSpec::Cov::correlated, 0.2))};
    s.axis = Axis::invsqrt_n;
    s.theory = {{"3.12/sqrt(n)", 3.12, -0.5}};
    return s;
}

ExperimentSpec make_exp6_laplace() {
    ExperimentSpec s = make_exp6();
    s.id = "exp6_laplace";
    s.variants = {plain(NoiseSpec::laplace(0.0, kPhiMatchedLaplace)),
                  plain(NoiseSpec::laplace(1.0, 0.2))};
    s.axis = Axis::n;
    return s;
}

ExperimentSpec make_exp7() {
    ExperimentSpec s;
    s.id = "exp7";
    s.model = Model::npr;
    s.n_grid = grid(600, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    s.d_rule = DRule::fixed(30);
    s.signal = SignalKind::uniform_sphere;
    s.variants = {plain(NoiseSpec::gaussian(0.0, NoiseSpec::Cov::iid, kPhiMatchedLaplace)),
                  plain(NoiseSpec::gaussian(1.0, NoiseSpec::Cov::iid, 0.2))};
    s.axis = Axis::invsqrt_n;
    return s;
}

ExperimentSpec make_exp8() {
    ExperimentSpec s;
    s.id = "exp8";
    s.model = Model::ngpr;
    s.n_grid = grid(30, {10, 15, 20, 30, 40, 50, 60, 70, 80});
    s.d_rule = DRule::fixed(30);
    s.signal = SignalKind::uniform_sphere;
    s.variants = {plain(NoiseSpec::gaussian(0.0, NoiseSpec::Cov::iid, kPhiMatchedLaplace)),
                  plain(NoiseSpec::gaussian(0.0, NoiseSpec::Cov::correlated, kPhiMatchedLaplace)),
                  plain(NoiseSpec::gaussian(1.0, NoiseSpec::Cov::iid, 0.2))};
    s.axis = Axis::invsqrt_n;
    return s;
}

ExperimentSpec make_exp9() {
    ExperimentSpec s = make_exp8();
    s.id = "exp9";
    s.variants = {plain(NoiseSpec::laplace(0.0, kPhiMatchedLaplace)),
                  plain(NoiseSpec::laplace(1.0, 0.2)),
                  plain(NoiseSpec::repeated_block(30, NoiseSpec::laplace(0.0, 1.0),
                                                  kPhiMatchedLaplace))};
    return s;
}

ExperimentSpec make_exp10(Model model) {
    ExperimentSpec s;
    s.id = model == Model::npr ? "exp10" : "exp10_ngpr";
    s.model = model;
    s.n_grid = grid(30, {10, 15, 20, 25, 30, 35, 40, 45, 50, 60, 70, 80, 90, 100});
    s.d_rule = DRule::fixed(30);
    s.signal = SignalKind::uniform_sphere;
    const NoiseSpec heavy = NoiseSpec::student_t(2.5, true, 0.75);
    NoiseVariant truncated{heavy, TauRule::recommended(model == Model::npr ? 2.8 : 2.4),
                           std::nullopt, ""};
    NoiseVariant untruncated{heavy, TauRule::none(), std::nullopt, heavy.encode() + "|tau=inf"};
    s.variants = {std::move(truncated), std::move(untruncated)};
    s.axis = Axis::n;
    return s;
}

ExperimentSpec make_npr_mixture() {
    ExperimentSpec s = make_exp8();
    s.id = "npr_mixture";
    s.model = Model::npr;
    s.ensemble.dist = ScalarDist::mixture();
    return s;
}

ExperimentSpec make_ngpr_corrcov() {
    ExperimentSpec s = make_exp8();
    s.id = "ngpr_corrcov";
    s.ensemble.random_spectrum_cov = true;
    s.ensemble.lambda0 = 0.4;
    s.ensemble.lambda1 = 2.5;
    return s;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"exp1", "exp2",        "exp3", "exp4",  "exp5",       "exp6",
            "exp6_laplace", "exp7", "exp8", "exp8_laplace", "exp9", "exp10",
            "exp10_ngpr",   "npr_mixture", "ngpr_corrcov"};
}

bool is_preset(const std::string& name) {
    const auto names = preset_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

ExperimentSpec build_preset(const std::string& name) {
    if (name == "exp1") return make_exp1();
    if (name == "exp2") return make_exp2();
    if (name == "exp3") return make_exp3();
    if (name == "exp4") return make_exp4();
    if (name == "exp5") return make_exp5();
    if (name == "exp6") return make_exp6();
    if (name == "exp6_laplace") return make_exp6_laplace();
    if (name == "exp7") return make_exp7();
    if (name == "exp8") return make_exp8();
    if (name == "exp9" || name == "exp8_laplace") return make_exp9();
    if (name == "exp10") return make_exp10(Model::npr);
    if (name == "exp10_ngpr") return make_exp10(Model::ngpr);
    if (name == "npr_mixture") return make_npr_mixture();
    if (name == "ngpr_corrcov") return make_ngpr_corrcov();
    throw std::invalid_argument("unknown preset: " + name);
}

Model parse_model(const std::string& name) {
    if (name == "npr") return Model::npr;
    if (name == "ngpr") return Model::ngpr;
    if (name == "rank_r") return Model::rank_r;
    throw std::invalid_argument("unknown model: " + name);
}

SignalKind parse_signal(const std::string& name) {
    if (name == "ones_phase") return SignalKind::ones_phase;
    if (name == "uniform_sphere") return SignalKind::uniform_sphere;
    throw std::invalid_argument("unknown signal kind: " + name);
}

DRule parse_drule(const nlohmann::json& j) {
    const std::string kind = j.value("kind", std::string("fixed"));
    const int value = j.value("value", 1);
    if (kind == "fixed") return DRule::fixed(value);
    if (kind == "ratio") return DRule::ratio(value);
    throw std::invalid_argument("unknown dimension rule kind: " + kind);
}

TauRule parse_tau(const nlohmann::json& j) {
    const std::string kind = j.value("kind", std::string("none"));
    if (kind == "none") return TauRule::none();
    if (kind == "fixed" || kind == "fixed_value")
        return TauRule::fixed_value(j.at("value").get<double>());
    if (kind == "recommended") return TauRule::recommended(j.value("c", 2.8), j.value("l", 2.45));
    throw std::invalid_argument("unknown truncation rule kind: " + kind);
}

ExperimentSpec load_json_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("no such preset or config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);

    ExperimentSpec spec;
    spec.id = j.value("id", std::string("custom"));
    spec.model = parse_model(j.value("model", std::string("npr")));
    spec.rank = j.value("rank", 1);
    spec.n_grid = j.at("n_grid").get<std::vector<int>>();
    if (j.contains("d_rule")) spec.d_rule = parse_drule(j.at("d_rule"));
    spec.d_cap = j.value("d_cap", 0);
    spec.signal = parse_signal(j.value("signal", std::string("uniform_sphere")));
    spec.fixed_signal = j.value("fixed_signal", false);
    for (const auto& vj : j.at("variants")) {
        NoiseVariant v;
        v.noise = NoiseSpec::parse(vj.at("noise").get<std::string>());
        if (vj.contains("tau")) v.tau = parse_tau(vj.at("tau"));
        if (vj.contains("d_override")) v.d_override = parse_drule(vj.at("d_override"));
        v.label = vj.value("label", std::string(""));
        spec.variants.push_back(std::move(v));
    }
    if (j.contains("ensemble")) {
        const auto& ej = j.at("ensemble");
        const std::string dist = ej.value("dist", std::string("gaussian"));
        if (dist == "gaussian") spec.ensemble.dist = ScalarDist::gaussian();
        else if (dist == "mixture") spec.ensemble.dist = ScalarDist::mixture();
        else if (dist == "rademacher") spec.ensemble.dist = ScalarDist::rademacher();
        else throw std::invalid_argument("unknown ensemble dist: " + dist);
        spec.ensemble.random_spectrum_cov = ej.value("random_spectrum_cov", false);
        spec.ensemble.lambda0 = ej.value("lambda0", 0.4);
        spec.ensemble.lambda1 = ej.value("lambda1", 2.5);
    }
    if (j.contains("solver")) {
        const auto& sj = j.at("solver");
        spec.solver.max_iters = sj.value("max_iters", spec.solver.max_iters);
        spec.solver.power_iters = sj.value("power_iters", spec.solver.power_iters);
        spec.solver.init_seed = sj.value("init_seed", spec.solver.init_seed);
        spec.solver.divergence_norm = sj.value("divergence_norm", spec.solver.divergence_norm);
        spec.solver.chunk = sj.value("chunk", spec.solver.chunk);
    }
    spec.trials = j.value("trials", 100);
    spec.master_seed = j.value("master_seed", static_cast<std::uint64_t>(42));
    spec.axis = parse_axis(j.value("axis", std::string("invsqrt_n")));
    if (j.contains("theory"))
        for (const auto& tj : j.at("theory"))
            spec.theory.push_back({tj.value("label", std::string("")),
                                   tj.value("coefficient", 1.0), tj.value("exponent", -0.5)});
    return spec;
}

}  // namespace

ExperimentSpec load_experiment(const std::string& source) {
    if (is_preset(source)) return build_preset(source);
    return load_json_config(source);
}

// ---------------------------------------------------------------------------
// Execution.
// ---------------------------------------------------------------------------

int default_worker_count() {
    if (const char* env = std::getenv("PHASERM_WORKERS")) {
        int v = 0;
        const char* end = env + std::strlen(env);
        auto res = std::from_chars(env, end, v);
        if (res.ec == std::errc() && res.ptr == end && v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

VecC experiment_signal(const ExperimentSpec& spec, int n, int d, int trial) {
    const std::uint64_t seed = spec.fixed_signal
                                   ? derive_seed(spec.master_seed, "signal", 0, 0)
                                   : derive_seed(spec.master_seed, "signal", n, trial);
    return make_signal(d, spec.signal, seed);
}

namespace {

// Runs every variant of one (n, trial) cell; frames are cached per resolved d
// so paired variants see the identical frame object.
std::vector<TrialRecord> run_cell(const ExperimentSpec& spec, int n, int trial,
                                  const CovarianceSpec* shared_cov) {
    std::vector<TrialRecord> out;
    out.reserve(spec.variants.size());
    std::map<int, Rank1Frame> rank1_frames;
    std::map<int, HermitianFrame> hermitian_frames;

    const std::uint64_t frame_seed = derive_seed(spec.master_seed, "frame", n, trial);
    const std::uint64_t noise_seed = derive_seed(spec.master_seed, "noise", n, trial);
    const std::uint64_t ncov_seed = derive_seed(spec.master_seed, "ncov", n, trial);
    const std::uint64_t init_seed = derive_seed(spec.master_seed, "init", n, trial);
    const std::uint64_t trial_seed = derive_seed(spec.master_seed, "trial", n, trial);
    const std::uint64_t factor_seed = spec.fixed_signal
                                          ? derive_seed(spec.master_seed, "signal", 0, 0)
                                          : derive_seed(spec.master_seed, "signal", n, trial);

    for (const auto& variant : spec.variants) {
        const auto t_start = std::chrono::steady_clock::now();
        const int d = spec.resolve_d(n, variant);

        TrialRecord rec;
        rec.experiment = spec.id;
        rec.n = n;
        rec.d = d;
        rec.noise = variant.effective_label();
        rec.trial = trial;
        rec.seed = trial_seed;

        RandomStream noise_stream(noise_seed);
        RandomStream ncov_stream(ncov_seed);
        const NoiseVector nv = sample_noise(variant.noise, n, noise_stream, &ncov_stream);
        const double tau = variant.tau.resolve(n, d, spec.model);

        SolverConfig cfg = spec.solver;
        cfg.init_seed = init_seed;

        SolveResult sol;
        double truth_loss = 0.0;
        if (spec.model == Model::npr) {
            auto it = rank1_frames.find(d);
            if (it == rank1_frames.end())
                it = rank1_frames
                         .emplace(d, sample_rank1_frame(n, d, spec.ensemble.dist, frame_seed))
                         .first;
            const Rank1Frame& frame = it->second;
            const VecC x0 = experiment_signal(spec, n, d, trial);
            const MeasurementSet meas = generate_measurements(apply_operator(frame, x0), nv, tau);
            sol = run_wirtinger_flow(frame, meas.y_used, StepRule::npr_schedule(), cfg);
            truth_loss = residual_loss(frame, meas.y_used, x0);
            rec.error_d = matrix_distance(sol.z, x0);
            rec.error_dprime = phase_aligned_distance(sol.z, x0);
        } else {
            auto it = hermitian_frames.find(d);
            if (it == hermitian_frames.end()) {
                CovarianceSpec cov = CovarianceSpec::identity();
                if (spec.ensemble.random_spectrum_cov) {
                    if (shared_cov) {
                        cov = *shared_cov;
                    } else {
                        cov = CovarianceSpec::random_spectrum(
                            spec.ensemble.lambda0, spec.ensemble.lambda1,
                            derive_seed(spec.master_seed, "fcov"));
                    }
                }
                it = hermitian_frames.emplace(d, sample_hermitian_frame(n, d, cov, frame_seed))
                         .first;
            }
            const HermitianFrame& frame = it->second;
            if (spec.model == Model::ngpr) {
                const VecC x0 = experiment_signal(spec, n, d, trial);
                const MeasurementSet meas =
                    generate_measurements(apply_operator(frame, x0), nv, tau);
                sol = run_wirtinger_flow(frame, meas.y_used, StepRule::ngpr_fixed(), cfg);
                truth_loss = residual_loss(frame, meas.y_used, x0);
                rec.error_d = matrix_distance(sol.z, x0);
                rec.error_dprime = phase_aligned_distance(sol.z, x0);
            } else {
                const MatC U0 = make_low_rank_factor(d, spec.rank, factor_seed);
                const MeasurementSet meas =
                    generate_measurements(apply_operator(frame, U0), nv, tau);
                sol = run_factored_gd(frame, meas.y_used, spec.rank, StepRule::ngpr_fixed(), cfg);
                truth_loss = residual_loss(frame, meas.y_used, U0);
                rec.error_d = matrix_distance(sol.U, U0);
                rec.error_dprime = phase_aligned_distance(sol.U, U0);
            }
        }

        rec.final_loss = sol.final_loss;
        rec.truth_loss = truth_loss;
        rec.diverged = sol.diverged;
        rec.optimal = !sol.diverged && inspect_optimality(sol.final_loss, truth_loss).optimal;
        rec.bounds = evaluate_bounds(nv.values, d);
        rec.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
                .count();
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<SummaryRow> summarize(const ExperimentSpec& spec,
                                  const std::vector<TrialRecord>& records) {
    std::vector<SummaryRow> rows;
    std::size_t i = 0;
    while (i < records.size()) {
        std::size_t j = i;
        while (j < records.size() && records[j].n == records[i].n &&
               records[j].noise == records[i].noise)
            ++j;
        SummaryRow row;
        row.experiment = spec.id;
        row.n = records[i].n;
        row.d = records[i].d;
        row.noise = records[i].noise;
        row.trials_requested = spec.trials;
        double sum_d = 0.0, sum_dp = 0.0;
        for (std::size_t k = i; k < j; ++k) {
            const TrialRecord& r = records[k];
            if (r.optimal) {
                ++row.optimal_count;
                sum_d += r.error_d;
                sum_dp += r.error_dprime;
            }
            row.mean_bound_rank1_generic += r.bounds.rank1_generic;
            row.mean_bound_rank1_refined += r.bounds.rank1_refined;
            row.mean_bound_hermitian += r.bounds.hermitian;
            row.mean_spikiness += r.bounds.spikiness;
        }
        const double cell = static_cast<double>(j - i);
        row.excluded_count = row.trials_requested - row.optimal_count;
        row.valid = row.optimal_count > 0;
        if (row.valid) {
            row.mean_error_d = sum_d / row.optimal_count;
            row.mean_error_dprime = sum_dp / row.optimal_count;
        }
        row.mean_bound_rank1_generic /= cell;
        row.mean_bound_rank1_refined /= cell;
        row.mean_bound_hermitian /= cell;
        row.mean_spikiness /= cell;
        rows.push_back(std::move(row));
        i = j;
    }
    return rows;
}

}  // namespace

RunResult run_experiment(const ExperimentSpec& spec0, const Overrides& overrides) {
    const ExperimentSpec spec = apply_overrides(spec0, overrides);
    const int workers =
        overrides.workers ? std::max(1, *overrides.workers) : default_worker_count();

    // When every cell resolves to the same d, one random-spectrum covariance
    // is shared (its factor cache pre-built here, before threads start).
    std::optional<CovarianceSpec> shared_cov;
    if (spec.model != Model::npr && spec.ensemble.random_spectrum_cov) {
        std::set<int> dims;
        for (int n : spec.n_grid)
            for (const auto& v : spec.variants) dims.insert(spec.resolve_d(n, v));
        if (dims.size() == 1) {
            shared_cov = CovarianceSpec::random_spectrum(
                spec.ensemble.lambda0, spec.ensemble.lambda1,
                derive_seed(spec.master_seed, "fcov"));
            const int d = *dims.begin();
            shared_cov->factor(d * d);
        }
    }
    const CovarianceSpec* shared = shared_cov ? &*shared_cov : nullptr;

    struct Cell {
        int n;
        int trial;
    };
    std::vector<Cell> cells;
    cells.reserve(spec.n_grid.size() * static_cast<std::size_t>(spec.trials));
    for (int n : spec.n_grid)
        for (int t = 0; t < spec.trials; ++t) cells.push_back({n, t});

    std::vector<std::vector<TrialRecord>> slots(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                slots[i] = run_cell(spec, cells[i].n, cells[i].trial, shared);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    RunResult result;
    for (auto& slot : slots)
        for (auto& rec : slot) result.records.push_back(std::move(rec));
    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const TrialRecord& a, const TrialRecord& b) {
                         return std::tie(a.n, a.noise, a.trial) < std::tie(b.n, b.noise, b.trial);
                     });
    for (const auto& rec : result.records) {
        if (rec.diverged) ++result.diverged;
        if (rec.n >= rec.d &&
            rec.bounds.hermitian > std::min(rec.bounds.rank1_generic, rec.bounds.rank1_refined))
            ++result.bound_violations;
    }
    result.summaries = summarize(spec, result.records);
    if (result.diverged > 0) {
        const std::string msg = std::to_string(result.diverged) +
                                " trial(s) diverged in experiment " + spec.id;
        throw DivergenceError(msg, std::move(result));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

std::string trials_csv(const std::vector<TrialRecord>& records) {
    std::string out =
        "experiment,n,d,noise,trial,error_d,error_dprime,final_loss,truth_loss,optimal,seed,"
        "wall_time_ms\n";
    for (const auto& r : records) {
        out += csv_field(r.experiment);
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += std::to_string(r.d);
        out += ',';
        out += csv_field(r.noise);
        out += ',';
        out += std::to_string(r.trial);
        out += ',';
        out += fmt_double(r.error_d);
        out += ',';
        out += fmt_double(r.error_dprime);
        out += ',';
        out += fmt_double(r.final_loss);
        out += ',';
        out += fmt_double(r.truth_loss);
        out += ',';
        out += r.optimal ? '1' : '0';
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += fmt_double(r.wall_time_ms);
        out += '\n';
    }
    return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out =
        "experiment,n,d,noise,trials_requested,optimal_count,excluded_count,valid,"
        "mean_error_d,mean_error_dprime,mean_bound_rank1_generic,mean_bound_rank1_refined,"
        "mean_bound_hermitian,mean_spikiness\n";
    for (const auto& r : rows) {
        out += csv_field(r.experiment);
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += std::to_string(r.d);
        out += ',';
        out += csv_field(r.noise);
        out += ',';
        out += std::to_string(r.trials_requested);
        out += ',';
        out += std::to_string(r.optimal_count);
        out += ',';
        out += std::to_string(r.excluded_count);
        out += ',';
        out += r.valid ? '1' : '0';
        out += ',';
        out += fmt_double(r.mean_error_d);
        out += ',';
        out += fmt_double(r.mean_error_dprime);
        out += ',';
        out += fmt_double(r.mean_bound_rank1_generic);
        out += ',';
        out += fmt_double(r.mean_bound_rank1_refined);
        out += ',';
        out += fmt_double(r.mean_bound_hermitian);
        out += ',';
        out += fmt_double(r.mean_spikiness);
        out += '\n';
    }
    return out;
}

std::string plot_json(const ExperimentSpec& spec, const RunResult& result) {
    nlohmann::json doc;
    doc["id"] = spec.id;
    doc["axis"] = axis_name(spec.axis);
    doc["curves"] = nlohmann::json::array();
    std::set<int> ns_seen;
    for (const auto& variant : spec.variants) {
        const std::string label = variant.effective_label();
        nlohmann::json curve;
        curve["label"] = label;
        curve["n"] = nlohmann::json::array();
        curve["mean_error_d"] = nlohmann::json::array();
        curve["mean_error_dprime"] = nlohmann::json::array();
        for (const auto& row : result.summaries) {
            if (row.noise != label || !row.valid) continue;
            curve["n"].push_back(row.n);
            curve["mean_error_d"].push_back(row.mean_error_d);
            curve["mean_error_dprime"].push_back(row.mean_error_dprime);
            ns_seen.insert(row.n);
        }
        doc["curves"].push_back(std::move(curve));
    }
    doc["theory"] = nlohmann::json::array();
    for (const auto& t : spec.theory) {
        nlohmann::json curve;
        curve["label"] = t.label;
        curve["coefficient"] = t.coefficient;
        curve["exponent"] = t.exponent;
        curve["n"] = nlohmann::json::array();
        curve["value"] = nlohmann::json::array();
        for (int n : ns_seen) {
            curve["n"].push_back(n);
            curve["value"].push_back(t.coefficient * std::pow(static_cast<double>(n), t.exponent));
        }
        doc["theory"].push_back(std::move(curve));
    }
    return doc.dump(2) + "\n";
}

void emit_results(const ExperimentSpec& spec, const RunResult& result,
                  const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + name + " under " + out_dir);
        out << content;
    };
    write("trials.csv", trials_csv(result.records));
    write("summary.csv", summary_csv(result.summaries));
    write("plot_" + spec.id + ".json", plot_json(spec, result));
}

}  // namespace phaserm
