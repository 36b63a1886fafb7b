// Command-line front end: run experiment presets/configs, probe frame
// properties, evaluate noise-vector error bounds, and solve single instances.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "phaserm/harness.hpp"

namespace {

using namespace phaserm;

const char* mode_name(FrameCheckMode mode) {
    switch (mode) {
        case FrameCheckMode::rank1_l1: return "rank1_l1";
        case FrameCheckMode::hermitian_rip: return "hermitian_rip";
        case FrameCheckMode::weighted_opnorm: return "weighted_opnorm";
    }
    return "?";
}

FrameCheckMode parse_mode(const std::string& name) {
    if (name == "l1") return FrameCheckMode::rank1_l1;
    if (name == "rip") return FrameCheckMode::hermitian_rip;
    if (name == "opnorm") return FrameCheckMode::weighted_opnorm;
    throw CLI::ValidationError("--mode", "expected one of l1|rip|opnorm");
}

nlohmann::json check_json(const FrameCheckReport& rep) {
    nlohmann::json j;
    j["mode"] = mode_name(rep.mode);
    j["samples"] = rep.samples;
    j["min_stat"] = rep.min_stat;
    j["max_stat"] = rep.max_stat;
    if (rep.mode == FrameCheckMode::weighted_opnorm) {
        j["min_ratio"] = rep.min_ratio;
        j["max_ratio"] = rep.max_ratio;
    }
    return j;
}

nlohmann::json bounds_json(const BoundReport& rep) {
    nlohmann::json j;
    j["rank1_generic"] = rep.rank1_generic;
    j["rank1_refined"] = rep.rank1_refined;
    j["hermitian"] = rep.hermitian;
    j["spikiness"] = rep.spikiness;
    return j;
}

nlohmann::json record_json(const TrialRecord& rec) {
    nlohmann::json j;
    j["experiment"] = rec.experiment;
    j["n"] = rec.n;
    j["d"] = rec.d;
    j["noise"] = rec.noise;
    j["trial"] = rec.trial;
    j["error_d"] = rec.error_d;
    j["error_dprime"] = rec.error_dprime;
    j["final_loss"] = rec.final_loss;
    j["truth_loss"] = rec.truth_loss;
    j["optimal"] = rec.optimal;
    j["seed"] = rec.seed;
    j["wall_time_ms"] = rec.wall_time_ms;
    j["diverged"] = rec.diverged;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Empirical l2 risk minimization for noisy phase retrieval and "
                 "rank-r PSD matrix sensing"};
    app.require_subcommand(1);

    // ------------------------------------------------------------------ run
    auto* run = app.add_subcommand(
        "run", "Run an experiment (preset name or JSON config) and write CSV/JSON results");
    std::string preset, config, out_dir;
    int run_trials = 0, run_workers = 0, run_nfilter = 0;
    double run_scale = 0.0;
    std::uint64_t run_seed = 0;
    bool run_fast = false;
    run->add_option("--preset", preset, "Preset name, e.g. exp1 .. exp10");
    run->add_option("--config", config, "Path to a JSON experiment config");
    run->add_option("--out", out_dir, "Output directory")->required();
    auto* opt_trials = run->add_option("--trials", run_trials, "Override trials per cell");
    auto* opt_scale = run->add_option("--scale", run_scale, "Scale every n in the grid");
    auto* opt_workers = run->add_option("--workers", run_workers, "Worker thread count");
    auto* opt_seed = run->add_option("--seed", run_seed, "Override the master seed");
    auto* opt_nfilter = run->add_option("--n-filter", run_nfilter, "Keep only this n");
    run->add_flag("--fast", run_fast, "Reduced profile: <=20 trials, 5 grid points");

    // ---------------------------------------------------------------- check
    auto* check = app.add_subcommand("check", "Empirical frame-property statistics (JSON)");
    std::string check_frame = "rank1", check_mode = "l1";
    int check_n = 400, check_d = 10, check_r = 1, check_samples = 200;
    std::uint64_t check_seed = 1;
    check->add_option("--frame", check_frame, "rank1 | hermitian")
        ->check(CLI::IsMember({"rank1", "hermitian"}));
    check->add_option("--mode", check_mode, "l1 | rip | opnorm")
        ->check(CLI::IsMember({"l1", "rip", "opnorm"}));
    check->add_option("--n", check_n, "Number of frame elements");
    check->add_option("--d", check_d, "Signal dimension");
    check->add_option("--r", check_r, "Rank of the random test matrices");
    check->add_option("--samples", check_samples, "Number of test matrices / weight vectors");
    check->add_option("--seed", check_seed, "Master seed");

    // --------------------------------------------------------------- bounds
    auto* bounds = app.add_subcommand(
        "bounds", "Evaluate the theoretical error bounds on one sampled noise vector (JSON)");
    std::string bounds_noise = "none";
    int bounds_n = 100, bounds_d = 10;
    std::uint64_t bounds_seed = 1;
    bounds->add_option("--noise", bounds_noise, "Noise spec, e.g. det(s=10,rho=1,phi=3.5)")
        ->required();
    bounds->add_option("--n", bounds_n, "Number of measurements");
    bounds->add_option("--d", bounds_d, "Signal dimension");
    bounds->add_option("--seed", bounds_seed, "Seed for random noise families");

    // ---------------------------------------------------------------- solve
    auto* solve = app.add_subcommand("solve", "Solve a single instance; prints the trial record");
    std::string solve_model = "npr", solve_noise = "none", solve_tau;
    int solve_n = 200, solve_d = 20, solve_rank = 1;
    std::uint64_t solve_seed = 1;
    solve->add_option("--model", solve_model, "npr | ngpr | rank_r")
        ->check(CLI::IsMember({"npr", "ngpr", "rank_r"}));
    solve->add_option("--n", solve_n, "Number of measurements");
    solve->add_option("--d", solve_d, "Signal dimension");
    solve->add_option("--rank", solve_rank, "Factor rank (rank_r model)");
    solve->add_option("--noise", solve_noise, "Noise spec");
    solve->add_option("--tau", solve_tau, "Truncation level, a number or 'auto'");
    solve->add_option("--seed", solve_seed, "Master seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (preset.empty() == config.empty())
                throw std::invalid_argument("need exactly one of --preset / --config");
            const ExperimentSpec spec = load_experiment(preset.empty() ? config : preset);
            Overrides ov;
            if (*opt_trials) ov.trials = run_trials;
            if (*opt_scale) ov.scale = run_scale;
            if (*opt_workers) ov.workers = run_workers;
            if (*opt_seed) ov.master_seed = run_seed;
            if (*opt_nfilter) ov.n_filter = run_nfilter;
            ov.fast = run_fast;
            const ExperimentSpec effective = apply_overrides(spec, ov);
            int exit_code = 0;
            RunResult result;
            try {
                result = run_experiment(spec, ov);
            } catch (const DivergenceError& err) {
                std::fprintf(stderr, "warning: %s\n", err.what());
                result = err.result();
                exit_code = 1;
            }
            emit_results(effective, result, out_dir);
            std::printf("%s: wrote %zu trial records to %s (diverged=%d, bound_violations=%d)\n",
                        effective.id.c_str(), result.records.size(), out_dir.c_str(),
                        result.diverged, result.bound_violations);
            return exit_code;
        }

        if (*check) {
            const FrameCheckMode mode = parse_mode(check_mode);
            const std::uint64_t frame_seed = derive_seed(check_seed, "frame", check_n, check_d);
            const std::uint64_t sample_seed = derive_seed(check_seed, "samples", check_n, check_d);
            FrameCheckReport rep;
            if (check_frame == "rank1") {
                const Rank1Frame frame =
                    sample_rank1_frame(check_n, check_d, ScalarDist::gaussian(), frame_seed);
                rep = empirical_frame_check(frame, mode, check_r, check_samples, sample_seed);
            } else {
                const HermitianFrame frame = sample_hermitian_frame(
                    check_n, check_d, CovarianceSpec::identity(), frame_seed);
                rep = empirical_frame_check(frame, mode, check_r, check_samples, sample_seed);
            }
            std::cout << check_json(rep).dump(2) << "\n";
            return 0;
        }

        if (*bounds) {
            const NoiseSpec spec = NoiseSpec::parse(bounds_noise);
            RandomStream stream(derive_seed(bounds_seed, "noise", bounds_n, 0));
            RandomStream cov_stream(derive_seed(bounds_seed, "ncov", bounds_n, 0));
            const NoiseVector nv = sample_noise(spec, bounds_n, stream, &cov_stream);
            std::cout << bounds_json(evaluate_bounds(nv.values, bounds_d)).dump(2) << "\n";
            return 0;
        }

        if (*solve) {
            ExperimentSpec spec;
            spec.id = "solve";
            spec.model = solve_model == "npr"    ? Model::npr
                         : solve_model == "ngpr" ? Model::ngpr
                                                 : Model::rank_r;
            spec.rank = solve_rank;
            spec.n_grid = {solve_n};
            spec.d_rule = DRule::fixed(solve_d);
            spec.trials = 1;
            spec.master_seed = solve_seed;
            NoiseVariant variant;
            variant.noise = NoiseSpec::parse(solve_noise);
            if (!solve_tau.empty()) {
                if (solve_tau == "auto")
                    variant.tau = TauRule::recommended(spec.model == Model::npr ? 2.8 : 2.4);
                else
                    variant.tau = TauRule::fixed_value(std::stod(solve_tau));
            }
            spec.variants = {variant};
            Overrides ov;
            ov.workers = 1;
            int exit_code = 0;
            RunResult result;
            try {
                result = run_experiment(spec, ov);
            } catch (const DivergenceError& err) {
                std::fprintf(stderr, "warning: %s\n", err.what());
                result = err.result();
                exit_code = 1;
            }
            std::cout << record_json(result.records.at(0)).dump(2) << "\n";
            return exit_code;
        }
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
    return 0;
}
