// Python module exposing the main operations: frame/signal/noise sampling,
// forward measurement maps with truncation, the ERM solvers, error metrics
// and bounds, frame-property checks, and the experiment harness.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "phaserm/harness.hpp"

namespace py = pybind11;
using namespace phaserm;

namespace {

Overrides build_overrides(std::optional<int> trials, std::optional<double> scale,
                          std::optional<int> workers, bool fast, std::optional<int> n_filter,
                          std::optional<std::uint64_t> master_seed) {
    Overrides ov;
    ov.trials = trials;
    ov.scale = scale;
    ov.workers = workers;
    ov.fast = fast;
    ov.n_filter = n_filter;
    ov.master_seed = master_seed;
    return ov;
}

}  // namespace

PYBIND11_MODULE(phaserm_py, m) {
    m.doc() = "Empirical l2 risk minimization for noisy phase retrieval (standard and "
              "generalized) and rank-r PSD matrix sensing, with truncated robust "
              "estimation, error bounds, frame checks, and a Monte-Carlo harness.";

    // ------------------------------------------------------------- enums
    py::enum_<Model>(m, "Model")
        .value("npr", Model::npr)
        .value("ngpr", Model::ngpr)
        .value("rank_r", Model::rank_r);

    py::enum_<SignalKind>(m, "SignalKind")
        .value("ones_phase", SignalKind::ones_phase)
        .value("uniform_sphere", SignalKind::uniform_sphere);

    py::enum_<FrameCheckMode>(m, "FrameCheckMode")
        .value("rank1_l1", FrameCheckMode::rank1_l1)
        .value("hermitian_rip", FrameCheckMode::hermitian_rip)
        .value("weighted_opnorm", FrameCheckMode::weighted_opnorm);

    // ----------------------------------------------------------- ensembles
    py::class_<ScalarDist>(m, "ScalarDist")
        .def_static("gaussian", &ScalarDist::gaussian, py::arg("variance") = 0.5)
        .def_static("rademacher", &ScalarDist::rademacher, py::arg("scale") = 1.0)
        .def_static("mixture", &ScalarDist::mixture, py::arg("p") = 1.0 / 17.0,
                    py::arg("gaussian_variance") = 0.5, py::arg("rademacher_scale") = 3.0)
        .def("second_moment", &ScalarDist::second_moment)
        .def("fourth_moment", &ScalarDist::fourth_moment)
        .def("exceeds_squared_second_moment", &ScalarDist::exceeds_squared_second_moment);

    py::class_<CovarianceSpec>(m, "CovarianceSpec")
        .def_static("identity", &CovarianceSpec::identity)
        .def_static("scaled_identity", &CovarianceSpec::scaled_identity, py::arg("variance"))
        .def_static("random_spectrum", &CovarianceSpec::random_spectrum, py::arg("lambda0"),
                    py::arg("lambda1"), py::arg("seed"))
        .def("dense", &CovarianceSpec::dense, py::arg("dim"));

    py::class_<Rank1Frame>(m, "Rank1Frame")
        .def_readonly("n", &Rank1Frame::n)
        .def_readonly("d", &Rank1Frame::d)
        .def_readonly("rows", &Rank1Frame::rows);

    py::class_<HermitianFrame>(m, "HermitianFrame")
        .def_property_readonly("n", &HermitianFrame::n)
        .def_property_readonly("d", &HermitianFrame::d)
        .def("block", &HermitianFrame::block, py::arg("k"))
        .def("stacked", &HermitianFrame::stacked, py::return_value_policy::copy);

    m.def("sample_rank1_frame", &sample_rank1_frame, py::arg("n"), py::arg("d"), py::arg("dist"),
          py::arg("seed"));
    m.def("sample_hermitian_frame", &sample_hermitian_frame, py::arg("n"), py::arg("d"),
          py::arg("cov"), py::arg("seed"), py::arg("materialize") = true);
    m.def("hermitianize", &hermitianize, py::arg("raw"));
    m.def("make_signal", &make_signal, py::arg("d"), py::arg("kind"), py::arg("seed"));
    m.def("make_low_rank_factor", &make_low_rank_factor, py::arg("d"), py::arg("r"),
          py::arg("seed"));
    m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("tag"), py::arg("a") = 0,
          py::arg("b") = 0);

    // --------------------------------------------------------------- noise
    py::class_<NoiseSpec>(m, "NoiseSpec")
        .def_static("parse", &NoiseSpec::parse, py::arg("text"))
        .def("encode", &NoiseSpec::encode)
        .def("__repr__", [](const NoiseSpec& s) { return "NoiseSpec(" + s.encode() + ")"; });

    py::class_<NoiseVector>(m, "NoiseVector")
        .def_readonly("values", &NoiseVector::values)
        .def_readonly("label", &NoiseVector::label);

    m.def(
        "sample_noise",
        [](const NoiseSpec& spec, int n, std::uint64_t seed, std::uint64_t cov_seed) {
            RandomStream stream(seed);
            RandomStream cov_stream(cov_seed);
            return sample_noise(spec, n, stream, &cov_stream);
        },
        py::arg("spec"), py::arg("n"), py::arg("seed"), py::arg("cov_seed") = 0,
        "Sample a noise vector; `seed` drives the draws, `cov_seed` the correlated "
        "covariance factor when the spec requests one.");

    // ------------------------------------------------------- forward model
    m.def("apply_operator",
          py::overload_cast<const Rank1Frame&, const VecC&>(&apply_operator), py::arg("frame"),
          py::arg("x"));
    m.def("apply_operator",
          py::overload_cast<const HermitianFrame&, const VecC&>(&apply_operator), py::arg("frame"),
          py::arg("x"));
    m.def("apply_operator",
          py::overload_cast<const Rank1Frame&, const MatC&>(&apply_operator), py::arg("frame"),
          py::arg("factor"));
    m.def("apply_operator",
          py::overload_cast<const HermitianFrame&, const MatC&>(&apply_operator), py::arg("frame"),
          py::arg("factor"));
    m.def("truncate_responses", &truncate_responses, py::arg("y"), py::arg("tau"));
    m.def("recommended_tau", &recommended_tau, py::arg("n"), py::arg("d"), py::arg("model"),
          py::arg("c"), py::arg("l") = 2.45, py::arg("log_factor") = false);

    py::class_<MeasurementSet>(m, "MeasurementSet")
        .def_readonly("y", &MeasurementSet::y)
        .def_readonly("y_used", &MeasurementSet::y_used)
        .def_readonly("tau", &MeasurementSet::tau);
    m.def("generate_measurements", &generate_measurements, py::arg("clean"), py::arg("noise"),
          py::arg("tau"));

    // ---------------------------------------------------------------- solver
    py::class_<StepRule>(m, "StepRule")
        .def_static("npr_schedule", &StepRule::npr_schedule)
        .def_static("ngpr_fixed", &StepRule::ngpr_fixed);

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("max_iters", &SolverConfig::max_iters)
        .def_readwrite("power_iters", &SolverConfig::power_iters)
        .def_readwrite("init_seed", &SolverConfig::init_seed)
        .def_readwrite("divergence_norm", &SolverConfig::divergence_norm)
        .def_readwrite("chunk", &SolverConfig::chunk);

    py::class_<SolveResult>(m, "SolveResult")
        .def_readonly("z", &SolveResult::z)
        .def_readonly("U", &SolveResult::U)
        .def_readonly("final_loss", &SolveResult::final_loss)
        .def_readonly("iters", &SolveResult::iters)
        .def_readonly("diverged", &SolveResult::diverged);

    m.def("initial_point",
          py::overload_cast<const Rank1Frame&, const VecR&, const SolverConfig&>(&initial_point),
          py::arg("frame"), py::arg("y"), py::arg("cfg") = SolverConfig{});
    m.def("initial_point",
          py::overload_cast<const HermitianFrame&, const VecR&, const SolverConfig&>(
              &initial_point),
          py::arg("frame"), py::arg("y"), py::arg("cfg") = SolverConfig{});
    m.def("wirtinger_gradient",
          py::overload_cast<const Rank1Frame&, const VecR&, const VecC&>(&wirtinger_gradient),
          py::arg("frame"), py::arg("y"), py::arg("z"));
    m.def("wirtinger_gradient",
          py::overload_cast<const HermitianFrame&, const VecR&, const VecC&>(&wirtinger_gradient),
          py::arg("frame"), py::arg("y"), py::arg("z"));
    m.def("residual_loss",
          py::overload_cast<const Rank1Frame&, const VecR&, const VecC&>(&residual_loss),
          py::arg("frame"), py::arg("y"), py::arg("z"));
    m.def("residual_loss",
          py::overload_cast<const HermitianFrame&, const VecR&, const VecC&>(&residual_loss),
          py::arg("frame"), py::arg("y"), py::arg("z"));
    m.def("residual_loss",
          py::overload_cast<const HermitianFrame&, const VecR&, const MatC&>(&residual_loss),
          py::arg("frame"), py::arg("y"), py::arg("U"));
    m.def("run_wirtinger_flow",
          py::overload_cast<const Rank1Frame&, const VecR&, const StepRule&, const SolverConfig&>(
              &run_wirtinger_flow),
          py::arg("frame"), py::arg("y"), py::arg("rule") = StepRule::npr_schedule(),
          py::arg("cfg") = SolverConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def("run_wirtinger_flow",
          py::overload_cast<const HermitianFrame&, const VecR&, const StepRule&,
                            const SolverConfig&>(&run_wirtinger_flow),
          py::arg("frame"), py::arg("y"), py::arg("rule") = StepRule::ngpr_fixed(),
          py::arg("cfg") = SolverConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def("run_factored_gd", &run_factored_gd, py::arg("frame"), py::arg("y"), py::arg("r"),
          py::arg("rule") = StepRule::ngpr_fixed(), py::arg("cfg") = SolverConfig{},
          py::call_guard<py::gil_scoped_release>());

    py::class_<OptimalityReport>(m, "OptimalityReport")
        .def_readonly("candidate_loss", &OptimalityReport::candidate_loss)
        .def_readonly("truth_loss", &OptimalityReport::truth_loss)
        .def_readonly("optimal", &OptimalityReport::optimal);
    m.def("inspect_optimality", &inspect_optimality, py::arg("candidate_loss"),
          py::arg("truth_loss"));

    // -------------------------------------------------------------- analysis
    m.def("matrix_distance", py::overload_cast<const VecC&, const VecC&>(&matrix_distance),
          py::arg("x"), py::arg("y"));
    m.def("matrix_distance", py::overload_cast<const MatC&, const MatC&>(&matrix_distance),
          py::arg("U"), py::arg("V"));
    m.def("phase_aligned_distance",
          py::overload_cast<const VecC&, const VecC&>(&phase_aligned_distance), py::arg("xhat"),
          py::arg("x0"));
    m.def("phase_aligned_distance",
          py::overload_cast<const MatC&, const MatC&>(&phase_aligned_distance), py::arg("Uhat"),
          py::arg("U0"));

    py::class_<BoundReport>(m, "BoundReport")
        .def_readonly("rank1_generic", &BoundReport::rank1_generic)
        .def_readonly("rank1_refined", &BoundReport::rank1_refined)
        .def_readonly("hermitian", &BoundReport::hermitian)
        .def_readonly("spikiness", &BoundReport::spikiness);
    m.def("evaluate_bounds", &evaluate_bounds, py::arg("eta"), py::arg("d"));

    py::class_<FrameCheckReport>(m, "FrameCheckReport")
        .def_readonly("mode", &FrameCheckReport::mode)
        .def_readonly("samples", &FrameCheckReport::samples)
        .def_readonly("min_stat", &FrameCheckReport::min_stat)
        .def_readonly("max_stat", &FrameCheckReport::max_stat)
        .def_readonly("min_ratio", &FrameCheckReport::min_ratio)
        .def_readonly("max_ratio", &FrameCheckReport::max_ratio);
    m.def("empirical_frame_check",
          py::overload_cast<const Rank1Frame&, FrameCheckMode, int, int, std::uint64_t>(
              &empirical_frame_check),
          py::arg("frame"), py::arg("mode"), py::arg("r"), py::arg("samples"), py::arg("seed"),
          py::call_guard<py::gil_scoped_release>());
    m.def("empirical_frame_check",
          py::overload_cast<const HermitianFrame&, FrameCheckMode, int, int, std::uint64_t>(
              &empirical_frame_check),
          py::arg("frame"), py::arg("mode"), py::arg("r"), py::arg("samples"), py::arg("seed"),
          py::call_guard<py::gil_scoped_release>());
    m.def("weighted_opnorm_stat", &weighted_opnorm_stat, py::arg("frame"), py::arg("weights"));

    py::class_<SlopeFit>(m, "SlopeFit")
        .def_readonly("slope", &SlopeFit::slope)
        .def_readonly("intercept", &SlopeFit::intercept)
        .def_readonly("r_squared", &SlopeFit::r_squared);
    m.def("fit_log_slope", &fit_log_slope, py::arg("x"), py::arg("y"));

    // --------------------------------------------------------------- harness
    py::class_<ExperimentSpec>(m, "ExperimentSpec")
        .def_readonly("id", &ExperimentSpec::id)
        .def_readonly("model", &ExperimentSpec::model)
        .def_readwrite("n_grid", &ExperimentSpec::n_grid)
        .def_readwrite("trials", &ExperimentSpec::trials)
        .def_readwrite("master_seed", &ExperimentSpec::master_seed)
        .def_property_readonly("variant_labels", [](const ExperimentSpec& s) {
            std::vector<std::string> labels;
            for (const auto& v : s.variants) labels.push_back(v.effective_label());
            return labels;
        });

    py::class_<TrialRecord>(m, "TrialRecord")
        .def_readonly("experiment", &TrialRecord::experiment)
        .def_readonly("n", &TrialRecord::n)
        .def_readonly("d", &TrialRecord::d)
        .def_readonly("noise", &TrialRecord::noise)
        .def_readonly("trial", &TrialRecord::trial)
        .def_readonly("error_d", &TrialRecord::error_d)
        .def_readonly("error_dprime", &TrialRecord::error_dprime)
        .def_readonly("final_loss", &TrialRecord::final_loss)
        .def_readonly("truth_loss", &TrialRecord::truth_loss)
        .def_readonly("optimal", &TrialRecord::optimal)
        .def_readonly("seed", &TrialRecord::seed)
        .def_readonly("wall_time_ms", &TrialRecord::wall_time_ms)
        .def_readonly("bounds", &TrialRecord::bounds)
        .def_readonly("diverged", &TrialRecord::diverged);

    py::class_<SummaryRow>(m, "SummaryRow")
        .def_readonly("experiment", &SummaryRow::experiment)
        .def_readonly("n", &SummaryRow::n)
        .def_readonly("d", &SummaryRow::d)
        .def_readonly("noise", &SummaryRow::noise)
        .def_readonly("trials_requested", &SummaryRow::trials_requested)
        .def_readonly("optimal_count", &SummaryRow::optimal_count)
        .def_readonly("excluded_count", &SummaryRow::excluded_count)
        .def_readonly("valid", &SummaryRow::valid)
        .def_readonly("mean_error_d", &SummaryRow::mean_error_d)
        .def_readonly("mean_error_dprime", &SummaryRow::mean_error_dprime)
        .def_readonly("mean_spikiness", &SummaryRow::mean_spikiness);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("records", &RunResult::records)
        .def_readonly("summaries", &RunResult::summaries)
        .def_readonly("bound_violations", &RunResult::bound_violations)
        .def_readonly("diverged", &RunResult::diverged);

    py::register_exception<DivergenceError>(m, "DivergenceError");

    m.def("preset_names", &preset_names);
    m.def("is_preset", &is_preset, py::arg("name"));
    m.def("load_experiment", &load_experiment, py::arg("source"),
          "Load a preset by name or a JSON config by path.");
    m.def("experiment_signal", &experiment_signal, py::arg("spec"), py::arg("n"), py::arg("d"),
          py::arg("trial"));
    m.def("default_worker_count", &default_worker_count);
    m.def(
        "run_experiment",
        [](const ExperimentSpec& spec, std::optional<int> trials, std::optional<double> scale,
           std::optional<int> workers, bool fast, std::optional<int> n_filter,
           std::optional<std::uint64_t> master_seed) {
            const Overrides ov =
                build_overrides(trials, scale, workers, fast, n_filter, master_seed);
            py::gil_scoped_release release;
            return run_experiment(spec, ov);
        },
        py::arg("spec"), py::arg("trials") = std::nullopt, py::arg("scale") = std::nullopt,
        py::arg("workers") = std::nullopt, py::arg("fast") = false,
        py::arg("n_filter") = std::nullopt, py::arg("master_seed") = std::nullopt);
    m.def("emit_results", &emit_results, py::arg("spec"), py::arg("result"), py::arg("out_dir"));
    m.def("trials_csv", &trials_csv, py::arg("records"));
    m.def("summary_csv", &summary_csv, py::arg("rows"));
    m.def("plot_json", &plot_json, py::arg("spec"), py::arg("result"));
}
