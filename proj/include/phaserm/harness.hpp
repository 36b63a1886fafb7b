#pragma once

// Declarative experiment presets, seeded parallel trial execution, and
// CSV/JSON result emission.
//
// Seeding contract: every random object in a trial comes from a stream whose
// seed is derive_seed(master_seed, tag, n, trial) with tags
//   "frame"  - measurement frame draws
//   "signal" - ground-truth signal (fixed-signal experiments use (0, 0))
//   "noise"  - noise vector draws
//   "ncov"   - correlated-noise covariance factor
//   "init"   - solver power-iteration start
//   "trial"  - the identifying seed recorded in the trial record
// None of the tags involve the noise-variant index, so all variants of an
// experiment see identical frames/signals/starts at a given (n, trial):
// curves that the theory predicts to coincide are compared on paired draws.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phaserm/analysis.hpp"
#include "phaserm/ensembles.hpp"
#include "phaserm/forward_model.hpp"
#include "phaserm/noise.hpp"
#include "phaserm/solver.hpp"

namespace phaserm {

// Horizontal axis the result curves are intended to be plotted against.
enum class Axis { invsqrt_n, inv_n, n };

std::string axis_name(Axis a);
Axis parse_axis(const std::string& name);

// Reference curve y = coefficient * n^exponent drawn alongside the data.
struct TheoryCurve {
    std::string label;
    double coefficient = 1.0;
    double exponent = -0.5;
};

// How the signal dimension d depends on n.
struct DRule {
    enum class Kind { fixed, ratio };
    Kind kind = Kind::fixed;
    int value = 1;  // fixed: d = value; ratio: d = n / value (must divide)

    static DRule fixed(int d) { return {Kind::fixed, d}; }
    static DRule ratio(int c) { return {Kind::ratio, c}; }
    int resolve(int n) const;
};

// Truncation policy for a noise variant.
struct TauRule {
    enum class Kind { none, fixed_value, recommended };
    Kind kind = Kind::none;
    double value = 0.0;  // fixed_value
    double c = 2.8;      // recommended: tau = c * (n/d)^{1/(2l)}
    double l = 2.45;

    static TauRule none() { return {}; }
    static TauRule fixed_value(double v);
    static TauRule recommended(double c, double l = 2.45);
    double resolve(int n, int d, Model model) const;
    // Suffix appended to the noise label: "", "|tau=auto", "|tau=<value>".
    std::string label_suffix() const;
};

struct NoiseVariant {
    NoiseSpec noise;
    TauRule tau;
    std::optional<DRule> d_override;  // for variants that change the d rule
    std::string label;                // defaults to noise.encode() + tau suffix

    std::string effective_label() const;
};

struct EnsembleSpec {
    // Rank-one frames: scalar entry distribution.
    ScalarDist dist = ScalarDist::gaussian();
    // Hermitian frames: identity covariance unless a random-spectrum
    // covariance on [lambda0, lambda1] is requested (drawn once per
    // experiment from the master seed, tag "fcov").
    bool random_spectrum_cov = false;
    double lambda0 = 0.4;
    double lambda1 = 2.5;
};

struct ExperimentSpec {
    std::string id;
    Model model = Model::npr;
    int rank = 1;  // rank_r only
    std::vector<int> n_grid;
    DRule d_rule = DRule::fixed(30);
    int d_cap = 0;  // 0 = none; fast profile caps Hermitian-frame d
    SignalKind signal = SignalKind::uniform_sphere;
    bool fixed_signal = false;  // one signal shared by every (n, trial)
    std::vector<NoiseVariant> variants;
    EnsembleSpec ensemble;
    SolverConfig solver;
    int trials = 100;
    std::uint64_t master_seed = 42;
    Axis axis = Axis::invsqrt_n;
    std::vector<TheoryCurve> theory;

    int resolve_d(int n, const NoiseVariant& variant) const;
};

struct Overrides {
    std::optional<int> trials;
    std::optional<double> scale;  // multiplies every n in the grid
    std::optional<int> workers;
    bool fast = false;  // trials <= 20, first 5 grid points, Hermitian d <= 20
    std::optional<int> n_filter;  // keep only this n (after scaling)
    std::optional<std::uint64_t> master_seed;
};

// Spec with trials/scale/fast/n_filter/master_seed overrides applied.
ExperimentSpec apply_overrides(const ExperimentSpec& spec, const Overrides& ov);

std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
// `source` is a preset name or a path to a JSON config mirroring the
// ExperimentSpec field names.
ExperimentSpec load_experiment(const std::string& source);

struct TrialRecord {
    std::string experiment;
    int n = 0;
    int d = 0;
    std::string noise;  // variant label
    int trial = 0;
    double error_d = 0.0;
    double error_dprime = 0.0;
    double final_loss = 0.0;
    double truth_loss = 0.0;
    bool optimal = false;
    std::uint64_t seed = 0;
    double wall_time_ms = 0.0;
    // Not serialized into trials.csv; aggregated into summary rows and the
    // bound-ordering audit.
    BoundReport bounds;
    bool diverged = false;
};

struct SummaryRow {
    std::string experiment;
    int n = 0;
    int d = 0;
    std::string noise;
    int trials_requested = 0;
    int optimal_count = 0;
    int excluded_count = 0;
    bool valid = false;        // false when every trial was excluded
    double mean_error_d = 0.0;       // over optimal trials only
    double mean_error_dprime = 0.0;  // over optimal trials only
    // Bound statistics averaged over all trials (they depend on eta only).
    double mean_bound_rank1_generic = 0.0;
    double mean_bound_rank1_refined = 0.0;
    double mean_bound_hermitian = 0.0;
    double mean_spikiness = 0.0;
};

struct RunResult {
    std::vector<TrialRecord> records;  // sorted by (n, noise, trial)
    std::vector<SummaryRow> summaries;
    // Count of trials with n >= d where the Hermitian-model bound exceeded
    // min(rank1 bounds); the ordering is provable, so this should stay 0.
    int bound_violations = 0;
    int diverged = 0;
};

// Raised when a trial diverges; carries everything recorded up to the point
// the run finished (remaining trials still execute so the result is complete).
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(std::string msg, RunResult result)
        : std::runtime_error(std::move(msg)), result_(std::move(result)) {}
    const RunResult& result() const { return result_; }

  private:
    RunResult result_;
};

// Number of workers: explicit override > PHASERM_WORKERS env > hardware
// concurrency (at least 1).
int default_worker_count();

// The ground-truth signal a given (n, trial) cell sees (fixed-signal
// experiments return the same vector for every cell). Exposed so external
// analyses can recompute metrics against the truth.
VecC experiment_signal(const ExperimentSpec& spec, int n, int d, int trial);

RunResult run_experiment(const ExperimentSpec& spec, const Overrides& overrides = {});

// Writes trials.csv, summary.csv, and plot_<id>.json under out_dir.
// trials.csv header (exact):
//   experiment,n,d,noise,trial,error_d,error_dprime,final_loss,truth_loss,optimal,seed,wall_time_ms
void emit_results(const ExperimentSpec& spec, const RunResult& result, const std::string& out_dir);

// CSV encodings shared with tests (full-precision doubles, quoted labels).
std::string trials_csv(const std::vector<TrialRecord>& records);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string plot_json(const ExperimentSpec& spec, const RunResult& result);

}  // namespace phaserm
