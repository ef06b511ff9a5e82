#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "impact_qlbs/fqi.hpp"

namespace impact_qlbs {

/// Half-open interval [lo, hi); lo == hi denotes the constant lo.
struct Range {
  double lo = 0;
  double hi = 0;
};

struct ExperimentConfig {
  MarketParams market;
  Range strategy_range{-1.0, 1.0};
  Range m_range{0.01, 0.03};
  Range beta_range{0.0, 1.0};
  double kappa = 0.01;
  double lambda = 0.001;
  int n_basis = 12;
  int degree = 3;
  double ridge = 1e-3;
  Range action_bounds{-5.0, 5.0};
  int n_runs = 50;
  std::uint64_t seed = 12345;
  NonPositivePolicy on_nonpositive = NonPositivePolicy::error;
  bool share_across_paths = false;  // collapse beta/M sampling to per-time only
  std::string output_dir = "out";
  int n_plot_paths = 10;

  void validate() const;  // throws ConfigError with field names
};

/// Strict JSON parsing: unknown keys and type mismatches are reported with
/// their field path. Missing fields keep their defaults.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config_file(const std::filesystem::path& file);

/// IMPACT_QLBS_SEED, when set, overrides the config seed.
void apply_env_seed(ExperimentConfig& config);

struct RunReport {
  int run_index = 0;
  std::uint64_t seed_used = 0;
  double fair_price = 0;
  double qlbs_price = 0;
  double squared_error = 0;
  double mean_cost_postulated = 0;  // L^p
  double mean_cost_optimal = 0;     // L^*
  double terminal_variance = 0;     // Var[Pi_T], diagnostic
  double price_q0_diagnostic = 0;   // -mean_k Q_0(S_0, a*_0); informational only
  std::size_t concavity_violations = 0;
  std::size_t dropped_paths = 0;
};

/// Per-run path matrices kept for plot emission.
struct RunArtifacts {
  PathMatrix unaffected;
  PathMatrix quoted;
  PathMatrix implied;
  std::vector<Eigen::Index> implied_rows;  // row ids of `implied` within the run
  bool captured = false;
};

/// Full pipeline for one seeded run: simulate, impact-propagate, build the
/// dataset, fit, roll out the optimal strategy and summarize.
RunReport run_experiment(const ExperimentConfig& config, std::uint64_t run_seed,
                         RunArtifacts* capture = nullptr);

struct BatchFailure {
  int run_index = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct BatchReport {
  ExperimentConfig config;
  std::vector<RunReport> runs;
  std::vector<BatchFailure> failures;
  double mse = 0;
  double avg_cost_postulated = 0;
  double avg_cost_optimal = 0;
  double wall_seconds = 0;  // console diagnostic; never written to report files
};

struct BatchOptions {
  int threads = 1;
  bool skip_failed = false;
};

/// n_runs independent experiments with seeds derived from (config.seed, run
/// index). Results are identical for any thread count. By default the first
/// failure aborts the batch; with skip_failed it is recorded instead.
BatchReport run_batch(const ExperimentConfig& config, const BatchOptions& options = {},
                      RunArtifacts* capture = nullptr);

/// Writes report.json, runs.csv, costs.csv and (when artifacts are present)
/// paths_sample.csv into dir. Re-running with the same inputs produces
/// byte-identical files.
void emit_report(const BatchReport& batch, const std::filesystem::path& dir,
                 const RunArtifacts* artifacts = nullptr);

struct PresetRow {
  std::string label;
  ExperimentConfig config;
};

/// Preset sweeps: "table2"/"table3" vary the thinness range, "table4" the
/// strategy range, "table5" the impact-parameter range.
std::vector<PresetRow> preset_rows(const std::string& table_name);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant suite on tiny instances; backs the `validate` subcommand.
std::vector<CheckResult> run_validation();

}  // namespace impact_qlbs
