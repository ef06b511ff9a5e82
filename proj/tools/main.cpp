#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "impact_qlbs/csv.hpp"
#include "impact_qlbs/harness.hpp"

namespace {

using namespace impact_qlbs;

struct CommonOpts {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string out;
  int threads = 1;
  bool skip_failed = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_config) {
  if (with_config)
    cmd->add_option("--config", opts.config_file, "JSON config file (fields mirror the schema)");
  cmd->add_option("--seed", opts.seed, "root seed (overrides config and IMPACT_QLBS_SEED)");
  cmd->add_option("--runs", opts.runs, "number of runs");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--threads", opts.threads, "worker threads; results do not depend on this");
  cmd->add_flag("--skip-failed", opts.skip_failed, "record failed runs instead of aborting");
}

ExperimentConfig build_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_file.empty()) cfg = load_config_file(opts.config_file);
  apply_env_seed(cfg);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.runs) cfg.n_runs = *opts.runs;
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  cfg.validate();
  return cfg;
}

void print_batch_summary(const BatchReport& batch, const std::filesystem::path& dir) {
  std::printf("runs=%zu failed=%zu mse=%.12g avg_Lp=%.12g avg_Lstar=%.12g (wall %.2fs)\n",
              batch.runs.size(), batch.failures.size(), batch.mse, batch.avg_cost_postulated,
              batch.avg_cost_optimal, batch.wall_seconds);
  std::printf("report written to %s\n", dir.string().c_str());
}

int run_single_or_batch(const CommonOpts& opts, bool single) {
  ExperimentConfig cfg = build_config(opts);
  if (single) cfg.n_runs = 1;
  RunArtifacts artifacts;
  const BatchReport batch =
      run_batch(cfg, BatchOptions{opts.threads, opts.skip_failed}, &artifacts);
  const std::filesystem::path dir = cfg.output_dir;
  emit_report(batch, dir, &artifacts);
  print_batch_summary(batch, dir);
  return 0;
}

int run_preset(const std::string& name, const CommonOpts& opts,
               const std::vector<double>& u_range) {
  std::vector<PresetRow> rows = preset_rows(name);
  for (PresetRow& row : rows) {
    apply_env_seed(row.config);
    if (opts.seed) row.config.seed = *opts.seed;
    if (opts.runs) row.config.n_runs = *opts.runs;
    if (u_range.size() == 2) row.config.strategy_range = {u_range[0], u_range[1]};
    row.config.validate();
  }
  const std::filesystem::path base = opts.out.empty() ? name : opts.out;
  std::filesystem::create_directories(base);

  std::ofstream summary(base / "summary.csv");
  if (!summary) throw ConfigError("cannot open for writing: " + (base / "summary.csv").string());
  summary << "label,u_lo,u_hi,m_lo,m_hi,beta_lo,beta_hi,mse,avg_Lp,avg_Lstar\n";

  std::printf("%-16s %-16s %-16s %-16s\n", "row", "MSE", "avg L^p", "avg L^*");
  for (const PresetRow& row : rows) {
    RunArtifacts artifacts;
    const BatchReport batch =
        run_batch(row.config, BatchOptions{opts.threads, opts.skip_failed}, &artifacts);
    emit_report(batch, base / row.label, &artifacts);
    const ExperimentConfig& c = row.config;
    summary << row.label << ',' << csv::format_full(c.strategy_range.lo) << ','
            << csv::format_full(c.strategy_range.hi) << ',' << csv::format_full(c.m_range.lo)
            << ',' << csv::format_full(c.m_range.hi) << ',' << csv::format_full(c.beta_range.lo)
            << ',' << csv::format_full(c.beta_range.hi) << ',' << csv::format_full(batch.mse)
            << ',' << csv::format_full(batch.avg_cost_postulated) << ','
            << csv::format_full(batch.avg_cost_optimal) << '\n';
    std::printf("%-16s %-16.10g %-16.12g %-16.12g\n", row.label.c_str(), batch.mse,
                batch.avg_cost_postulated, batch.avg_cost_optimal);
  }
  std::printf("summary written to %s\n", (base / "summary.csv").string().c_str());
  return 0;
}

int run_validate() {
  const std::vector<CheckResult> checks = run_validation();
  int failed = 0;
  for (const CheckResult& c : checks) {
    std::printf("[%s] %s%s%s\n", c.passed ? "ok" : "FAIL", c.name.c_str(),
                c.detail.empty() ? "" : " -- ", c.detail.c_str());
    if (!c.passed) ++failed;
  }
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Monte Carlo pricing and hedging of FX put options for a large trader "
      "whose orders permanently move the quoted rate"};
  app.require_subcommand(1);

  CommonOpts run_opts, batch_opts;
  CLI::App* cmd_run = app.add_subcommand("run", "single seeded experiment");
  add_common(cmd_run, run_opts, true);
  CLI::App* cmd_batch = app.add_subcommand("batch", "n_runs independent experiments");
  add_common(cmd_batch, batch_opts, true);

  struct Preset {
    CommonOpts opts;
    std::vector<double> u_range;
  };
  std::map<std::string, Preset> presets;
  for (const char* name : {"table2", "table3", "table4", "table5"}) {
    CLI::App* cmd = app.add_subcommand(
        name, std::string("preset sweep reproducing the ") + name + " experiment");
    Preset& p = presets[name];
    add_common(cmd, p.opts, false);
    cmd->add_option("--u-range", p.u_range, "override the postulated strategy range")
        ->expected(2);
  }

  CLI::App* cmd_validate = app.add_subcommand("validate", "invariant suite on a tiny instance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_run->parsed()) return run_single_or_batch(run_opts, true);
    if (cmd_batch->parsed()) return run_single_or_batch(batch_opts, false);
    for (auto& [name, preset] : presets)
      if (app.get_subcommand(name)->parsed()) return run_preset(name, preset.opts, preset.u_range);
    if (cmd_validate->parsed()) return run_validate();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const ModelError& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
