// Command-line front end: `run` executes a method x seed experiment grid,
// `measure` sweeps the projected-variance comparison, `verify` runs the
// analytical property suites.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cnc/config.hpp"
#include "cnc/csv.hpp"
#include "cnc/harness.hpp"
#include "cnc/verify.hpp"

namespace {

cnc::ExperimentConfig load_config(const std::string& config_path, const std::string& preset,
                                  const std::string& out_override,
                                  const std::vector<std::uint64_t>& seeds_override) {
  cnc::ExperimentConfig cfg;
  if (!preset.empty()) {
    cfg = cnc::config_from_preset(preset);
  } else if (!config_path.empty()) {
    cfg = cnc::parse_config(cnc::read_file(config_path));
  } else {
    throw cnc::ValidationError("need --config <path> or --preset <name>");
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (!seeds_override.empty()) cfg.seeds = seeds_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saddle-escape optimization benchmark"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir;
  std::vector<std::uint64_t> seeds;

  CLI::App* run = app.add_subcommand("run", "run an experiment grid, emit trajectory + summary CSV");
  run->add_option("--config", config_path, "config document path");
  run->add_option("--preset", preset, "named preset (halfspaces-appendix-e)");
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--seeds", seeds, "seed list (overrides config)")->delimiter(',');

  CLI::App* measure = app.add_subcommand("measure", "projected-variance measurement sweep");
  measure->add_option("--config", config_path, "config document path");
  measure->add_option("--preset", preset, "named preset");
  measure->add_option("--out", out_dir, "output directory (overrides config)");

  CLI::App* verify = app.add_subcommand("verify", "run the analytical property suites");
  verify->add_option("--out", out_dir, "scratch directory for the experiment-level checks");
  bool full = false;
  verify->add_flag("--full", full, "include the experiment reproduction and determinism checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      cnc::ExperimentConfig cfg = load_config(config_path, preset, out_dir, seeds);
      cnc::ExperimentResult res = cnc::run_experiment(cfg);
      std::printf("wrote %zu trajectory files + summary.csv to %s\n", res.cells.size(),
                  cfg.out_dir.c_str());
      std::printf("f(w0)=%s drop_threshold=%s resamples=%d\n", cnc::fmt_double(res.f0).c_str(),
                  cnc::fmt_double(res.drop_threshold).c_str(), res.resamples_used);
      for (const cnc::SummaryRow& row : res.summary) {
        std::printf("  %-8s seed=%llu escape=%s f=%s [%s]\n", row.method.c_str(),
                    static_cast<unsigned long long>(row.seed),
                    row.escape_iteration ? std::to_string(*row.escape_iteration).c_str() : "-",
                    cnc::fmt_double(row.final_f).c_str(), row.status.c_str());
      }
      return 0;
    }
    if (measure->parsed()) {
      cnc::ExperimentConfig cfg = load_config(config_path, preset, out_dir, {});
      cnc::MeasureResult res = cnc::run_cnc_measurement(cfg);
      std::printf("wrote measure.csv to %s (%zu rows)\n", cfg.out_dir.c_str(), res.rows.size());
      std::printf("slope_isotropic=%s slope_cnc=%s\n", cnc::fmt_double(res.slope_isotropic).c_str(),
                  cnc::fmt_double(res.slope_cnc).c_str());
      return 0;
    }
    if (verify->parsed()) {
      std::string scratch = out_dir.empty() ? "verify-out" : out_dir;
      std::vector<cnc::VerifyResult> results =
          full ? cnc::verify::run_all(scratch) : cnc::verify::run_property_suites();
      bool all = true;
      for (const cnc::VerifyResult& r : results) {
        std::printf("[%s] %-55s (%.2fs) %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                    r.detail.c_str());
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
  } catch (const cnc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
