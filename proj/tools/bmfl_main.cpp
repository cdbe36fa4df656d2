// bmfl: run single experiments or sweeps, summarize metrics, and check the
// Q-network gradients.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "bmfl/baselines.hpp"
#include "bmfl/deepq.hpp"
#include "bmfl/error.hpp"
#include "bmfl/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config;
  std::string scheme;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> replications;
  std::optional<int> threads;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config", o.config, "config file (key = value)")->check(CLI::ExistingFile);
  app->add_option("--scheme", o.scheme, "scheme or comma list: BMFL,BFS,EDB,BMDL,BMCL");
  app->add_option("--seed", o.seed, "base seed (overrides the config)");
  app->add_option("--out", o.out, "output directory (overrides the config)");
  app->add_option("--replications", o.replications, "replications per point");
  app->add_option("--threads", o.threads, "parallel jobs");
  app->add_flag("-q,--quiet", o.quiet, "no per-run progress lines");
}

bmfl::ExperimentConfig resolve(const CommonOpts& o) {
  bmfl::ExperimentConfig cfg = o.config.empty() ? bmfl::parse_config("") : bmfl::load_config(o.config);
  std::string overrides;
  if (!o.scheme.empty()) overrides += "scheme = " + o.scheme + "\n";
  if (!overrides.empty()) {
    // Reuse the config grammar so scheme names are validated the same way.
    const auto extra = bmfl::parse_config(overrides);
    cfg.schemes = extra.schemes;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output = o.out;
  if (o.replications) cfg.replications = *o.replications;
  if (o.threads) cfg.threads = *o.threads;
  cfg.validate();
  return cfg;
}

int execute(const bmfl::ExperimentConfig& cfg, bool quiet) {
  const auto progress = [quiet](const bmfl::MetricsRow& r) {
    if (quiet) return;
    std::cerr << r.scheme << " value=" << bmfl::format_number(r.sweepValue) << " rep=" << r.replication
              << " cov=" << bmfl::format_number(r.coverageFraction)
              << " thr=" << bmfl::format_number(r.throughputBps / 1e6) << " Mbit/s"
              << " (" << static_cast<long>(r.wallTimeMs) << " ms)\n";
  };
  bmfl::ExperimentResult res;
  try {
    res = bmfl::run_experiment(cfg, progress, &res);
  } catch (...) {
    if (!res.runs.empty()) bmfl::write_outputs(cfg, res, cfg.output);
    throw;
  }
  bmfl::write_outputs(cfg, res, cfg.output);
  std::vector<bmfl::MetricsRow> rows;
  for (const auto& r : res.runs) rows.push_back(r.row);
  const auto summary = bmfl::summarize(rows);
  bmfl::write_summary_text(std::cout, summary);
  std::ofstream os(fs::path(cfg.output) / "summary.csv", std::ios::binary);
  bmfl::write_summary_csv(os, summary);
  const auto& first = res.runs.front().row;
  std::cout << "complexity estimate J(BU+tau) = " << first.complexityEstimate
            << ", simulated slots per run = " << first.envSlots << "\n";
  std::cout << "wrote " << (fs::path(cfg.output) / "metrics.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated beam management simulator"};
  app.require_subcommand(1);

  CommonOpts runOpts;
  auto* run = app.add_subcommand("run", "run one configuration (sweep settings ignored)");
  add_common(run, runOpts);

  CommonOpts sweepOpts;
  std::string sweepVar;
  std::vector<double> sweepValues;
  auto* sweep = app.add_subcommand("sweep", "run the configured sweep grid");
  add_common(sweep, sweepOpts);
  sweep->add_option("--sweep", sweepVar, "sinrThreshold|userDensity|msbsDensity|learningRate");
  sweep->add_option("--values", sweepValues, "sweep values")->delimiter(',');

  std::string summaryIn;
  std::string summaryOut;
  auto* summarize = app.add_subcommand("summarize", "mean and sd per (scheme, sweep value)");
  summarize->add_option("input", summaryIn, "metrics.csv or a directory containing it")->required();
  summarize->add_option("--out", summaryOut, "write the summary CSV here");

  int draws = 20;
  std::uint64_t gradSeed = 1;
  double tolerance = 1e-4;
  auto* grads = app.add_subcommand("check-gradients", "backprop vs central finite differences");
  grads->add_option("--draws", draws, "random networks to check")->check(CLI::PositiveNumber);
  grads->add_option("--seed", gradSeed, "seed");
  grads->add_option("--tolerance", tolerance, "max relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = resolve(runOpts);
      cfg.sweep = bmfl::SweepVar::None;
      cfg.values.clear();
      return execute(cfg, runOpts.quiet);
    }
    if (*sweep) {
      auto cfg = resolve(sweepOpts);
      std::string extra;
      if (!sweepVar.empty()) extra += "sweep = " + sweepVar + "\n";
      if (!extra.empty()) cfg.sweep = bmfl::parse_config(extra + "values = 0").sweep;
      if (!sweepValues.empty()) cfg.values = sweepValues;
      if (cfg.sweep == bmfl::SweepVar::None) {
        std::cerr << "error: no sweep variable (set `sweep` in the config or pass --sweep)\n";
        return 2;
      }
      cfg.validate();
      return execute(cfg, sweepOpts.quiet);
    }
    if (*summarize) {
      fs::path in = summaryIn;
      if (fs::is_directory(in)) in /= "metrics.csv";
      const auto rows = bmfl::summarize(bmfl::read_metrics_csv(in));
      bmfl::write_summary_text(std::cout, rows);
      if (!summaryOut.empty()) {
        std::ofstream os(summaryOut, std::ios::binary);
        if (!os) throw bmfl::Error(bmfl::ErrorCode::IoError, "cannot write " + summaryOut);
        bmfl::write_summary_csv(os, rows);
      }
      return 0;
    }
    if (*grads) {
      const auto rep = bmfl::check_gradients(draws, gradSeed);
      std::cout << "draws=" << rep.draws << " parameters=" << rep.parameters
                << " max_rel_error=" << rep.maxRelError << "\n";
      const bool ok = rep.maxRelError < tolerance;
      std::cout << (ok ? "OK" : "FAILED") << "\n";
      return ok ? 0 : 1;
    }
  } catch (const bmfl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
