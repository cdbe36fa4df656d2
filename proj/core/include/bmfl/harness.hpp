#pragma once

// Experiment configuration, sweep/replication runner, CSV output and summary
// statistics.
//
// Config files are flat `key = value` statements, one per line or separated
// by `;`, with `#` comments and comma-separated lists. An empty file gives
// the default scenario.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bmfl/baselines.hpp"
#include "bmfl/deepq.hpp"
#include "bmfl/federation.hpp"
#include "bmfl/network.hpp"
#include "bmfl/types.hpp"

namespace bmfl {

enum class SweepVar { None, SinrThreshold, UserDensity, MsbsDensity, LearningRate };

std::string_view to_string(SweepVar v);

struct ExperimentConfig {
  Scenario scenario;  // msbs list is built by build_scenario
  int msbsCount = 3;
  Placement placement = Placement::Uniform;
  int sectors = 8;
  int beams = 3;
  double coverageRadius = 50.0;

  Hyperparams hp;
  bool localStepSet = false;  // otherwise lambda follows the learning rate
  FederationConfig fed;

  std::vector<SchemeId> schemes{SchemeId::BMFL};
  SweepVar sweep = SweepVar::None;
  std::vector<double> values;
  int replications = 10;
  std::uint64_t seed = 1;
  int evalSlots = 20;
  std::uint64_t bfsBudget = kDefaultBfsBudget;
  std::uint64_t bmclActionBudget = kDefaultBmclActionBudget;
  int threads = 1;
  std::string output = "out";

  void validate() const;
};

// Throws ParseError (with the line number), UnknownKey or RangeError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Every key with its resolved value, in a form parse_config accepts.
std::string format_config(const ExperimentConfig& cfg);

struct RunPoint {
  Scenario scenario;
  Hyperparams hp;
};

// Applies one sweep value and the replication seed to the base config.
RunPoint build_point(const ExperimentConfig& cfg, double sweepValue, std::uint64_t seed);

struct MetricsRow {
  std::string scheme;
  double sweepValue = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
  double coverageFraction = 0.0;
  double throughputBps = 0.0;
  double meanLossFinal = 0.0;
  std::int64_t envSlots = 0;
  std::int64_t complexityEstimate = 0;
  double wallTimeMs = 0.0;  // written to timing.csv only
};

struct RunRecord {
  MetricsRow row;
  SchemeOutcome outcome;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;  // job order: value, replication, scheme
};

using ProgressFn = std::function<void(const MetricsRow&)>;

// Runs every (sweep value, replication, scheme) job; with threads > 1 jobs run
// concurrently but results keep job order. On failure the completed prefix
// of jobs is moved into `partial` (if given) before the error propagates.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {},
                                ExperimentResult* partial = nullptr);

// metrics.csv, timing.csv, eval_slots.csv, loss_trace.csv (when any scheme
// trained) and config_resolved.txt under `dir`.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res,
                   const std::filesystem::path& dir);

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& is);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct SummaryRow {
  std::string scheme;
  double sweepValue = 0.0;
  int n = 0;
  double coverageMean = 0.0, coverageSd = 0.0;
  double throughputMean = 0.0, throughputSd = 0.0;
  double lossMean = 0.0, lossSd = 0.0;  // NaN when no row trained
};

// Mean and sample standard deviation per (scheme, sweepValue), groups in
// first-appearance order. Throws EmptyInput.
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);
void write_summary_text(std::ostream& os, const std::vector<SummaryRow>& rows);

// Shortest round-trip-safe decimal form used in every CSV.
std::string format_number(double v);

}  // namespace bmfl
