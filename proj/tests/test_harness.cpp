#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bmfl/error.hpp"
#include "bmfl/harness.hpp"

namespace bmfl {
namespace {

namespace fs = std::filesystem;

ErrorCode parse_error_code(const std::string& text, std::string* msg = nullptr) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::IoError;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Harness, EmptyConfigIsTheDefaultScenario) {
  const auto cfg = parse_config("");
  EXPECT_EQ(cfg.msbsCount, 3);
  EXPECT_EQ(cfg.scenario.users, 12);
  EXPECT_EQ(cfg.scenario.sinrThresholdDb, -20.0);
  EXPECT_EQ(cfg.fed.rounds, 50);
  EXPECT_EQ(cfg.fed.slotsPerRound, 10);
  EXPECT_EQ(cfg.hp.alpha, 0.1);
  EXPECT_EQ(cfg.hp.lambda, 0.1);
  EXPECT_EQ(cfg.replications, 10);
  ASSERT_EQ(cfg.schemes.size(), 1u);
  EXPECT_EQ(cfg.schemes[0], SchemeId::BMFL);
}

TEST(Harness, ParsesStatementsCommentsAndLists) {
  const auto cfg = parse_config(
      "# scenario\n"
      "users = 20 ; msbs_count = 4   # trailing comment\n"
      "interference = full\n"
      "scheme = bfs, EDB,bmfl\n"
      "sweep = sinrThreshold ; values = -24,-16,-8\n"
      "learning_rate = 0.3\n");
  EXPECT_EQ(cfg.scenario.users, 20);
  EXPECT_EQ(cfg.msbsCount, 4);
  EXPECT_EQ(cfg.scenario.interference, InterferenceMode::Full);
  EXPECT_EQ(cfg.schemes, (std::vector<SchemeId>{SchemeId::BFS, SchemeId::EDB, SchemeId::BMFL}));
  EXPECT_EQ(cfg.sweep, SweepVar::SinrThreshold);
  EXPECT_EQ(cfg.values, (std::vector<double>{-24, -16, -8}));
  EXPECT_EQ(cfg.hp.lambda, 0.3);  // follows the learning rate
  EXPECT_EQ(parse_config("learning_rate = 0.3\nlocal_step = 0.05").hp.lambda, 0.05);
}

TEST(Harness, ConfigErrors) {
  std::string msg;
  EXPECT_EQ(parse_error_code("users = 12\nbogus = 1\n", &msg), ErrorCode::UnknownKey);
  EXPECT_NE(msg.find("line 2"), std::string::npos);
  EXPECT_EQ(parse_error_code("\n\nusers = twelve", &msg), ErrorCode::ParseError);
  EXPECT_NE(msg.find("line 3"), std::string::npos);
  EXPECT_EQ(parse_error_code("users"), ErrorCode::ParseError);
  EXPECT_EQ(parse_error_code("users ="), ErrorCode::ParseError);
  EXPECT_EQ(parse_error_code("interference = sometimes"), ErrorCode::ParseError);
  EXPECT_EQ(parse_error_code("scheme = BMFL,XYZ"), ErrorCode::ParseError);
  EXPECT_EQ(parse_error_code("users = 0"), ErrorCode::RangeError);
  EXPECT_EQ(parse_error_code("beams = 9"), ErrorCode::RangeError);
  EXPECT_EQ(parse_error_code("eta = 1.5"), ErrorCode::RangeError);
  EXPECT_EQ(parse_error_code("sweep = userDensity"), ErrorCode::RangeError);
  EXPECT_THROW(load_config("/nonexistent/config.txt"), Error);
}

TEST(Harness, FormatConfigRoundTrips) {
  const auto cfg = parse_config("users = 7; sectors = 5; beams = 2; scheme = BFS,EDB; reward_scale = 1e-12");
  const auto text = format_config(cfg);
  EXPECT_EQ(format_config(parse_config(text)), text);
}

TEST(Harness, BuildPointAppliesSweepValues) {
  auto cfg = parse_config("sweep = userDensity; values = 3000");
  EXPECT_EQ(build_point(cfg, 3000, 1).scenario.users, 30);
  EXPECT_EQ(build_point(cfg, 600, 1).scenario.users, 6);
  cfg = parse_config("sweep = msbsDensity; values = 600");
  EXPECT_EQ(build_point(cfg, 600, 1).scenario.msbsCount(), 6);
  cfg = parse_config("sweep = sinrThreshold; values = -8");
  EXPECT_EQ(build_point(cfg, -8, 1).scenario.sinrThresholdDb, -8.0);
  cfg = parse_config("sweep = learningRate; values = 0.03");
  const auto p = build_point(cfg, 0.03, 1);
  EXPECT_EQ(p.hp.alpha, 0.03);
  EXPECT_EQ(p.hp.lambda, 0.03);
  EXPECT_EQ(build_point(cfg, 0.03, 17).scenario.seed, 17u);
  EXPECT_THROW(build_point(parse_config("sweep = userDensity; values = 1"), 1, 1), Error);
}

TEST(Harness, FormatNumberIsShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(3.0), "3");
  EXPECT_EQ(format_number(-24.0), "-24");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(Harness, MetricsCsvHeaderAndRoundTrip) {
  std::vector<MetricsRow> rows(2);
  rows[0] = MetricsRow{"BMFL", 1200, 0, 1, 0.25, 3.5e11, 0.125, 520, 4100, 12.0};
  rows[1] = MetricsRow{"BFS", 1200, 1, 2, 0.5, 4e11, std::nan(""), 520, 4100, 3.0};
  std::ostringstream os;
  write_metrics_csv(os, rows);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "scheme,sweepValue,replication,seed,coverageFraction,throughputBps,meanLossFinal,envSlots,"
            "complexityEstimate");
  EXPECT_EQ(text.find("wallTime"), std::string::npos);
  std::istringstream is(text);
  const auto back = read_metrics_csv(is);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].scheme, "BMFL");
  EXPECT_EQ(back[0].throughputBps, 3.5e11);
  EXPECT_EQ(back[1].seed, 2u);
  EXPECT_TRUE(std::isnan(back[1].meanLossFinal));
  std::istringstream bad("not,a,header\n");
  EXPECT_THROW(read_metrics_csv(bad), Error);
}

TEST(Harness, SummaryMeanAndSampleSd) {
  std::vector<MetricsRow> rows;
  for (double c : {0.2, 0.4, 0.6}) rows.push_back(MetricsRow{"EDB", 0, 0, 0, c, c * 10, std::nan(""), 0, 0, 0});
  rows.push_back(MetricsRow{"BMFL", 0, 0, 0, 0.5, 5, 1.0, 0, 0, 0});
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].scheme, "EDB");
  EXPECT_EQ(s[0].n, 3);
  EXPECT_NEAR(s[0].coverageMean, 0.4, 1e-15);
  EXPECT_NEAR(s[0].coverageSd, 0.2, 1e-15);
  EXPECT_NEAR(s[0].throughputSd, 2.0, 1e-14);
  EXPECT_TRUE(std::isnan(s[0].lossMean));
  EXPECT_EQ(s[1].n, 1);
  EXPECT_EQ(s[1].coverageSd, 0.0);
  EXPECT_EQ(s[1].lossMean, 1.0);
  EXPECT_THROW(summarize({}), Error);
  std::ostringstream os;
  write_summary_csv(os, s);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "scheme,sweepValue,n,coverageMean,coverageSd,throughputMean,throughputSd,lossMean,lossSd");
}

ExperimentConfig tiny(const std::string& extra = "") {
  return parse_config("users = 6; msbs_count = 2; sectors = 4; beams = 1; rounds = 2; eval_slots = 3;"
                      "replications = 2; scheme = BMFL,BFS,EDB,BMDL,BMCL\n" + extra);
}

TEST(Harness, RunExperimentKeepsJobOrder) {
  const auto cfg = tiny("sweep = sinrThreshold; values = -20,-8");
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.runs.size(), 2u * 2u * 5u);
  EXPECT_EQ(res.runs[0].row.scheme, "BMFL");
  EXPECT_EQ(res.runs[4].row.scheme, "BMCL");
  EXPECT_EQ(res.runs[5].row.replication, 1);
  EXPECT_EQ(res.runs[10].row.sweepValue, -8.0);
  EXPECT_EQ(res.runs[5].row.seed, cfg.seed + 1);
  for (const auto& r : res.runs) EXPECT_EQ(r.row.envSlots, 2 * 10 + 3);
}

TEST(Harness, ThreadedRunMatchesSerialRun) {
  auto cfg = tiny();
  const auto a = run_experiment(cfg);
  cfg.threads = 3;
  const auto b = run_experiment(cfg);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].row.scheme, b.runs[i].row.scheme);
    EXPECT_EQ(a.runs[i].row.throughputBps, b.runs[i].row.throughputBps);
    EXPECT_EQ(a.runs[i].row.coverageFraction, b.runs[i].row.coverageFraction);
  }
}

TEST(Harness, OutputsAreByteIdenticalAcrossRuns) {
  const auto cfg = tiny();
  const fs::path base = fs::temp_directory_path() / "bmfl_harness_outputs";
  fs::remove_all(base);
  write_outputs(cfg, run_experiment(cfg), base / "a");
  write_outputs(cfg, run_experiment(cfg), base / "b");
  for (const char* f : {"metrics.csv", "eval_slots.csv", "loss_trace.csv", "config_resolved.txt"}) {
    ASSERT_TRUE(fs::exists(base / "a" / f)) << f;
    EXPECT_EQ(slurp(base / "a" / f), slurp(base / "b" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(base / "a" / "timing.csv"));
  const auto back = read_metrics_csv(base / "a" / "metrics.csv");
  EXPECT_EQ(back.size(), 10u);
  fs::remove_all(base);
}

TEST(Harness, FailedJobSurfacesAndKeepsPrefix) {
  // BFS over 56^3 joint policies exceeds a 1000 budget.
  const auto cfg = parse_config("rounds = 1; eval_slots = 1; replications = 1; scheme = EDB,BFS; bfs_budget = 1000");
  ExperimentResult partial;
  try {
    run_experiment(cfg, {}, &partial);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
  ASSERT_EQ(partial.runs.size(), 1u);
  EXPECT_EQ(partial.runs[0].row.scheme, "EDB");
}

}  // namespace
}  // namespace bmfl
