// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bmfl/baselines.hpp"
#include "bmfl/channel.hpp"
#include "bmfl/deepq.hpp"
#include "bmfl/error.hpp"
#include "bmfl/federation.hpp"
#include "bmfl/harness.hpp"
#include "bmfl/mdp_env.hpp"
#include "bmfl/network.hpp"
#include "support.hpp"

namespace {

using namespace bmfl;
namespace fs = std::filesystem;

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s: %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Slots on which constraints were checked versus slots that served users,
// across every run of criteria 6 to 8.
struct ConstraintTally {
  std::int64_t checked = 0;
  std::int64_t served = 0;
  int runs = 0;
  int mismatches = 0;
  void add(std::int64_t c, std::int64_t s) {
    checked += c;
    served += s;
    ++runs;
    if (c != s) ++mismatches;
  }
  void add(const SchemeOutcome& o) {
    const bool trains = o.scheme != SchemeId::BFS && o.scheme != SchemeId::EDB;
    add(o.checkedSlots, trains ? o.envSlots : static_cast<std::int64_t>(o.eval.size()));
  }
};

ConstraintTally tally;
std::vector<std::string> violations;

// 1: channel formulas against linear-domain recomputation.
void formula_fidelity() {
  double worst = 0.0;
  int links = 0;
  for (std::uint64_t seed = 1; links < 100; ++seed) {
    auto sc = test::random_scenario(seed, 4, 8, 3, 6);
    auto s = test::random_state(sc);
    Rng r(seed);
    for (auto& p : s.policy.perMsbs) {
      for (int k = 0; k < 8; ++k) {
        if (r() % 2) p.insert(k);
      }
    }
    const auto& c = sc.radio;
    for (int u = 0; u < sc.users && links < 100; ++u) {
      for (int b = 0; b < sc.msbsCount() && links < 100; ++b) {
        if (!s.policy.perMsbs[static_cast<std::size_t>(b)].contains(s.link(u, b).sector)) continue;
        const Vec2 pu = s.userPositions[static_cast<std::size_t>(u)];
        const Vec2 pb = sc.msbs[static_cast<std::size_t>(b)].position;
        const double d = std::max(1.0, std::hypot(pu.x - pb.x, pu.y - pb.y));
        const double xi = s.shadowingDb[static_cast<std::size_t>(u) * sc.msbs.size() + static_cast<std::size_t>(b)];
        const double gain = test::dbm(std::pow(10.0, c.kappa / 10.0) * std::pow(d, c.rho));
        const double loss = test::dbm(std::pow(10.0, c.alpha / 10.0) * std::pow(d, c.beta) * std::pow(10.0, xi / 10.0));
        const double noise = test::dbm(test::noise_mw(c.wMm, c));
        const double rx = test::dbm(test::rx_mw(d, xi, c));
        worst = std::max(worst, std::abs(microwave_gain(d, c) - gain));
        worst = std::max(worst, std::abs(mmwave_pathloss(d, xi, c) - loss));
        worst = std::max(worst, std::abs(noise_power_dbm(c.wMm, c) - noise));
        worst = std::max(worst, std::abs(mmwave_rx_power_dbm(d, xi, c) - rx));
        for (bool full : {false, true}) {
          const auto mode = full ? InterferenceMode::Full : InterferenceMode::SnrOnly;
          const double want = test::sinr_oracle_db(sc, s, s.policy, u, b, full);
          worst = std::max(worst, std::abs(sinr_mmwave(u, b, s, sc, mode).sinrDb - want));
        }
        ++links;
      }
    }
  }
  report(1, worst <= 1e-9, fmt("%.0f links, max abs error %.3g dB", links, worst));
}

// 2: one user, four mSBSs, cap three, two links.
void coverage_example() {
  std::vector<MsbsDesc> ms;
  for (int b = 0; b < 4; ++b) ms.push_back(test::msbs_at(b, {10.0 * b, 0}));
  auto sc = test::scenario_with(ms, 1);
  sc.maxLinksPerUser = 3;
  AssociationState a(1, 4);
  a.x[a.index(0, 0)] = 1;
  a.x[a.index(0, 2)] = 1;
  const double pct = user_coverage(a, sc) * 100.0;
  report(2, std::abs(pct - 66.67) <= 0.01, fmt("coverage %.4f%%", pct));
}

// 3: backprop against central differences.
void gradients() {
  const auto rep = check_gradients(20, 2024);
  report(3, rep.draws == 20 && rep.maxRelError < 1e-4,
         fmt("%.0f draws, max relative error %.3g", rep.draws, rep.maxRelError));
}

// Context [x] plus the action index as the only two inputs.
class ToyProblem : public QProblem {
 public:
  explicit ToyProblem(std::size_t actions) : actions_(actions) {}
  std::size_t input_dim() const override { return 2; }
  std::size_t action_count() const override { return actions_; }
  void features(std::span<const double> context, std::size_t action, std::span<double> out) const override {
    out[0] = context[0];
    out[1] = static_cast<double>(action);
  }

 private:
  std::size_t actions_;
};

ModelWeights linear(double w0, double w1, double b) {
  ModelWeights w = zero_weights(MlpSpec{{2, 1}, Activation::Relu});
  w.weight(0, 0, 0) = w0;
  w.weight(0, 1, 0) = w1;
  w.bias(0, 0) = b;
  return w;
}

// 4: DDQN target, target sync and single-experience convergence.
void ddqn_mechanics() {
  std::vector<std::string> bad;
  const ToyProblem two(2);
  Hyperparams hp;
  hp.bootstrapLastSlot = false;
  // Online: Q(s', a) = 1 + 2a, argmax 1. Target: Q(s', a) = 1.5 - a, so 0.5 at a = 1.
  const auto online = linear(1.0, 2.0, 0.0);
  const auto target = linear(1.0, -1.0, 0.5);
  const std::vector<double> next{1.0};
  if (ddqn_target(1.0, next, false, online, target, two, hp) != 1.0 + 0.8 * 0.5) bad.push_back("toy A");
  if (ddqn_target(2.0, next, true, online, target, two, hp) != 2.0) bad.push_back("terminal");
  // Online prefers action 0 here: Q = 2 - a; target value at a = 0 is 3.
  if (ddqn_target(0.5, next, false, linear(1.0, -1.0, 1.0), linear(2.0, 5.0, 1.0), two, hp) != 0.5 + 0.8 * 3.0) {
    bad.push_back("toy B");
  }

  Hyperparams sh;
  sh.targetInterval = 4;
  DdqnLearner learner(MlpSpec{{2, 3, 1}, Activation::Relu}, sh, Rng(3));
  for (int i = 0; i < 8; ++i) learner.remember(Experience{{0.1 * i}, static_cast<std::size_t>(i % 2), 1.0, {0.2}, false});
  for (int step = 1; step <= 16; ++step) {
    const auto before = learner.target();
    learner.train(two);
    const bool synced = learner.target() == learner.online();
    const bool unchanged = learner.target() == before;
    if (step % 4 == 0 ? !synced : (!unchanged || synced)) bad.push_back("sync at step " + std::to_string(step));
  }

  Hyperparams one;
  one.gradClip = 0.0;
  Rng init(9);
  auto w = init_weights(MlpSpec::q_network(2), init);
  const auto fixed = w;
  ReplayPool pool(1);
  pool.push(Experience{{0.5}, 1, 1.0, {0.5}, false});
  Rng r(1);
  const double first = train_step(w, fixed, pool, two, one, r).loss;
  double last = first;
  for (int i = 1; i < 200; ++i) last = train_step(w, fixed, pool, two, one, r).loss;
  if (!(first > 0.0 && last < 0.01 * first)) bad.push_back("single experience");

  std::string detail = fmt("single-experience loss %.3g -> %.3g after 200 steps", first, last);
  for (const auto& b : bad) detail += "; bad " + b;
  report(4, bad.empty(), detail);
}

// 5: aggregation identities.
void fedavg() {
  std::vector<std::string> bad;
  Rng r(11);
  const auto w = init_weights(MlpSpec::q_network(11), r);
  const std::vector<ModelWeights> same(4, w);
  const std::vector<double> ks{1, 5, 2, 9};
  if (!(aggregate(same, ks) == w)) bad.push_back("identity");

  ModelWeights a = zero_weights(MlpSpec{{1, 1}, Activation::Relu});
  ModelWeights b = a;
  for (auto& v : b.params) v = 4.0;
  const std::vector<ModelWeights> toy{a, b};
  const std::vector<double> tk{1, 3};
  const auto g = aggregate(toy, tk);
  for (double v : g.params) {
    if (v != 3.0) bad.push_back("scalar toy");
  }

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ModelWeights> ms;
    std::vector<double> k;
    std::uniform_int_distribution<int> cnt(1, 40);
    for (int j = 0; j < 5; ++j) {
      ms.push_back(init_weights(MlpSpec::q_network(6, {5}), r));
      k.push_back(cnt(r));
    }
    const auto agg = aggregate(ms, k);
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    std::vector<ModelWeights> pm;
    std::vector<double> pk;
    for (auto i : perm) {
      pm.push_back(ms[i]);
      pk.push_back(k[i]);
    }
    if (!(aggregate(pm, pk) == agg)) bad.push_back("permutation");
    for (std::size_t i = 0; i < agg.params.size(); ++i) {
      double lo = ms[0].params[i];
      double hi = lo;
      for (const auto& m : ms) {
        lo = std::min(lo, m.params[i]);
        hi = std::max(hi, m.params[i]);
      }
      if (agg.params[i] < lo || agg.params[i] > hi) bad.push_back("hull");
    }
  }
  std::string detail = "identity, scalar toy = 3, permutation and hull over 20 draws";
  if (!bad.empty()) detail = "failed " + bad.front() + " (" + std::to_string(bad.size()) + " checks)";
  report(5, bad.empty(), detail);
}

// 6: B=2, S=4, M=1 exhaustive search equals a nested loop and dominates.
void bfs_dominance() {
  int mismatches = 0;
  int dominanceBreaks = 0;
  int slots = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto sc = test::random_scenario(seed, 2, 4, 1, 12);
    const auto s = test::random_state(sc);
    if (!(bfs_policy(s, sc) == test::nested_loop_bfs(s, sc))) ++mismatches;
  }
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto sc = test::random_scenario(seed, 2, 4, 1, 12);
    std::vector<SchemeOutcome> outs;
    try {
      for (SchemeId id : kAllSchemes) outs.push_back(run_scheme(id, sc, Hyperparams{}, SchemeOptions{}));
    } catch (const Error& e) {
      violations.push_back(e.what());
      report(6, false, std::string("run failed: ") + e.what());
      return;
    }
    const auto& bfs = *std::find_if(outs.begin(), outs.end(), [](const auto& o) { return o.scheme == SchemeId::BFS; });
    for (const auto& o : outs) {
      tally.add(o);
      for (std::size_t t = 0; t < o.eval.size(); ++t) {
        if (o.eval[t].slot != bfs.eval[t].slot || o.eval[t].throughputBps > bfs.eval[t].throughputBps) {
          ++dominanceBreaks;
        }
        ++slots;
      }
    }
  }
  report(6, mismatches == 0 && dominanceBreaks == 0,
         fmt("oracle mismatches %.0f/10 states, dominance breaks %.0f/%.0f scheme-slots", mismatches,
             dominanceBreaks, slots));
}

std::vector<SummaryRow> run_summary(const std::string& text) {
  const auto cfg = parse_config(text);
  const auto res = run_experiment(cfg);
  std::vector<MetricsRow> rows;
  for (const auto& r : res.runs) {
    tally.add(r.outcome);
    rows.push_back(r.row);
  }
  return summarize(rows);
}

double mean_of(const std::vector<SummaryRow>& s, const std::string& scheme, double value, bool throughput) {
  for (const auto& r : s) {
    if (r.scheme == scheme && r.sweepValue == value) return throughput ? r.throughputMean : r.coverageMean;
  }
  return std::nan("");
}

// 7: trend directions over 10 replications.
void trends() {
  std::string detail;
  bool ok = true;
  try {
    const auto a = run_summary("interference = full; scheme = BMFL; sweep = sinrThreshold; values = -24,-16,-8");
    const double c24 = mean_of(a, "BMFL", -24, false);
    const double c16 = mean_of(a, "BMFL", -16, false);
    const double c8 = mean_of(a, "BMFL", -8, false);
    const bool okA = c24 > c16 && c16 > c8;
    detail += fmt("(a) coverage %.4f > %.4f > %.4f ", c24, c16, c8) + (okA ? "ok" : "VIOLATED");

    const auto b = run_summary("msbs_count = 6; scheme = BMFL; sweep = userDensity; values = 600,3000");
    const double lo = mean_of(b, "BMFL", 600, true);
    const double hi = mean_of(b, "BMFL", 3000, true);
    const bool okB = hi > lo;
    detail += fmt("; (b) throughput %.4g Mbit/s at 3000 vs %.4g at 600 ", hi / 1e6, lo / 1e6) + (okB ? "ok" : "VIOLATED");

    const auto c = run_summary("msbs_count = 6; sectors = 5; beams = 2; sinr_threshold_db = -20; scheme = BFS,BMFL,EDB");
    const double bfs = mean_of(c, "BFS", 0, true);
    const double bmfl = mean_of(c, "BMFL", 0, true);
    const double edb = mean_of(c, "EDB", 0, true);
    const bool okC = bfs >= bmfl && bmfl >= edb;
    detail += fmt("; (c) BFS %.4g >= BMFL %.4g >= EDB %.4g Mbit/s ", bfs / 1e6, bmfl / 1e6, edb / 1e6) +
              (okC ? "ok" : "VIOLATED");
    ok = okA && okB && okC;
  } catch (const Error& e) {
    violations.push_back(e.what());
    ok = false;
    detail += std::string(" run failed: ") + e.what();
  }
  report(7, ok, detail);
}

// 8: final-tenth loss below first-tenth loss at three learning rates.
void convergence() {
  std::string detail;
  bool ok = true;
  const auto cfg = parse_config("");
  for (double lr : {0.03, 0.1, 0.3}) {
    double head = 0.0;
    double tail = 0.0;
    const int reps = 3;
    try {
      for (int rep = 0; rep < reps; ++rep) {
        auto pt = build_point(cfg, 0.0, cfg.seed + static_cast<std::uint64_t>(rep));
        pt.hp.alpha = lr;
        pt.hp.lambda = lr;
        Environment env(pt.scenario);
        const auto r = run_bmfl(env, pt.hp, cfg.fed);
        tally.add(env.checkedSlots(), r.envSlots);
        head += head_mean(r.trace.iterationLoss) / reps;
        tail += tail_mean(r.trace.iterationLoss) / reps;
      }
    } catch (const Error& e) {
      violations.push_back(e.what());
      ok = false;
      detail += std::string("run failed: ") + e.what() + "; ";
      continue;
    }
    ok = ok && tail < head;
    detail += fmt("lr %.2f head %.4g tail %.4g; ", lr, head, tail);
  }
  detail.resize(detail.size() - 2);
  report(8, ok, detail);
}

// 9: every served slot of criteria 6 to 8 passed the constraint checker.
void constraints() {
  const bool ok = violations.empty() && tally.mismatches == 0 && tally.runs > 0;
  std::string detail = fmt("%.0f runs, %.0f checked of %.0f served slots, %.0f errors", tally.runs,
                           static_cast<double>(tally.checked), static_cast<double>(tally.served),
                           static_cast<double>(violations.size()));
  if (!violations.empty()) detail += ": " + violations.front();
  report(9, ok, detail);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10: identical config and seed write identical files.
void determinism() {
  const auto cfg = parse_config(
      "users = 10; msbs_count = 3; sectors = 5; beams = 2; rounds = 10; eval_slots = 5; replications = 2;"
      "scheme = BMFL,BFS,EDB,BMDL,BMCL; sweep = sinrThreshold; values = -20,-8; seed = 7");
  const fs::path base = fs::temp_directory_path() / "bmfl_acceptance_determinism";
  fs::remove_all(base);
  write_outputs(cfg, run_experiment(cfg), base / "a");
  write_outputs(cfg, run_experiment(cfg), base / "b");
  int files = 0;
  int differ = 0;
  std::size_t bytes = 0;
  for (const auto& e : fs::directory_iterator(base / "a")) {
    const auto name = e.path().filename();
    if (name == "timing.csv") continue;  // wall-clock times
    ++files;
    const auto x = slurp(e.path());
    bytes += x.size();
    if (x != slurp(base / "b" / name)) ++differ;
  }
  fs::remove_all(base);
  report(10, files >= 4 && differ == 0,
         fmt("%.0f files, %.0f bytes, %.0f differ", files, static_cast<double>(bytes), differ));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  formula_fidelity();
  coverage_example();
  gradients();
  ddqn_mechanics();
  fedavg();
  bfs_dominance();
  trends();
  convergence();
  constraints();
  determinism();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 10 criteria failed (%.0f s)\n", failures, s);
  return failures == 0 ? 0 : 1;
}
