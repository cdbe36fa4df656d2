#include "bmfl/federation.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include "bmfl/channel.hpp"
#include "bmfl/error.hpp"
#include "bmfl/network.hpp"

namespace bmfl {

double ParticipationLedger::frequency(int u) const {
  if (total == 0) return 0.0;
  return static_cast<double>(perUser[static_cast<std::size_t>(u)]) / static_cast<double>(total);
}

std::vector<std::uint8_t> clean_data(const MsbsDesc& msbs, std::span<const Vec2> users,
                                     ParticipationLedger& ledger, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::RangeError, "eta must lie in (0,1]");
  if (ledger.perUser.size() != users.size()) {
    if (ledger.total != 0) throw Error(ErrorCode::DimensionMismatch, "ledger user count changed");
    ledger.perUser.assign(users.size(), 0);
  }
  std::vector<std::uint8_t> mask(users.size(), 0);
  for (std::size_t u = 0; u < users.size(); ++u) {
    const bool inRange = distance(users[u], msbs.position) <= msbs.coverageRadius;
    if (inRange && ledger.frequency(static_cast<int>(u)) <= eta) mask[u] = 1;
  }
  for (std::size_t u = 0; u < users.size(); ++u) ledger.perUser[u] += mask[u];
  ledger.total += 1;
  return mask;
}

ModelWeights local_update(const ModelWeights& global, std::span<const double> gradient,
                          double lambda, double Kb) {
  ModelWeights theta = global;
  if (gradient.empty() || lambda == 0.0) return theta;
  if (gradient.size() != global.params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient length " + std::to_string(gradient.size()) +
                                              " != parameter count " +
                                              std::to_string(global.params.size()));
  }
  if (!(Kb > 0.0)) throw Error(ErrorCode::ZeroData, "K_b must be positive");
  const double step = lambda / Kb;
  for (std::size_t i = 0; i < theta.params.size(); ++i) theta.params[i] -= step * gradient[i];
  return theta;
}

ModelWeights aggregate(std::span<const ModelWeights> models, std::span<const double> counts) {
  if (models.empty()) throw Error(ErrorCode::EmptyInput, "nothing to aggregate");
  if (counts.size() != models.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one data count per model is required");
  }
  double K = 0.0;
  for (double k : counts) {
    if (!(k >= 0.0)) throw Error(ErrorCode::RangeError, "data counts must be non-negative");
    K += k;
  }
  if (!(K > 0.0)) throw Error(ErrorCode::ZeroData, "total data count is zero");
  for (const auto& m : models) {
    if (!(m.spec == models[0].spec) || m.params.size() != models[0].params.size()) {
      throw Error(ErrorCode::ShapeMismatch, "models have different shapes");
    }
  }

  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] < counts[b];
    return models[a].params < models[b].params;
  });

  // Running weighted mean: exact for a single party and for identical inputs.
  ModelWeights g = models[order[0]];
  double seen = counts[order[0]];
  for (std::size_t j = 1; j < order.size(); ++j) {
    const double k = counts[order[j]];
    if (k == 0.0) continue;
    seen += k;
    const double w = k / seen;
    const auto& p = models[order[j]].params;
    if (seen == k) {  // every earlier input carried zero weight
      g.params = p;
      continue;
    }
    for (std::size_t i = 0; i < g.params.size(); ++i) g.params[i] += w * (p[i] - g.params[i]);
  }
  if (seen == 0.0) g = models[order.back()];

  for (std::size_t i = 0; i < g.params.size(); ++i) {
    double lo = models[0].params[i];
    double hi = lo;
    for (const auto& m : models) {
      lo = std::min(lo, m.params[i]);
      hi = std::max(hi, m.params[i]);
    }
    g.params[i] = std::clamp(g.params[i], lo, hi);
  }
  return g;
}

void FederationConfig::validate() const {
  if (rounds < 0) throw Error(ErrorCode::RangeError, "rounds must be >= 0");
  if (slotsPerRound < 1) throw Error(ErrorCode::RangeError, "slots per round must be >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::RangeError, "eta must lie in (0,1]");
}

double reward_scale(const FederationConfig& cfg, const Scenario& scenario) {
  if (cfg.rewardScale > 0.0) return cfg.rewardScale;
  // One user's peak rate: every allowed link at the 1 m SNR.
  const RadioConstants& c = scenario.radio;
  const double snrDb = mmwave_rx_power_dbm(1.0, 0.0, c) - noise_power_dbm(c.wMm, c);
  const int links = std::min(scenario.msbsCount(), scenario.maxLinksPerUser);
  return 1.0 / (std::max(1, links) * mmwave_link_rate(snrDb, c));
}

BeamPolicy greedy_joint_policy(const NetworkState& state, const Scenario& scenario,
                               std::span<const ModelWeights> models,
                               std::span<const std::vector<std::uint8_t>> participants) {
  const int B = scenario.msbsCount();
  BeamPolicy joint(B);
  for (int b = 0; b < B; ++b) {
    const MsbsDesc& m = scenario.msbs[static_cast<std::size_t>(b)];
    const AgentQProblem problem(scenario.users, m);
    std::span<const std::uint8_t> mask;
    if (static_cast<std::size_t>(b) < participants.size()) mask = participants[static_cast<std::size_t>(b)];
    const auto ctx = context_of(observe(state, scenario, b, mask), scenario, m);
    joint.perMsbs[static_cast<std::size_t>(b)] =
        problem.action(problem.greedy_action(ctx, models[static_cast<std::size_t>(b)]));
  }
  return joint;
}

TrainingResult run_bmfl(Environment& env, const Hyperparams& hp, const FederationConfig& cfg) {
  hp.validate();
  cfg.validate();
  const Scenario& sc = env.scenario();
  const int B = sc.msbsCount();
  const int U = sc.users;
  if (B < 1) throw Error(ErrorCode::EmptyInput, "scenario has no mSBS");
  const double scale = reward_scale(cfg, sc);

  std::vector<AgentQProblem> problems;
  problems.reserve(static_cast<std::size_t>(B));
  for (const auto& m : sc.msbs) problems.emplace_back(U, m);
  for (const auto& m : sc.msbs) {
    if (m.maxBeams != sc.msbs[0].maxBeams) {
      throw Error(ErrorCode::ShapeMismatch, "federated agents need a common M_b");
    }
  }
  const MlpSpec spec = MlpSpec::q_network(problems[0].input_dim(), hp.hidden);

  // g_0 comes from the first learner's stream; every agent starts from it.
  std::vector<DdqnLearner> learners;
  learners.reserve(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    learners.emplace_back(spec, hp, make_rng(sc.seed, streams::kLearner + static_cast<std::uint64_t>(b)));
  }
  TrainingResult res;
  res.global = learners[0].online();
  res.ledgers.assign(static_cast<std::size_t>(B), ParticipationLedger(U));
  res.localModels.assign(static_cast<std::size_t>(B), res.global);
  res.lastGradients.assign(static_cast<std::size_t>(B), {});
  res.dataCounts.assign(static_cast<std::size_t>(B), 0.0);
  res.participants.assign(static_cast<std::size_t>(B), std::vector<std::uint8_t>(static_cast<std::size_t>(U), 0));
  res.finalPolicy = BeamPolicy(B);

  const int tau = cfg.slotsPerRound;
  std::int64_t globalSlot = 0;
  std::vector<std::vector<double>> ctx(static_cast<std::size_t>(B));
  std::vector<std::size_t> actions(static_cast<std::size_t>(B));
  for (int r = 1; r <= cfg.rounds; ++r) {
    for (int b = 0; b < B; ++b) {
      const auto sb = static_cast<std::size_t>(b);
      res.participants[sb] = clean_data(sc.msbs[sb], env.state().userPositions, res.ledgers[sb], cfg.eta);
      const auto selected = std::count(res.participants[sb].begin(), res.participants[sb].end(), 1);
      res.dataCounts[sb] = cfg.dataCount == DataCount::Slots
                               ? static_cast<double>(tau)
                               : static_cast<double>(tau) * static_cast<double>(std::max<std::ptrdiff_t>(1, selected));
      const ModelWeights& base = cfg.aggregate ? res.global : res.localModels[sb];
      learners[sb].load_model(local_update(base, res.lastGradients[sb], hp.lambda, res.dataCounts[sb]));
    }

    for (int k = 0; k < tau; ++k) {
      const double eps = hp.epsilon.at(globalSlot);
      BeamPolicy joint(B);
      for (int b = 0; b < B; ++b) {
        const auto sb = static_cast<std::size_t>(b);
        ctx[sb] = context_of(observe(env.state(), sc, b, res.participants[sb]), sc, sc.msbs[sb]);
        actions[sb] = learners[sb].act(ctx[sb], problems[sb], eps);
        joint.perMsbs[sb] = problems[sb].action(actions[sb]);
      }
      const StepResult step = env.step(joint);
      res.finalPolicy = joint;
      const bool last = (r == cfg.rounds && k == tau - 1);
      double lossSum = 0.0;
      for (int b = 0; b < B; ++b) {
        const auto sb = static_cast<std::size_t>(b);
        Experience e;
        e.state = ctx[sb];
        e.action = actions[sb];
        e.reward = step.rewards[sb] * scale;
        e.nextState = context_of(observe(env.state(), sc, b, res.participants[sb]), sc, sc.msbs[sb]);
        e.terminal = last;
        learners[sb].remember(std::move(e));
        const double loss = learners[sb].train(problems[sb]);
        lossSum += loss;
        res.trace.rows.push_back(TraceRow{r, static_cast<int>(globalSlot), b, loss, step.rewards[sb],
                                          step.coverage, step.throughputBps});
      }
      res.trace.iterationLoss.push_back(lossSum / B);
      ++globalSlot;
      ++res.envSlots;
    }

    std::vector<ModelWeights> locals;
    locals.reserve(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      const auto sb = static_cast<std::size_t>(b);
      res.localModels[sb] = learners[sb].online();
      res.lastGradients[sb] = learners[sb].lastGradient();
    }
    if (cfg.aggregate) {
      res.global = aggregate(res.localModels, res.dataCounts);
      ++res.aggregations;
    }
  }
  return res;
}

TrainingResult run_bmfl(const Scenario& scenario, const Hyperparams& hp, const FederationConfig& cfg) {
  Environment env(scenario);
  return run_bmfl(env, hp, cfg);
}

std::vector<ModelWeights> deployed_models(const TrainingResult& r, const Hyperparams& hp,
                                          bool aggregated) {
  std::vector<ModelWeights> out;
  out.reserve(r.localModels.size());
  for (std::size_t b = 0; b < r.localModels.size(); ++b) {
    const ModelWeights& base = aggregated ? r.global : r.localModels[b];
    out.push_back(local_update(base, r.lastGradients[b], hp.lambda, r.dataCounts[b]));
  }
  return out;
}

std::int64_t complexity_estimate(const Scenario& scenario, int J, int tau) {
  return static_cast<std::int64_t>(J) *
         (static_cast<std::int64_t>(scenario.msbsCount()) * scenario.users + tau);
}

void write_trace_csv(std::ostream& os, const TrainingTrace& trace, bool header) {
  if (header) os << "round,slot,msbsId,loss,reward,coverage,throughputBps\n";
  const auto old = os.precision(17);
  for (const auto& r : trace.rows) {
    os << r.round << ',' << r.slot << ',' << r.msbsId << ',' << r.loss << ',' << r.reward << ','
       << r.coverage << ',' << r.throughputBps << '\n';
  }
  os.precision(old);
}

}  // namespace bmfl
