#include "bmfl/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "bmfl/error.hpp"

namespace bmfl {

std::string_view to_string(SchemeId s) {
  switch (s) {
    case SchemeId::BMFL: return "BMFL";
    case SchemeId::BFS: return "BFS";
    case SchemeId::EDB: return "EDB";
    case SchemeId::BMDL: return "BMDL";
    case SchemeId::BMCL: return "BMCL";
  }
  return "?";
}

std::optional<SchemeId> parse_scheme(std::string_view name) {
  std::string up(name);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (SchemeId s : kAllSchemes) {
    if (up == to_string(s)) return s;
  }
  return std::nullopt;
}

std::uint64_t joint_action_count(const Scenario& scenario) {
  std::uint64_t n = 1;
  for (const auto& m : scenario.msbs) {
    const std::uint64_t c = binomial(m.sectors, m.maxBeams);
    if (c != 0 && n > std::numeric_limits<std::uint64_t>::max() / c) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    n *= c;
  }
  return n;
}

BeamPolicy bfs_policy(const NetworkState& state, const Scenario& scenario, std::uint64_t budget) {
  const std::uint64_t count = joint_action_count(scenario);
  if (count > budget) {
    throw Error(ErrorCode::BudgetExceeded, "exhaustive search needs " + std::to_string(count) +
                                               " joint policies, budget is " + std::to_string(budget));
  }
  const int B = scenario.msbsCount();
  const int U = state.users();
  BeamPolicy best(B);
  if (B == 0) return best;

  std::vector<std::vector<AgentAction>> actions;
  for (const auto& m : scenario.msbs) actions.push_back(enumerate_actions(m));
  std::vector<std::size_t> idx(static_cast<std::size_t>(B), 0);
  const SlotEvaluator ev(state, scenario);

  BeamPolicy cur(B);
  for (int b = 0; b < B; ++b) cur.perMsbs[static_cast<std::size_t>(b)] = actions[static_cast<std::size_t>(b)][0];
  double bestR = -std::numeric_limits<double>::infinity();

  // prefix[b][u]: coverage bits of mSBSs 0..b over user u.
  std::vector<std::vector<std::uint32_t>> prefix(static_cast<std::size_t>(B),
                                                 std::vector<std::uint32_t>(static_cast<std::size_t>(U), 0));
  int dirty = 0;  // first level whose prefix must be rebuilt
  while (true) {
    double r;
    if (ev.memoized()) {
      for (int b = dirty; b < B; ++b) {
        const SectorSet& s = cur.perMsbs[static_cast<std::size_t>(b)];
        auto& row = prefix[static_cast<std::size_t>(b)];
        for (int u = 0; u < U; ++u) {
          const std::uint32_t below = b > 0 ? prefix[static_cast<std::size_t>(b - 1)][static_cast<std::size_t>(u)] : 0u;
          row[static_cast<std::size_t>(u)] = below | (s.contains(ev.sector(u, b)) ? (1u << b) : 0u);
        }
      }
      r = ev.throughput_from_masks(prefix.back());
    } else {
      r = ev.throughput(cur);
    }
    if (r > bestR) {
      bestR = r;
      best = cur;
    }
    int b = B - 1;
    while (b >= 0) {
      auto& i = idx[static_cast<std::size_t>(b)];
      if (++i < actions[static_cast<std::size_t>(b)].size()) break;
      i = 0;
      cur.perMsbs[static_cast<std::size_t>(b)] = actions[static_cast<std::size_t>(b)][0];
      --b;
    }
    if (b < 0) break;
    cur.perMsbs[static_cast<std::size_t>(b)] = actions[static_cast<std::size_t>(b)][idx[static_cast<std::size_t>(b)]];
    dirty = b;
  }
  return best;
}

int edb_offset_count(const MsbsDesc& msbs) { return msbs.sectors / msbs.maxBeams; }

SectorSet edb_sectors(const MsbsDesc& msbs, int offset) {
  const int d = edb_offset_count(msbs);
  SectorSet s;
  for (int k = 0; k < msbs.maxBeams; ++k) s.insert((offset + k * d) % msbs.sectors);
  return s;
}

BeamPolicy edb_policy(const NetworkState& state, const Scenario& scenario) {
  const int B = scenario.msbsCount();
  BeamPolicy p(B);
  for (int b = 0; b < B; ++b) p.perMsbs[static_cast<std::size_t>(b)] = edb_sectors(scenario.msbs[static_cast<std::size_t>(b)], 0);
  const SlotEvaluator ev(state, scenario);
  for (int b = 0; b < B; ++b) {
    const MsbsDesc& m = scenario.msbs[static_cast<std::size_t>(b)];
    int bestO = 0;
    double bestR = -std::numeric_limits<double>::infinity();
    for (int o = 0; o < edb_offset_count(m); ++o) {
      p.perMsbs[static_cast<std::size_t>(b)] = edb_sectors(m, o);
      const double r = ev.throughput(p);
      if (r > bestR) {
        bestR = r;
        bestO = o;
      }
    }
    p.perMsbs[static_cast<std::size_t>(b)] = edb_sectors(m, bestO);
  }
  return p;
}

TrainingResult bmdl_trainer(Environment& env, const Hyperparams& hp, FederationConfig cfg) {
  cfg.aggregate = false;
  return run_bmfl(env, hp, cfg);
}

TrainingResult bmdl_trainer(const Scenario& scenario, const Hyperparams& hp, FederationConfig cfg) {
  Environment env(scenario);
  return bmdl_trainer(env, hp, cfg);
}

// --- centralized learner ---------------------------------------------------

JointQProblem::JointQProblem(const Scenario& scenario, std::uint64_t actionBudget) {
  if (scenario.msbs.empty()) throw Error(ErrorCode::EmptyInput, "scenario has no mSBS");
  std::uint64_t n = 1;
  for (const auto& m : scenario.msbs) {
    agents_.emplace_back(scenario.users, m);
    const std::size_t r = agents_.back().action_count();
    radix_.push_back(r);
    if (n > std::numeric_limits<std::size_t>::max() / r) {
      throw Error(ErrorCode::BudgetExceeded, "joint action index does not fit in 64 bits");
    }
    n *= r;
    ctxDims_.push_back(bmfl::context_dim(scenario.users, m.maxBeams));
    contextDim_ += ctxDims_.back();
    inputDim_ += agents_.back().input_dim();
  }
  actionCount_ = static_cast<std::size_t>(n);
  fallback_ = n > actionBudget;
}

std::vector<std::size_t> JointQProblem::decode(std::size_t action) const {
  std::vector<std::size_t> out(radix_.size());
  for (std::size_t b = radix_.size(); b-- > 0;) {
    out[b] = action % radix_[b];
    action /= radix_[b];
  }
  return out;
}

std::size_t JointQProblem::encode_index(std::span<const std::size_t> perMsbs) const {
  std::size_t a = 0;
  for (std::size_t b = 0; b < radix_.size(); ++b) a = a * radix_[b] + perMsbs[b];
  return a;
}

BeamPolicy JointQProblem::policy(std::size_t action) const {
  const auto idx = decode(action);
  BeamPolicy p(static_cast<int>(agents_.size()));
  for (std::size_t b = 0; b < agents_.size(); ++b) p.perMsbs[b] = agents_[b].action(idx[b]);
  return p;
}

std::vector<double> JointQProblem::context(const NetworkState& state, const Scenario& scenario,
                                           std::span<const std::vector<std::uint8_t>> participants) const {
  std::vector<double> ctx;
  ctx.reserve(contextDim_);
  for (int b = 0; b < scenario.msbsCount(); ++b) {
    std::span<const std::uint8_t> mask;
    if (static_cast<std::size_t>(b) < participants.size()) mask = participants[static_cast<std::size_t>(b)];
    const auto c = context_of(observe(state, scenario, b, mask), scenario, scenario.msbs[static_cast<std::size_t>(b)]);
    ctx.insert(ctx.end(), c.begin(), c.end());
  }
  return ctx;
}

void JointQProblem::features(std::span<const double> context, std::size_t action,
                             std::span<double> out) const {
  if (context.size() != contextDim_ || out.size() != inputDim_) {
    throw Error(ErrorCode::DimensionMismatch, "joint context or feature buffer has the wrong length");
  }
  const auto idx = decode(action);
  std::size_t ci = 0;
  std::size_t oi = 0;
  for (std::size_t b = 0; b < agents_.size(); ++b) {
    const std::size_t cd = ctxDims_[b];
    const std::size_t fd = agents_[b].input_dim();
    agents_[b].features(context.subspan(ci, cd), idx[b], out.subspan(oi, fd));
    ci += cd;
    oi += fd;
  }
}

std::size_t JointQProblem::greedy_action(std::span<const double> context, const ModelWeights& w) const {
  if (!fallback_) return QProblem::greedy_action(context, w);
  std::vector<std::size_t> idx(radix_.size(), 0);
  for (std::size_t b = 0; b < radix_.size(); ++b) {
    std::size_t bestA = 0;
    double bestQ = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < radix_[b]; ++a) {
      idx[b] = a;
      const double q = q_value(context, encode_index(idx), w);
      if (q > bestQ) {
        bestQ = q;
        bestA = a;
      }
    }
    idx[b] = bestA;
  }
  return encode_index(idx);
}

BmclResult bmcl_trainer(Environment& env, const Hyperparams& hp, const FederationConfig& cfg,
                        std::uint64_t actionBudget) {
  hp.validate();
  cfg.validate();
  const Scenario& sc = env.scenario();
  const int B = sc.msbsCount();
  const JointQProblem problem(sc, actionBudget);
  const double scale = reward_scale(cfg, sc);
  DdqnLearner learner(MlpSpec::q_network(problem.input_dim(), hp.hidden), hp,
                      make_rng(sc.seed, streams::kLearner));
  std::vector<ParticipationLedger> ledgers(static_cast<std::size_t>(B), ParticipationLedger(sc.users));

  BmclResult res;
  res.fallback = problem.fallback();
  res.jointActions = joint_action_count(sc);
  res.participants.assign(static_cast<std::size_t>(B), {});
  std::int64_t globalSlot = 0;
  for (int r = 1; r <= cfg.rounds; ++r) {
    for (int b = 0; b < B; ++b) {
      res.participants[static_cast<std::size_t>(b)] =
          clean_data(sc.msbs[static_cast<std::size_t>(b)], env.state().userPositions,
                     ledgers[static_cast<std::size_t>(b)], cfg.eta);
    }
    for (int k = 0; k < cfg.slotsPerRound; ++k) {
      Experience e;
      e.state = problem.context(env.state(), sc, res.participants);
      e.action = learner.act(e.state, problem, hp.epsilon.at(globalSlot));
      const StepResult step = env.step(problem.policy(e.action));
      e.reward = step.throughputBps * scale;
      e.nextState = problem.context(env.state(), sc, res.participants);
      e.terminal = (r == cfg.rounds && k == cfg.slotsPerRound - 1);
      learner.remember(std::move(e));
      const double loss = learner.train(problem);
      res.trace.rows.push_back(TraceRow{r, static_cast<int>(globalSlot), -1, loss, step.throughputBps,
                                        step.coverage, step.throughputBps});
      res.trace.iterationLoss.push_back(loss);
      ++globalSlot;
      ++res.envSlots;
    }
  }
  res.model = learner.online();
  return res;
}

BmclResult bmcl_trainer(const Scenario& scenario, const Hyperparams& hp, const FederationConfig& cfg,
                        std::uint64_t actionBudget) {
  Environment env(scenario);
  return bmcl_trainer(env, hp, cfg, actionBudget);
}

// --- common protocol -------------------------------------------------------

double tail_mean(const std::vector<double>& v, double fraction) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(v.size()))));
  double s = 0.0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(n);
}

double head_mean(const std::vector<double>& v, double fraction) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(v.size()))));
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s / static_cast<double>(n);
}

SchemeOutcome run_scheme(SchemeId scheme, const Scenario& scenario, const Hyperparams& hp,
                         const SchemeOptions& opt) {
  if (opt.evalSlots < 1) throw Error(ErrorCode::RangeError, "eval slots must be >= 1");
  Environment env(scenario);
  const Scenario& sc = env.scenario();
  SchemeOutcome out;
  out.scheme = scheme;
  out.meanLossFinal = std::numeric_limits<double>::quiet_NaN();

  std::vector<ModelWeights> models;
  std::vector<std::vector<std::uint8_t>> participants;
  std::optional<JointQProblem> joint;
  ModelWeights jointModel;

  switch (scheme) {
    case SchemeId::BMFL:
    case SchemeId::BMDL: {
      const bool agg = scheme == SchemeId::BMFL;
      TrainingResult r = agg ? run_bmfl(env, hp, opt.fed) : bmdl_trainer(env, hp, opt.fed);
      models = deployed_models(r, hp, agg);
      participants = std::move(r.participants);
      out.trace = std::move(r.trace);
      break;
    }
    case SchemeId::BMCL: {
      BmclResult r = bmcl_trainer(env, hp, opt.fed, opt.bmclActionBudget);
      joint.emplace(sc, opt.bmclActionBudget);
      jointModel = std::move(r.model);
      participants = std::move(r.participants);
      out.bmclFallback = r.fallback;
      out.trace = std::move(r.trace);
      break;
    }
    case SchemeId::BFS:
    case SchemeId::EDB: {
      const std::int64_t slots = static_cast<std::int64_t>(opt.fed.rounds) * opt.fed.slotsPerRound;
      for (std::int64_t i = 0; i < slots; ++i) env.idle();
      break;
    }
  }
  if (!out.trace.iterationLoss.empty()) out.meanLossFinal = tail_mean(out.trace.iterationLoss);

  double covSum = 0.0;
  double thrSum = 0.0;
  for (int e = 0; e < opt.evalSlots; ++e) {
    BeamPolicy p;
    switch (scheme) {
      case SchemeId::BMFL:
      case SchemeId::BMDL:
        p = greedy_joint_policy(env.state(), sc, models, participants);
        break;
      case SchemeId::BMCL:
        p = joint->policy(joint->greedy_action(joint->context(env.state(), sc, participants), jointModel));
        break;
      case SchemeId::BFS:
        p = bfs_policy(env.state(), sc, opt.bfsBudget);
        break;
      case SchemeId::EDB:
        p = edb_policy(env.state(), sc);
        break;
    }
    const std::int64_t slot = env.slot();
    const StepResult s = env.step(p);
    out.eval.push_back(EvalSlot{slot, s.throughputBps, s.coverage, std::move(p)});
    covSum += s.coverage;
    thrSum += s.throughputBps;
  }
  out.meanCoverage = covSum / opt.evalSlots;
  out.meanThroughputBps = thrSum / opt.evalSlots;
  out.checkedSlots = env.checkedSlots();
  out.envSlots = env.slot();
  return out;
}

}  // namespace bmfl
