#include "bmfl/mdp_env.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "bmfl/association.hpp"
#include "bmfl/error.hpp"
#include "bmfl/network.hpp"

namespace bmfl {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

std::vector<AgentAction> enumerate_actions(const MsbsDesc& msbs) {
  const int S = msbs.sectors;
  const int M = msbs.maxBeams;
  std::vector<AgentAction> out;
  if (M < 0 || M > S) return out;
  out.reserve(static_cast<std::size_t>(binomial(S, M)));
  std::vector<int> idx(static_cast<std::size_t>(M));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    AgentAction a;
    for (int s : idx) a.insert(s);
    out.push_back(a);
    int i = M - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == S - M + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < M; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

AgentState observe(const NetworkState& state, const Scenario& scenario, int b,
                   std::span<const std::uint8_t> participants) {
  AgentState s;
  const int users = state.users();
  s.servingUsers.assign(static_cast<std::size_t>(users), 0);
  const AssociationState& a = state.assoc;
  if (a.users == users && a.msbs == scenario.msbsCount()) {
    for (int u = 0; u < users; ++u) s.servingUsers[static_cast<std::size_t>(u)] = a.linked(u, b) ? 1 : 0;
  }
  if (!participants.empty()) {
    if (participants.size() != static_cast<std::size_t>(users)) {
      throw Error(ErrorCode::DimensionMismatch, "participant mask length != U");
    }
    for (int u = 0; u < users; ++u) {
      if (participants[static_cast<std::size_t>(u)] == 0) s.servingUsers[static_cast<std::size_t>(u)] = 0;
    }
  }
  s.ownSectors = state.policy.perMsbs[static_cast<std::size_t>(b)];
  int active = 0;
  int total = 0;
  for (int k = 0; k < scenario.msbsCount(); ++k) {
    if (k == b) continue;
    active += state.policy.perMsbs[static_cast<std::size_t>(k)].size();
    total += scenario.msbs[static_cast<std::size_t>(k)].sectors;
  }
  s.otherOccupied = total > 0 ? static_cast<double>(active) / total : 0.0;
  return s;
}

namespace {

void put_sectors(const SectorSet& set, int slots, int sectors, double* out) {
  const auto v = set.to_vector();
  if (static_cast<int>(v.size()) > slots) {
    throw Error(ErrorCode::InvalidAction, "sector set larger than M_b");
  }
  for (int i = 0; i < slots; ++i) {
    out[i] = i < static_cast<int>(v.size()) ? static_cast<double>(v[static_cast<std::size_t>(i)]) / sectors : -1.0;
  }
}

void check_users(const AgentState& s, const Scenario& scenario) {
  if (s.servingUsers.size() != static_cast<std::size_t>(scenario.users)) {
    throw Error(ErrorCode::DimensionMismatch,
                "state covers " + std::to_string(s.servingUsers.size()) + " users, scenario has " +
                    std::to_string(scenario.users));
  }
}

}  // namespace

std::vector<double> context_of(const AgentState& s, const Scenario& scenario, const MsbsDesc& msbs) {
  check_users(s, scenario);
  const int U = scenario.users;
  std::vector<double> ctx(context_dim(U, msbs.maxBeams));
  for (int u = 0; u < U; ++u) ctx[static_cast<std::size_t>(u)] = s.servingUsers[static_cast<std::size_t>(u)];
  put_sectors(s.ownSectors, msbs.maxBeams, msbs.sectors, ctx.data() + U);
  ctx.back() = s.otherOccupied;
  return ctx;
}

std::vector<double> encode(const AgentState& s, const AgentAction& action, const Scenario& scenario,
                           const MsbsDesc& msbs) {
  const auto ctx = context_of(s, scenario, msbs);
  const int U = scenario.users;
  const int M = msbs.maxBeams;
  std::vector<double> x(feature_dim(U, M));
  std::copy(ctx.begin(), ctx.begin() + U + M, x.begin());
  put_sectors(action, M, msbs.sectors, x.data() + U + M);
  x.back() = ctx.back();
  return x;
}

AgentQProblem::AgentQProblem(int users, const MsbsDesc& msbs)
    : users_(users), maxBeams_(msbs.maxBeams), sectors_(msbs.sectors),
      actions_(enumerate_actions(msbs)) {
  if (actions_.empty()) throw Error(ErrorCode::EmptyInput, "mSBS has no actions");
}

void AgentQProblem::features(std::span<const double> context, std::size_t action,
                             std::span<double> out) const {
  const std::size_t head = static_cast<std::size_t>(users_ + maxBeams_);
  if (context.size() != context_dim(users_, maxBeams_) || out.size() != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "context or feature buffer has the wrong length");
  }
  std::copy(context.begin(), context.begin() + static_cast<std::ptrdiff_t>(head), out.begin());
  put_sectors(actions_.at(action), maxBeams_, sectors_, out.data() + head);
  out.back() = context.back();
}

void validate_policy(const BeamPolicy& policy, const Scenario& scenario) {
  if (policy.perMsbs.size() != scenario.msbs.size()) {
    throw Error(ErrorCode::InvalidAction, "policy has " + std::to_string(policy.perMsbs.size()) +
                                              " entries for " + std::to_string(scenario.msbs.size()) +
                                              " mSBSs");
  }
  for (std::size_t b = 0; b < policy.perMsbs.size(); ++b) {
    const SectorSet& s = policy.perMsbs[b];
    const MsbsDesc& m = scenario.msbs[b];
    if (s.size() > m.maxBeams) {
      throw Error(ErrorCode::InvalidAction, "mSBS " + std::to_string(b) + " activates " +
                                                std::to_string(s.size()) + " beams, limit " +
                                                std::to_string(m.maxBeams));
    }
    if (s.upper_bound() > m.sectors) {
      throw Error(ErrorCode::InvalidAction, "mSBS " + std::to_string(b) + " uses a sector >= " +
                                                std::to_string(m.sectors));
    }
  }
}

SlotOutcome evaluate_policy(const NetworkState& state, const BeamPolicy& policy,
                            const Scenario& scenario) {
  SlotOutcome out;
  const PerceptionReport report = sweep_and_perceive(state, policy, scenario);
  out.assoc = associate(report, scenario, state, policy);
  out.throughputBps = system_throughput(out.assoc, state.mbsDistance, scenario.radio);
  out.coverage = user_coverage(out.assoc, scenario);
  return out;
}

namespace {
constexpr int kMaxMemoMsbs = 14;
}

SlotEvaluator::SlotEvaluator(const NetworkState& state, const Scenario& scenario)
    : state_(state), scenario_(scenario) {
  users_ = state.users();
  msbs_ = scenario.msbsCount();
  memo_ = scenario.association == AssociationPolicy::MaxPower && msbs_ <= kMaxMemoMsbs;
  if (!memo_) return;
  table_.assign(static_cast<std::size_t>(users_) << msbs_, Entry{});
  mbsRate_.resize(static_cast<std::size_t>(users_));
  for (int u = 0; u < users_; ++u) {
    auto& row = mbsRate_[static_cast<std::size_t>(u)];
    row.resize(static_cast<std::size_t>(users_) + 1);
    for (int n = 0; n <= users_; ++n) {
      row[static_cast<std::size_t>(n)] =
          mbs_user_rate(state.mbsDistance[static_cast<std::size_t>(u)], n, scenario.radio);
    }
  }
  scratchPolicy_ = BeamPolicy(msbs_);
  scratchAssoc_ = AssociationState(users_, msbs_);
  scratchLoad_.assign(static_cast<std::size_t>(msbs_), 0);
}

std::uint32_t SlotEvaluator::user_mask(int u, const BeamPolicy& policy) const {
  std::uint32_t m = 0;
  for (int b = 0; b < msbs_; ++b) {
    if (policy.perMsbs[static_cast<std::size_t>(b)].contains(state_.link(u, b).sector)) m |= 1u << b;
  }
  return m;
}

const SlotEvaluator::Entry& SlotEvaluator::entry(int u, std::uint32_t mask) const {
  Entry& e = table_[(static_cast<std::size_t>(u) << msbs_) | mask];
  if (e.links >= 0) return e;
  // A policy that lights exactly the sectors over u on the masked mSBSs is
  // indistinguishable from any other policy with the same mask, as far as u
  // is concerned.
  for (int b = 0; b < msbs_; ++b) {
    SectorSet& s = scratchPolicy_.perMsbs[static_cast<std::size_t>(b)];
    s = SectorSet{};
    if ((mask >> b) & 1u) s.insert(state_.link(u, b).sector);
  }
  auto perceived = perceive_user(u, state_, scratchPolicy_, scenario_);
  const int links =
      associate_user(u, std::move(perceived), scenario_, state_, scratchPolicy_, scratchLoad_, scratchAssoc_);
  double rate = 0.0;
  for (int b = 0; b < msbs_; ++b) {
    const std::size_t i = scratchAssoc_.index(u, b);
    if (scratchAssoc_.x[i] == 0) continue;
    rate += mmwave_link_rate(scratchAssoc_.sinrDb[i], scenario_.radio);
    scratchAssoc_.x[i] = 0;
  }
  e.rate = rate;
  e.links = links;
  return e;
}

double SlotEvaluator::throughput_from_masks(std::span<const std::uint32_t> masks) const {
  thread_local std::vector<const Entry*> entries;
  entries.resize(static_cast<std::size_t>(users_));
  int nMbs = 0;
  for (int u = 0; u < users_; ++u) {
    const Entry* e = &entry(u, masks[static_cast<std::size_t>(u)]);
    entries[static_cast<std::size_t>(u)] = e;
    if (e->links == 0) ++nMbs;
  }
  double total = 0.0;
  for (int u = 0; u < users_; ++u) {
    const Entry* e = entries[static_cast<std::size_t>(u)];
    total += e->links > 0 ? e->rate : mbsRate_[static_cast<std::size_t>(u)][static_cast<std::size_t>(nMbs)];
  }
  return total;
}

double SlotEvaluator::throughput(const BeamPolicy& policy) const {
  if (!memo_) return evaluate_policy(state_, policy, scenario_).throughputBps;
  thread_local std::vector<std::uint32_t> masks;
  masks.resize(static_cast<std::size_t>(users_));
  for (int u = 0; u < users_; ++u) masks[static_cast<std::size_t>(u)] = user_mask(u, policy);
  return throughput_from_masks(masks);
}

Environment::Environment(Scenario scenario)
    : scenario_(std::move(scenario)),
      mobilityRng_(make_rng(scenario_.seed, streams::kMobility)),
      shadowRng_(make_rng(scenario_.seed, streams::kShadowing)) {
  scenario_.validate();
  Rng userRng = make_rng(scenario_.seed, streams::kUsers);
  state_ = initial_state(scenario_, userRng, shadowRng_);
}

StepResult Environment::step(const BeamPolicy& joint) {
  validate_policy(joint, scenario_);
  state_.policy = joint;
  SlotOutcome o = evaluate_policy(state_, joint, scenario_);
  state_.assoc = std::move(o.assoc);

  StepResult r;
  r.throughputBps = system_throughput(state_, scenario_);
  r.coverage = user_coverage(state_, scenario_);
  r.rewards.assign(scenario_.msbs.size(), r.throughputBps);
  if (checkConstraints_) {
    assert_constraints(state_, scenario_);
    ++checkedSlots_;
  }
  r.served = state_;
  advance();
  return r;
}

void Environment::idle() {
  state_.policy = BeamPolicy(scenario_.msbsCount());
  state_.assoc = AssociationState(scenario_.users, scenario_.msbsCount());
  advance();
}

void Environment::advance() {
  const std::int64_t next = state_.slot + 1;
  if (scenario_.shadowing == ShadowingMode::PerSlot) redraw_shadowing(state_, scenario_, shadowRng_);
  state_ = advance_users(std::move(state_), scenario_, mobilityRng_);
  state_.slot = next;
}

}  // namespace bmfl
