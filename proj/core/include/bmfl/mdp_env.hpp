#pragma once

// Per-mSBS decision process: observations, the fixed-size sector-subset
// action space, feature encoding for the state-action Q-network and the slot
// transition every scheme drives.

#include <cstdint>
#include <span>
#include <vector>

#include "bmfl/deepq.hpp"
#include "bmfl/types.hpp"

namespace bmfl {

using AgentAction = SectorSet;

std::uint64_t binomial(int n, int k);

// Every subset of [0, S_b) with exactly M_b sectors, lexicographic by the
// ascending sector list.
std::vector<AgentAction> enumerate_actions(const MsbsDesc& msbs);

struct AgentState {
  std::vector<std::uint8_t> servingUsers;  // length U
  SectorSet ownSectors;
  double otherOccupied = 0.0;  // active sectors of the other mSBSs / their sector total
};

// Serving users are those linked to b in the last served slot. A non-empty
// `participants` mask (length U) zeroes everyone outside it.
AgentState observe(const NetworkState& state, const Scenario& scenario, int b,
                   std::span<const std::uint8_t> participants = {});

inline std::size_t context_dim(int users, int maxBeams) {
  return static_cast<std::size_t>(users + maxBeams + 1);
}
inline std::size_t feature_dim(int users, int maxBeams) {
  return static_cast<std::size_t>(users + 2 * maxBeams + 1);
}

// Action-independent part of the features:
// [U indicators | M_b own sectors / S_b, ascending, -1 padded | occupied fraction]
std::vector<double> context_of(const AgentState& s, const Scenario& scenario, const MsbsDesc& msbs);

// [U indicators | M_b own sectors | M_b action sectors | occupied fraction],
// sector slots normalized by S_b. Throws DimensionMismatch when the indicator
// length differs from the scenario's U.
std::vector<double> encode(const AgentState& s, const AgentAction& action, const Scenario& scenario,
                           const MsbsDesc& msbs);

// Q-problem of one mSBS over its C(S_b, M_b) actions. The context is the
// output of context_of.
class AgentQProblem : public QProblem {
 public:
  AgentQProblem(int users, const MsbsDesc& msbs);

  std::size_t input_dim() const override { return feature_dim(users_, maxBeams_); }
  std::size_t action_count() const override { return actions_.size(); }
  void features(std::span<const double> context, std::size_t action,
                std::span<double> out) const override;

  const std::vector<AgentAction>& actions() const { return actions_; }
  const AgentAction& action(std::size_t i) const { return actions_.at(i); }
  int users() const { return users_; }

 private:
  int users_;
  int maxBeams_;
  int sectors_;
  std::vector<AgentAction> actions_;
};

// Throws InvalidAction if some pi_b has more than M_b sectors or an index
// outside [0, S_b), or the policy size differs from B.
void validate_policy(const BeamPolicy& policy, const Scenario& scenario);

struct SlotOutcome {
  AssociationState assoc;
  double throughputBps = 0.0;
  double coverage = 0.0;
};

// Sweep, perception and association under `policy` on the positions of
// `state`, then throughput and coverage.
SlotOutcome evaluate_policy(const NetworkState& state, const BeamPolicy& policy,
                            const Scenario& scenario);

// Throughput of many candidate policies on one slot. Under max-power ranking a
// user's links depend only on which mSBSs have an active sector over it, so
// the per-user result is memoized on that B-bit mask; the values are bit-equal
// to evaluate_policy. Load-balance ranking couples users and is evaluated
// directly. Not thread-safe.
class SlotEvaluator {
 public:
  SlotEvaluator(const NetworkState& state, const Scenario& scenario);

  double throughput(const BeamPolicy& policy) const;
  // Same, from precomputed per-user coverage masks (bit b = mSBS b covers u).
  double throughput_from_masks(std::span<const std::uint32_t> masks) const;
  std::uint32_t user_mask(int u, const BeamPolicy& policy) const;
  bool memoized() const { return memo_; }
  int sector(int u, int b) const { return state_.link(u, b).sector; }

 private:
  struct Entry {
    double rate = 0.0;  // sum of mmWave link rates
    int links = -1;     // -1 = not computed
  };
  const Entry& entry(int u, std::uint32_t mask) const;

  const NetworkState& state_;
  const Scenario& scenario_;
  bool memo_ = false;
  int users_ = 0;
  int msbs_ = 0;
  mutable std::vector<Entry> table_;           // users * 2^B
  std::vector<std::vector<double>> mbsRate_;   // [u][n] for n = 0..U
  mutable BeamPolicy scratchPolicy_;
  mutable AssociationState scratchAssoc_;
  mutable std::vector<int> scratchLoad_;
};

struct StepResult {
  NetworkState served;          // slot t with pi(t) and x(t) applied
  std::vector<double> rewards;  // R(t), one per mSBS (all equal)
  double throughputBps = 0.0;
  double coverage = 0.0;
};

// Owns a scenario and its evolving state. Mobility and shadowing use their
// own seeded streams, so every scheme sees the same user trajectory.
class Environment {
 public:
  explicit Environment(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  const NetworkState& state() const { return state_; }
  std::int64_t slot() const { return state_.slot; }

  // Applies the joint action, associates, computes the shared reward, checks
  // feasibility of the served slot, then moves users. Throws InvalidAction.
  StepResult step(const BeamPolicy& joint);
  // Moves users one slot without serving them.
  void idle();

  void set_check_constraints(bool on) { checkConstraints_ = on; }
  std::int64_t checkedSlots() const { return checkedSlots_; }

 private:
  void advance();

  Scenario scenario_;
  NetworkState state_;
  Rng mobilityRng_;
  Rng shadowRng_;
  bool checkConstraints_ = true;
  std::int64_t checkedSlots_ = 0;
};

}  // namespace bmfl
