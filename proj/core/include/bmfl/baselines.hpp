#pragma once

// Comparison schemes and the train-then-evaluate protocol shared by all of
// them. BFS and EDB search the current slot directly; BMDL is federated
// training without aggregation; BMCL trains one centralized learner over
// the joint action.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bmfl/deepq.hpp"
#include "bmfl/federation.hpp"
#include "bmfl/mdp_env.hpp"
#include "bmfl/types.hpp"

namespace bmfl {

enum class SchemeId { BMFL, BFS, EDB, BMDL, BMCL };

std::string_view to_string(SchemeId s);
std::optional<SchemeId> parse_scheme(std::string_view name);  // case-insensitive
inline constexpr SchemeId kAllSchemes[] = {SchemeId::BMFL, SchemeId::BFS, SchemeId::EDB,
                                           SchemeId::BMDL, SchemeId::BMCL};

inline constexpr std::uint64_t kDefaultBfsBudget = 1'000'000;

// prod_b C(S_b, M_b), saturating at UINT64_MAX.
std::uint64_t joint_action_count(const Scenario& scenario);

// Exhaustive search over every joint assignment of M_b sectors per mSBS,
// lexicographic with mSBS 0 most significant; the first maximizer wins.
// Throws BudgetExceeded (message carries the required count).
BeamPolicy bfs_policy(const NetworkState& state, const Scenario& scenario,
                      std::uint64_t budget = kDefaultBfsBudget);

// {o, o + d, o + 2d, ...} mod S_b with d = floor(S_b / M_b), M_b sectors.
SectorSet edb_sectors(const MsbsDesc& msbs, int offset);
int edb_offset_count(const MsbsDesc& msbs);
// Offsets start at 0; each mSBS in turn takes the offset that maximizes R(t)
// with the others fixed (ties: lowest offset).
BeamPolicy edb_policy(const NetworkState& state, const Scenario& scenario);

// Federated training with aggregation replaced by the identity.
TrainingResult bmdl_trainer(Environment& env, const Hyperparams& hp, FederationConfig cfg);
TrainingResult bmdl_trainer(const Scenario& scenario, const Hyperparams& hp, FederationConfig cfg);

// Centralized learner at the MBS. The context concatenates every mSBS's
// context; the action is the joint policy, indexed mixed-radix with mSBS 0
// most significant. When the joint count exceeds `actionBudget` the argmax is
// replaced by a coordinate pass (one mSBS at a time, others fixed) over the
// same shared network.
class JointQProblem : public QProblem {
 public:
  JointQProblem(const Scenario& scenario, std::uint64_t actionBudget);

  std::size_t input_dim() const override { return inputDim_; }
  std::size_t action_count() const override { return actionCount_; }
  void features(std::span<const double> context, std::size_t action,
                std::span<double> out) const override;
  std::size_t greedy_action(std::span<const double> context, const ModelWeights& w) const override;

  bool fallback() const { return fallback_; }
  std::size_t context_dim() const { return contextDim_; }
  std::vector<std::size_t> decode(std::size_t action) const;
  std::size_t encode_index(std::span<const std::size_t> perMsbs) const;
  BeamPolicy policy(std::size_t action) const;
  std::vector<double> context(const NetworkState& state, const Scenario& scenario,
                              std::span<const std::vector<std::uint8_t>> participants) const;

 private:
  std::vector<AgentQProblem> agents_;
  std::vector<std::size_t> radix_;
  std::vector<std::size_t> ctxDims_;
  std::size_t contextDim_ = 0;
  std::size_t inputDim_ = 0;
  std::size_t actionCount_ = 0;
  bool fallback_ = false;
};

struct BmclResult {
  TrainingTrace trace;
  ModelWeights model;
  std::vector<std::vector<std::uint8_t>> participants;
  bool fallback = false;
  std::uint64_t jointActions = 0;
  std::int64_t envSlots = 0;
};

inline constexpr std::uint64_t kDefaultBmclActionBudget = 256;

BmclResult bmcl_trainer(Environment& env, const Hyperparams& hp, const FederationConfig& cfg,
                        std::uint64_t actionBudget = kDefaultBmclActionBudget);
BmclResult bmcl_trainer(const Scenario& scenario, const Hyperparams& hp, const FederationConfig& cfg,
                        std::uint64_t actionBudget = kDefaultBmclActionBudget);

struct SchemeOptions {
  FederationConfig fed;
  int evalSlots = 20;
  std::uint64_t bfsBudget = kDefaultBfsBudget;
  std::uint64_t bmclActionBudget = kDefaultBmclActionBudget;
};

struct EvalSlot {
  std::int64_t slot = 0;
  double throughputBps = 0.0;
  double coverage = 0.0;
  BeamPolicy policy;
};

struct SchemeOutcome {
  SchemeId scheme = SchemeId::BMFL;
  std::vector<EvalSlot> eval;
  double meanCoverage = 0.0;
  double meanThroughputBps = 0.0;
  double meanLossFinal = 0.0;  // NaN for schemes that do not train
  TrainingTrace trace;
  bool bmclFallback = false;
  std::int64_t checkedSlots = 0;
  std::int64_t envSlots = 0;  // slots simulated, training window included
};

// Learning schemes train for J * tau slots; the others let users move for the
// same number of slots. Then every scheme acts greedily for evalSlots slots
// on the identical trajectory and reports the mean coverage and throughput.
SchemeOutcome run_scheme(SchemeId scheme, const Scenario& scenario, const Hyperparams& hp,
                         const SchemeOptions& opt);

// Mean of the last ceil(10%) entries.
double tail_mean(const std::vector<double>& v, double fraction = 0.1);
double head_mean(const std::vector<double>& v, double fraction = 0.1);

}  // namespace bmfl
