#pragma once

// Federated beam-management training: data cleaning, the local model
// correction at the start of each round, tau slots of local DDQN training
// per mSBS and data-weighted aggregation at the MBS.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bmfl/deepq.hpp"
#include "bmfl/mdp_env.hpp"
#include "bmfl/types.hpp"

namespace bmfl {

// Participation counts of one mSBS: n_u per user and N_total trainings.
struct ParticipationLedger {
  std::vector<std::int64_t> perUser;
  std::int64_t total = 0;

  ParticipationLedger() = default;
  explicit ParticipationLedger(int users) : perUser(static_cast<std::size_t>(users), 0) {}

  // n_u / N_total, 0 before the first training.
  double frequency(int u) const;
};

// Users within rho_b whose participation frequency is at most eta. Updates
// the ledger (n_u += 1 for the selected, N_total += 1) and returns a length-U
// membership mask.
std::vector<std::uint8_t> clean_data(const MsbsDesc& msbs, std::span<const Vec2> users,
                                     ParticipationLedger& ledger, double eta);

// theta = global - (lambda / Kb) * gradient. An empty gradient (no history)
// copies the global model. Throws ShapeMismatch.
ModelWeights local_update(const ModelWeights& global, std::span<const double> gradient,
                          double lambda, double Kb);

// sum_b (K_b / K) theta_b. Inputs are combined in a canonical order so the
// result does not depend on their order, and every parameter is kept inside
// the hull of the inputs. Throws EmptyInput, ZeroData or ShapeMismatch.
ModelWeights aggregate(std::span<const ModelWeights> models, std::span<const double> counts);

enum class DataCount { ParticipantWeighted, Slots };

struct FederationConfig {
  int rounds = 50;           // J
  int slotsPerRound = 10;    // tau
  double eta = 0.8;
  DataCount dataCount = DataCount::ParticipantWeighted;
  // Multiplies R(t) before it enters the learner; <= 0 means one over
  // min(B, B_u^max) * W_mm * log2(1 + SNR at 1 m), so R(t) is counted in
  // peak single-user rates.
  double rewardScale = 0.0;
  bool aggregate = true;     // false: every mSBS keeps its own model

  void validate() const;
};

double reward_scale(const FederationConfig& cfg, const Scenario& scenario);

struct TraceRow {
  int round = 0;
  int slot = 0;        // global slot index
  int msbsId = 0;
  double loss = 0.0;
  double reward = 0.0;  // unscaled R(t)
  double coverage = 0.0;
  double throughputBps = 0.0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
  // Mean training loss over agents, one entry per slot.
  std::vector<double> iterationLoss;
};

struct TrainingResult {
  TrainingTrace trace;
  ModelWeights global;                    // g_J (unused without aggregation)
  std::vector<ModelWeights> localModels;  // theta_b at the end of round J
  std::vector<std::vector<double>> lastGradients;
  std::vector<double> dataCounts;         // K_b of the final round
  std::vector<ParticipationLedger> ledgers;
  std::vector<std::vector<std::uint8_t>> participants;  // final round masks
  BeamPolicy finalPolicy;                 // last joint action taken
  int aggregations = 0;
  std::int64_t envSlots = 0;
};

// Runs J rounds on `env`, which keeps advancing and can be evaluated after.
TrainingResult run_bmfl(Environment& env, const Hyperparams& hp, const FederationConfig& cfg);
TrainingResult run_bmfl(const Scenario& scenario, const Hyperparams& hp, const FederationConfig& cfg);

// Models each mSBS deploys after training: the round-start correction applied
// to the broadcast model (or the mSBS's own model without aggregation).
std::vector<ModelWeights> deployed_models(const TrainingResult& r, const Hyperparams& hp,
                                          bool aggregated);

// Greedy joint action of per-mSBS models on the current state.
BeamPolicy greedy_joint_policy(const NetworkState& state, const Scenario& scenario,
                               std::span<const ModelWeights> models,
                               std::span<const std::vector<std::uint8_t>> participants);

// J * (B * U + tau).
std::int64_t complexity_estimate(const Scenario& scenario, int J, int tau);

// header: round,slot,msbsId,loss,reward,coverage,throughputBps
void write_trace_csv(std::ostream& os, const TrainingTrace& trace, bool header = true);

}  // namespace bmfl
