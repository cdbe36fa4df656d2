#pragma once

// Three-phase microwave-assisted mmWave association: every mSBS sweeps only
// its active sectors, users keep the beams they perceive above the power
// threshold, then each user greedily attaches to up to B_u^max mSBSs whose
// link clears the SINR threshold. Users left without a link fall back to the
// MBS.

#include <vector>

#include "bmfl/types.hpp"

namespace bmfl {

struct PerceptionEntry {
  int msbs = 0;
  int sector = 0;
  double zetaDbm = 0.0;
};

struct PerceptionReport {
  // Entries per user, all with zeta >= varsigma. At most one entry per
  // (user, mSBS) because a user lies in exactly one sector of each mSBS.
  std::vector<std::vector<PerceptionEntry>> perUser;

  // B_u^can(t): distinct mSBS ids, ascending.
  std::vector<int> candidates(int u) const;
};

// Entries perceived by user u alone.
std::vector<PerceptionEntry> perceive_user(int u, const NetworkState& state,
                                           const BeamPolicy& policy, const Scenario& scenario);
PerceptionReport sweep_and_perceive(const NetworkState& state, const BeamPolicy& policy,
                                    const Scenario& scenario);
PerceptionReport sweep_and_perceive(const NetworkState& state, const Scenario& scenario);

// y = k1 * zeta/varsigma + k2 * U/load with the power ratio in milliwatts.
// A load of 0 counts as 1.
double balance_score(double zetaDbm, double varsigmaDbm, int loadB, int users,
                     const BalanceWeights& w);

// Greedy multiple association driven by `report` under `policy`.
// MaxPower ranks candidates by zeta (ties: lower mSBS id, then lower sector);
// LoadBalance ranks by balance_score against the loads accumulated so far in
// this pass (users are processed in index order).
AssociationState associate(const PerceptionReport& report, const Scenario& scenario,
                           const NetworkState& state, const BeamPolicy& policy);
AssociationState associate(const PerceptionReport& report, const Scenario& scenario,
                           const NetworkState& state);

// The per-user step of associate: fills row u of `out` from `perceived` and
// bumps `load` for every admitted link. Returns the number of links made.
int associate_user(int u, std::vector<PerceptionEntry> perceived, const Scenario& scenario,
                   const NetworkState& state, const BeamPolicy& policy, std::vector<int>& load,
                   AssociationState& out);

}  // namespace bmfl
