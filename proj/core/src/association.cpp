#include "bmfl/association.hpp"

#include <algorithm>

#include "bmfl/channel.hpp"

namespace bmfl {

std::vector<int> PerceptionReport::candidates(int u) const {
  std::vector<int> out;
  for (const auto& e : perUser[static_cast<std::size_t>(u)]) out.push_back(e.msbs);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<PerceptionEntry> perceive_user(int u, const NetworkState& state,
                                           const BeamPolicy& policy, const Scenario& scenario) {
  std::vector<PerceptionEntry> entries;
  const int msbs = scenario.msbsCount();
  for (int b = 0; b < msbs; ++b) {
    const LinkEntry& e = state.link(u, b);
    if (!e.inRange) continue;
    if (!policy.perMsbs[static_cast<std::size_t>(b)].contains(e.sector)) continue;
    if (e.zetaDbm < scenario.powerThresholdDbm) continue;
    entries.push_back(PerceptionEntry{b, e.sector, e.zetaDbm});
  }
  return entries;
}

PerceptionReport sweep_and_perceive(const NetworkState& state, const BeamPolicy& policy,
                                    const Scenario& scenario) {
  PerceptionReport report;
  const int users = state.users();
  report.perUser.resize(static_cast<std::size_t>(users));
  for (int u = 0; u < users; ++u) {
    report.perUser[static_cast<std::size_t>(u)] = perceive_user(u, state, policy, scenario);
  }
  return report;
}

PerceptionReport sweep_and_perceive(const NetworkState& state, const Scenario& scenario) {
  return sweep_and_perceive(state, state.policy, scenario);
}

double balance_score(double zetaDbm, double varsigmaDbm, int loadB, int users,
                     const BalanceWeights& w) {
  const double powerRatio = db_to_linear(zetaDbm) / db_to_linear(varsigmaDbm);
  const int load = std::max(loadB, 1);
  return w.k1 * powerRatio + w.k2 * static_cast<double>(users) / load;
}

namespace {

bool ranks_before(const PerceptionEntry& a, const PerceptionEntry& b) {
  if (a.zetaDbm != b.zetaDbm) return a.zetaDbm > b.zetaDbm;
  if (a.msbs != b.msbs) return a.msbs < b.msbs;
  return a.sector < b.sector;
}

}  // namespace

int associate_user(int u, std::vector<PerceptionEntry> remaining, const Scenario& scenario,
                   const NetworkState& state, const BeamPolicy& policy, std::vector<int>& load,
                   AssociationState& out) {
  if (scenario.association == AssociationPolicy::MaxPower) {
    std::sort(remaining.begin(), remaining.end(), ranks_before);
  }
  int links = 0;
  std::size_t next = 0;  // MaxPower walks the sorted list in order
  while (links < scenario.maxLinksPerUser) {
    PerceptionEntry chosen;
    if (scenario.association == AssociationPolicy::MaxPower) {
      if (next == remaining.size()) break;
      chosen = remaining[next++];
    } else {
      if (remaining.empty()) break;
      std::size_t pick = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        const auto& c = remaining[i];
        const double y =
            balance_score(c.zetaDbm, scenario.powerThresholdDbm,
                          load[static_cast<std::size_t>(c.msbs)], out.users, scenario.balance);
        if (y > best || (y == best && ranks_before(c, remaining[pick]))) {
          best = y;
          pick = i;
        }
      }
      chosen = remaining[pick];
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    }

    const LinkBudget lb =
        sinr_mmwave(u, chosen.msbs, state, policy, scenario, scenario.interference);
    if (lb.sinrDb >= scenario.sinrThresholdDb) {
      const std::size_t i = out.index(u, chosen.msbs);
      out.x[i] = 1;
      out.servingSector[i] = chosen.sector;
      out.sinrDb[i] = lb.sinrDb;
      ++load[static_cast<std::size_t>(chosen.msbs)];
      ++links;
    }
  }
  return links;
}

AssociationState associate(const PerceptionReport& report, const Scenario& scenario,
                           const NetworkState& state, const BeamPolicy& policy) {
  const int users = state.users();
  const int msbs = scenario.msbsCount();
  AssociationState out(users, msbs);
  std::vector<int> load(static_cast<std::size_t>(msbs), 0);
  for (int u = 0; u < users; ++u) {
    associate_user(u, report.perUser[static_cast<std::size_t>(u)], scenario, state, policy, load,
                   out);
  }
  return out;
}

AssociationState associate(const PerceptionReport& report, const Scenario& scenario,
                           const NetworkState& state) {
  return associate(report, scenario, state, state.policy);
}

}  // namespace bmfl
