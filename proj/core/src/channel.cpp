#include "bmfl/channel.hpp"

#include <algorithm>
#include <string>

#include "bmfl/error.hpp"

namespace bmfl {

double clamp_distance(double d) { return std::max(d, 1.0); }

double microwave_gain(double d, const RadioConstants& c) {
  return c.kappa + 10.0 * c.rho * std::log10(clamp_distance(d));
}

double mmwave_pathloss(double d, double shadowingDb, const RadioConstants& c) {
  return c.alpha + 10.0 * c.beta * std::log10(clamp_distance(d)) + shadowingDb;
}

double noise_power_dbm(double bandwidthHz, const RadioConstants& c) {
  return kThermalNoiseDbmPerHz + 10.0 * std::log10(bandwidthHz) + c.noiseFigure;
}

double mmwave_rx_power_dbm(double d, double shadowingDb, const RadioConstants& c) {
  return c.pSbs + c.gT + c.gR - mmwave_pathloss(d, shadowingDb, c);
}

double mmwave_sweep_power_dbm(double d, double shadowingDb, const RadioConstants& c) {
  return c.pSbs + c.gT - mmwave_pathloss(d, shadowingDb, c);
}

LinkBudget sinr_mbs(double d, int nUsersOnMbs, const RadioConstants& c) {
  const int n = std::max(nUsersOnMbs, 1);
  LinkBudget lb;
  lb.rxPowerDbm = c.pMbs - microwave_gain(d, c);
  lb.sinrDb = lb.rxPowerDbm - noise_power_dbm(c.wMbs / n, c);
  lb.interferenceDbm = kNoInterference;
  return lb;
}

LinkBudget sinr_mmwave(int user, int servingMsbs, const NetworkState& state,
                       const BeamPolicy& policy, const Scenario& scenario, InterferenceMode mode) {
  const LinkEntry& serving = state.link(user, servingMsbs);
  if (!policy.perMsbs[static_cast<std::size_t>(servingMsbs)].contains(serving.sector)) {
    throw Error(ErrorCode::NotCovered, "user " + std::to_string(user) +
                                           " is not covered by an active beam of mSBS " +
                                           std::to_string(servingMsbs));
  }
  const double noiseDbm = noise_power_dbm(scenario.radio.wMm, scenario.radio);
  LinkBudget lb;
  lb.rxPowerDbm = serving.rxDbm;
  if (mode == InterferenceMode::SnrOnly) {
    lb.sinrDb = serving.rxDbm - noiseDbm;
    return lb;
  }
  double interferenceMw = 0.0;
  const int msbsCount = state.msbsCount();
  for (int k = 0; k < msbsCount; ++k) {
    if (k == servingMsbs) continue;
    const LinkEntry& other = state.link(user, k);
    if (policy.perMsbs[static_cast<std::size_t>(k)].contains(other.sector)) {
      interferenceMw += other.rxMw;
    }
  }
  if (interferenceMw > 0.0) {
    lb.interferenceDbm = linear_to_db(interferenceMw);
    lb.sinrDb = serving.rxDbm - linear_to_db(db_to_linear(noiseDbm) + interferenceMw);
  } else {
    lb.sinrDb = serving.rxDbm - noiseDbm;
  }
  return lb;
}

LinkBudget sinr_mmwave(int user, int servingMsbs, const NetworkState& state,
                       const Scenario& scenario, InterferenceMode mode) {
  return sinr_mmwave(user, servingMsbs, state, state.policy, scenario, mode);
}

}  // namespace bmfl
