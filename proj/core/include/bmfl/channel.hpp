#pragma once

// Microwave / mmWave propagation, noise and SINR. Every function here is pure
// and reentrant.
//
// The microwave channel gain h(d) is a dB quantity, so the macro-cell SINR is
// evaluated as (transmit power dBm - h(d) dB) against the noise floor.
// Small-scale fading is fixed to 0 dB.

#include <limits>

#include "bmfl/types.hpp"

namespace bmfl {

inline constexpr double kThermalNoiseDbmPerHz = -174.0;
inline constexpr double kNoInterference = -std::numeric_limits<double>::infinity();

struct LinkBudget {
  double rxPowerDbm = 0.0;
  double sinrDb = 0.0;
  double interferenceDbm = kNoInterference;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// Distances are clamped to >= 1 m before any log10.
double clamp_distance(double d);

double microwave_gain(double d, const RadioConstants& c);
double mmwave_pathloss(double d, double shadowingDb, const RadioConstants& c);
double noise_power_dbm(double bandwidthHz, const RadioConstants& c);

// Received power of a data link: p + G_T + G_R - PL.
double mmwave_rx_power_dbm(double d, double shadowingDb, const RadioConstants& c);
// Sweep power seen by a user listening in omni mode (no receive gain).
double mmwave_sweep_power_dbm(double d, double shadowingDb, const RadioConstants& c);

// The MBS splits W_mbs evenly over its users, so there is no co-channel
// interference and SINR equals SNR.
LinkBudget sinr_mbs(double d, int nUsersOnMbs, const RadioConstants& c);

// SINR of the link from `servingMsbs` to `user` under `policy`. In Full mode
// every other mSBS whose active beam covers the user's direction adds its
// received power to the denominator; SnrOnly uses noise alone.
// Throws NotCovered if no active beam of `servingMsbs` covers the user.
LinkBudget sinr_mmwave(int user, int servingMsbs, const NetworkState& state,
                       const BeamPolicy& policy, const Scenario& scenario, InterferenceMode mode);
LinkBudget sinr_mmwave(int user, int servingMsbs, const NetworkState& state,
                       const Scenario& scenario, InterferenceMode mode);

}  // namespace bmfl
