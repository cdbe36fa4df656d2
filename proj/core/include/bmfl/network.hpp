#pragma once

// Topology, sector geometry, user mobility, per-user rate and the system
// level metrics (throughput, multi-association coverage, densities).

#include <string>
#include <vector>

#include "bmfl/types.hpp"

namespace bmfl {

enum class Placement { Uniform, Grid };

// Sector 0 starts at 0 degrees (east); sectors run counterclockwise and split
// 360 degrees evenly.
int sector_of(Vec2 user, const MsbsDesc& msbs);

// Replaces scenario.msbs with `count` stations. Uniform placement draws from
// the scenario seed; Grid puts them at the centers of a near-square grid.
void place_msbs(Scenario& scenario, int count, Placement placement, int sectors, int maxBeams,
                double coverageRadius);

// Users uniformly distributed in the area, shadowing drawn, empty policy.
NetworkState initial_state(const Scenario& scenario, Rng& userRng, Rng& shadowRng);

// Recomputes the link table from positions and the shadowing table.
void refresh_links(NetworkState& state, const Scenario& scenario);
void redraw_shadowing(NetworkState& state, const Scenario& scenario, Rng& shadowRng);

// One mobility step of slotSeconds. Positions stay inside the area
// (random walk reflects at the boundary).
NetworkState advance_users(NetworkState state, const Scenario& scenario, Rng& rng);

// W_mm * log2(1 + SINR) for one mmWave link.
double mmwave_link_rate(double sinrDb, const RadioConstants& c);
// (W_mbs / N_mbs) * log2(1 + SINR) for a user served by the MBS alone.
double mbs_user_rate(double d, int nUsersOnMbs, const RadioConstants& c);

// Rate of user u in bit/s from the association cached in `state`.
double user_rate(int u, const NetworkState& state, const RadioConstants& c);
double system_throughput(const NetworkState& state, const Scenario& scenario);
double system_throughput(const AssociationState& assoc, const std::vector<double>& mbsDistance,
                         const RadioConstants& c);

// sum_b N_b / (U * min(B, B_u^max)).
double user_coverage(const AssociationState& assoc, const Scenario& scenario);
double user_coverage(const NetworkState& state, const Scenario& scenario);

struct Densities {
  double usersPerKm2 = 0.0;
  double msbsPerKm2 = 0.0;
};
Densities densities(const Scenario& scenario);

// Returns one message per violated constraint: beam budget, SINR floor on
// active links, association cap, binary indicators and serving-sector
// consistency. Empty means the slot is feasible.
std::vector<std::string> check_constraints(const NetworkState& state, const Scenario& scenario);
// Throws ConstraintViolation listing every violation.
void assert_constraints(const NetworkState& state, const Scenario& scenario);

}  // namespace bmfl
