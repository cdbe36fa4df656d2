#pragma once

// Hand-built scenarios and states plus oracles that recompute quantities
// from first principles (linear power domain, plain nested loops) instead of
// calling the library's own helpers.

#include <cmath>
#include <functional>
#include <vector>

#include "bmfl/association.hpp"
#include "bmfl/mdp_env.hpp"
#include "bmfl/network.hpp"
#include "bmfl/types.hpp"

namespace bmfl::test {

inline MsbsDesc msbs_at(int id, Vec2 p, int sectors = 8, int beams = 3, double radius = 50.0) {
  MsbsDesc m;
  m.id = id;
  m.position = p;
  m.sectors = sectors;
  m.maxBeams = beams;
  m.coverageRadius = radius;
  return m;
}

// Scenario with explicit mSBS list and user count; default radio constants.
inline Scenario scenario_with(std::vector<MsbsDesc> msbs, int users) {
  Scenario sc;
  sc.msbs = std::move(msbs);
  sc.users = users;
  return sc;
}

// State at the given positions with zero (or supplied) shadowing.
inline NetworkState state_at(const Scenario& sc, std::vector<Vec2> users,
                             std::vector<double> shadowing = {}) {
  NetworkState s;
  s.userPositions = std::move(users);
  s.policy = BeamPolicy(sc.msbsCount());
  s.assoc = AssociationState(s.users(), sc.msbsCount());
  const std::size_t n = static_cast<std::size_t>(s.users()) * static_cast<std::size_t>(sc.msbsCount());
  s.shadowingDb = shadowing.empty() ? std::vector<double>(n, 0.0) : std::move(shadowing);
  refresh_links(s, sc);
  return s;
}

// Deterministic default-shape scenario for property tests.
inline Scenario random_scenario(std::uint64_t seed, int msbs, int sectors, int beams, int users) {
  Scenario sc;
  sc.users = users;
  sc.seed = seed;
  place_msbs(sc, msbs, Placement::Uniform, sectors, beams, 50.0);
  return sc;
}

inline NetworkState random_state(const Scenario& sc) {
  Rng ur = make_rng(sc.seed, streams::kUsers);
  Rng sr = make_rng(sc.seed, streams::kShadowing);
  return initial_state(sc, ur, sr);
}

inline double mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double dbm(double milliwatts) { return 10.0 * std::log10(milliwatts); }

// Thermal noise in mW over `hz`: kT = -174 dBm/Hz, times the noise figure.
inline double noise_mw(double hz, const RadioConstants& c) {
  return std::pow(10.0, -17.4) * hz * std::pow(10.0, c.noiseFigure / 10.0);
}

// Received data-link power in mW: p * G_T * G_R / (10^(alpha/10) d^beta 10^(xi/10)).
inline double rx_mw(double d, double xi, const RadioConstants& c) {
  d = std::max(d, 1.0);
  const double num = mw(c.pSbs) * std::pow(10.0, c.gT / 10.0) * std::pow(10.0, c.gR / 10.0);
  const double loss = std::pow(10.0, c.alpha / 10.0) * std::pow(d, c.beta) * std::pow(10.0, xi / 10.0);
  return num / loss;
}

// Full-interference SINR of (u, b) under `policy`, recomputed from positions.
inline double sinr_oracle_db(const Scenario& sc, const NetworkState& s, const BeamPolicy& policy,
                             int u, int b, bool interference) {
  const auto& c = sc.radio;
  const auto idx = [&](int k) { return static_cast<std::size_t>(u) * sc.msbs.size() + static_cast<std::size_t>(k); };
  const Vec2 p = s.userPositions[static_cast<std::size_t>(u)];
  const double sig = rx_mw(distance(p, sc.msbs[static_cast<std::size_t>(b)].position), s.shadowingDb[idx(b)], c);
  double denom = noise_mw(c.wMm, c);
  if (interference) {
    for (int k = 0; k < sc.msbsCount(); ++k) {
      if (k == b) continue;
      const MsbsDesc& m = sc.msbs[static_cast<std::size_t>(k)];
      const double ang = std::atan2(p.y - m.position.y, p.x - m.position.x);
      double deg = ang * 180.0 / 3.14159265358979323846;
      if (deg < 0) deg += 360.0;
      const int sector = std::min(m.sectors - 1, static_cast<int>(deg / (360.0 / m.sectors)));
      if (policy.perMsbs[static_cast<std::size_t>(k)].contains(sector)) {
        denom += rx_mw(distance(p, m.position), s.shadowingDb[idx(k)], c);
      }
    }
  }
  return 10.0 * std::log10(sig / denom);
}

// All size-M subsets of [0, S) by plain recursion (no bit tricks).
inline void subsets(int S, int M, int start, std::vector<int>& cur, std::vector<SectorSet>& out) {
  if (static_cast<int>(cur.size()) == M) {
    SectorSet s;
    for (int v : cur) s.insert(v);
    out.push_back(s);
    return;
  }
  for (int i = start; i < S; ++i) {
    cur.push_back(i);
    subsets(S, M, i + 1, cur, out);
    cur.pop_back();
  }
}

inline std::vector<SectorSet> subsets(int S, int M) {
  std::vector<SectorSet> out;
  std::vector<int> cur;
  subsets(S, M, 0, cur, out);
  return out;
}

// Exhaustive search by recursion over mSBSs, scoring with evaluate_policy.
// Returns the first policy (lexicographic, mSBS 0 outermost) attaining the max.
inline BeamPolicy nested_loop_bfs(const NetworkState& s, const Scenario& sc, double* bestOut = nullptr) {
  const int B = sc.msbsCount();
  std::vector<std::vector<SectorSet>> opts;
  for (const auto& m : sc.msbs) opts.push_back(subsets(m.sectors, m.maxBeams));
  BeamPolicy cur(B);
  BeamPolicy best(B);
  double bestR = -1.0;
  std::function<void(int)> rec = [&](int b) {
    if (b == B) {
      const double r = evaluate_policy(s, cur, sc).throughputBps;
      if (r > bestR) {
        bestR = r;
        best = cur;
      }
      return;
    }
    for (const auto& o : opts[static_cast<std::size_t>(b)]) {
      cur.perMsbs[static_cast<std::size_t>(b)] = o;
      rec(b + 1);
    }
  };
  rec(0);
  if (bestOut) *bestOut = bestR;
  return best;
}

}  // namespace bmfl::test
