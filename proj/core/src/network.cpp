#include "bmfl/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bmfl/channel.hpp"
#include "bmfl/error.hpp"

namespace bmfl {

int sector_of(Vec2 user, const MsbsDesc& msbs) {
  const double dx = user.x - msbs.position.x;
  const double dy = user.y - msbs.position.y;
  double deg = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  const int idx = static_cast<int>(std::floor(msbs.sectors * deg / 360.0));
  return std::clamp(idx, 0, msbs.sectors - 1);
}

void place_msbs(Scenario& scenario, int count, Placement placement, int sectors, int maxBeams,
                double coverageRadius) {
  scenario.msbs.clear();
  scenario.msbs.reserve(static_cast<std::size_t>(std::max(count, 0)));
  Rng rng = make_rng(scenario.seed, streams::kPlacement);
  std::uniform_real_distribution<double> ux(0.0, scenario.area.x);
  std::uniform_real_distribution<double> uy(0.0, scenario.area.y);
  const int cols = count > 0 ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))) : 1;
  const int rows = count > 0 ? (count + cols - 1) / cols : 1;
  for (int i = 0; i < count; ++i) {
    MsbsDesc m;
    m.id = i;
    m.sectors = sectors;
    m.maxBeams = maxBeams;
    m.coverageRadius = coverageRadius;
    if (placement == Placement::Uniform) {
      m.position.x = ux(rng);
      m.position.y = uy(rng);
    } else {
      const int r = i / cols;
      const int c = i % cols;
      m.position.x = scenario.area.x * (c + 0.5) / cols;
      m.position.y = scenario.area.y * (r + 0.5) / rows;
    }
    scenario.msbs.push_back(m);
  }
}

void refresh_links(NetworkState& state, const Scenario& scenario) {
  const int users = state.users();
  const int msbs = scenario.msbsCount();
  state.links.resize(static_cast<std::size_t>(users) * static_cast<std::size_t>(msbs));
  state.mbsDistance.resize(static_cast<std::size_t>(users));
  for (int u = 0; u < users; ++u) {
    const Vec2 p = state.userPositions[static_cast<std::size_t>(u)];
    state.mbsDistance[static_cast<std::size_t>(u)] = distance(p, scenario.mbsPosition);
    for (int b = 0; b < msbs; ++b) {
      const MsbsDesc& m = scenario.msbs[static_cast<std::size_t>(b)];
      const std::size_t i = state.index(u, b);
      LinkEntry& e = state.links[i];
      const double xi = state.shadowingDb[i];
      e.distance = distance(p, m.position);
      e.sector = sector_of(p, m);
      e.rxDbm = mmwave_rx_power_dbm(e.distance, xi, scenario.radio);
      e.zetaDbm = mmwave_sweep_power_dbm(e.distance, xi, scenario.radio);
      e.rxMw = db_to_linear(e.rxDbm);
      e.inRange = e.distance <= m.coverageRadius;
    }
  }
}

void redraw_shadowing(NetworkState& state, const Scenario& scenario, Rng& shadowRng) {
  const std::size_t n =
      static_cast<std::size_t>(state.users()) * static_cast<std::size_t>(scenario.msbsCount());
  state.shadowingDb.assign(n, 0.0);
  if (scenario.radio.sigma2 > 0.0) {
    std::normal_distribution<double> xi(0.0, std::sqrt(scenario.radio.sigma2));
    for (auto& v : state.shadowingDb) v = xi(shadowRng);
  }
}

NetworkState initial_state(const Scenario& scenario, Rng& userRng, Rng& shadowRng) {
  NetworkState state;
  state.slot = 0;
  state.policy = BeamPolicy(scenario.msbsCount());
  state.assoc = AssociationState(scenario.users, scenario.msbsCount());
  std::uniform_real_distribution<double> ux(0.0, scenario.area.x);
  std::uniform_real_distribution<double> uy(0.0, scenario.area.y);
  state.userPositions.resize(static_cast<std::size_t>(scenario.users));
  for (auto& p : state.userPositions) {
    p.x = ux(userRng);
    p.y = uy(userRng);
  }
  state.policy.perMsbs.resize(static_cast<std::size_t>(scenario.msbsCount()));
  redraw_shadowing(state, scenario, shadowRng);
  refresh_links(state, scenario);
  return state;
}

namespace {

double reflect(double v, double hi) {
  if (hi <= 0.0) return 0.0;
  const double period = 2.0 * hi;
  v = std::fmod(v, period);
  if (v < 0.0) v += period;
  return v <= hi ? v : period - v;
}

}  // namespace

NetworkState advance_users(NetworkState state, const Scenario& scenario, Rng& rng) {
  const double step = scenario.userSpeed * scenario.slotSeconds;
  if (scenario.mobility == MobilityModel::RandomWalk) {
    std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
    for (auto& p : state.userPositions) {
      const double a = heading(rng);
      p.x = reflect(p.x + step * std::cos(a), scenario.area.x);
      p.y = reflect(p.y + step * std::sin(a), scenario.area.y);
    }
  } else {
    std::uniform_real_distribution<double> ux(0.0, scenario.area.x);
    std::uniform_real_distribution<double> uy(0.0, scenario.area.y);
    if (state.waypoints.size() != state.userPositions.size()) {
      state.waypoints.resize(state.userPositions.size());
      for (auto& w : state.waypoints) w = Vec2{ux(rng), uy(rng)};
    }
    for (std::size_t i = 0; i < state.userPositions.size(); ++i) {
      Vec2& p = state.userPositions[i];
      Vec2& w = state.waypoints[i];
      const double d = distance(p, w);
      if (d <= step) {
        p = w;
        w = Vec2{ux(rng), uy(rng)};
      } else if (d > 0.0) {
        p.x += step * (w.x - p.x) / d;
        p.y += step * (w.y - p.y) / d;
      }
    }
  }
  refresh_links(state, scenario);
  return state;
}

double mmwave_link_rate(double sinrDb, const RadioConstants& c) {
  return c.wMm * std::log2(1.0 + db_to_linear(sinrDb));
}

double mbs_user_rate(double d, int nUsersOnMbs, const RadioConstants& c) {
  const int n = std::max(nUsersOnMbs, 1);
  const LinkBudget lb = sinr_mbs(d, n, c);
  return (c.wMbs / n) * std::log2(1.0 + db_to_linear(lb.sinrDb));
}

double user_rate(int u, const NetworkState& state, const RadioConstants& c) {
  const AssociationState& a = state.assoc;
  double rate = 0.0;
  int links = 0;
  for (int b = 0; b < a.msbs; ++b) {
    if (!a.linked(u, b)) continue;
    ++links;
    rate += mmwave_link_rate(a.sinrDb[a.index(u, b)], c);
  }
  if (links > 0) return rate;
  return mbs_user_rate(state.mbsDistance[static_cast<std::size_t>(u)], a.mbsOnlyUsers(), c);
}

double system_throughput(const AssociationState& a, const std::vector<double>& mbsDistance,
                         const RadioConstants& c) {
  // Same sum as user_rate over all users with N_mbs computed once.
  const int nMbs = a.mbsOnlyUsers();
  double total = 0.0;
  for (int u = 0; u < a.users; ++u) {
    double rate = 0.0;
    int links = 0;
    for (int b = 0; b < a.msbs; ++b) {
      if (!a.linked(u, b)) continue;
      ++links;
      rate += mmwave_link_rate(a.sinrDb[a.index(u, b)], c);
    }
    if (links == 0) rate = mbs_user_rate(mbsDistance[static_cast<std::size_t>(u)], nMbs, c);
    total += rate;
  }
  return total;
}

double system_throughput(const NetworkState& state, const Scenario& scenario) {
  return system_throughput(state.assoc, state.mbsDistance, scenario.radio);
}

double user_coverage(const AssociationState& assoc, const Scenario& scenario) {
  const int denom = scenario.users * std::min(scenario.msbsCount(), scenario.maxLinksPerUser);
  if (denom <= 0) return 0.0;
  long served = 0;
  for (auto v : assoc.x) served += v;
  return static_cast<double>(served) / denom;
}

double user_coverage(const NetworkState& state, const Scenario& scenario) {
  return user_coverage(state.assoc, scenario);
}

Densities densities(const Scenario& scenario) {
  const double areaKm2 = (scenario.area.x / 1000.0) * (scenario.area.y / 1000.0);
  if (areaKm2 <= 0.0) throw Error(ErrorCode::RangeError, "area must be positive");
  return Densities{scenario.users / areaKm2, scenario.msbsCount() / areaKm2};
}

std::vector<std::string> check_constraints(const NetworkState& state, const Scenario& scenario) {
  std::vector<std::string> out;
  const auto fail = [&out](auto&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    out.push_back(os.str());
  };
  const int msbs = scenario.msbsCount();
  for (int b = 0; b < msbs; ++b) {
    const MsbsDesc& m = scenario.msbs[static_cast<std::size_t>(b)];
    const SectorSet& s = state.policy.perMsbs[static_cast<std::size_t>(b)];
    if (s.size() > m.maxBeams) fail("beam budget: mSBS ", b, " has ", s.size(), " beams > ", m.maxBeams);
    if (s.upper_bound() > m.sectors) fail("mSBS ", b, " uses a sector index >= ", m.sectors);
  }
  const AssociationState& a = state.assoc;
  for (int u = 0; u < a.users; ++u) {
    int row = 0;
    for (int b = 0; b < a.msbs; ++b) {
      const std::size_t i = a.index(u, b);
      const auto v = a.x[i];
      if (v != 0 && v != 1) fail("binary indicator: x[", u, ",", b, "] = ", int{v});
      if (v == 0) continue;
      row += 1;
      if (!(a.sinrDb[i] >= scenario.sinrThresholdDb)) {
        fail("SINR floor: link (", u, ",", b, ") SINR ", a.sinrDb[i], " dB < ", scenario.sinrThresholdDb);
      }
      const int sec = a.servingSector[i];
      if (sec != state.link(u, b).sector || !state.policy.perMsbs[static_cast<std::size_t>(b)].contains(sec)) {
        fail("link (", u, ",", b, ") serving sector ", sec, " is not an active beam over the user");
      }
    }
    if (row > scenario.maxLinksPerUser) {
      fail("association cap: user ", u, " has ", row, " links > ", scenario.maxLinksPerUser);
    }
  }
  return out;
}

void assert_constraints(const NetworkState& state, const Scenario& scenario) {
  const auto violations = check_constraints(state, scenario);
  if (violations.empty()) return;
  std::string msg = "slot " + std::to_string(state.slot) + ":";
  for (const auto& v : violations) msg += " " + v + ";";
  throw Error(ErrorCode::ConstraintViolation, msg);
}

}  // namespace bmfl
