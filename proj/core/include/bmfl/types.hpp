#pragma once

// Value types shared by every module: scenario description, beam policy,
// association matrix and the time-slotted network state.

#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace bmfl {

using Rng = std::mt19937_64;

// Independent, reproducible stream `stream` derived from a scenario seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

namespace streams {
inline constexpr std::uint64_t kPlacement = 1;
inline constexpr std::uint64_t kUsers = 2;
inline constexpr std::uint64_t kMobility = 3;
inline constexpr std::uint64_t kShadowing = 4;
inline constexpr std::uint64_t kLearner = 100;  // + agent index
}  // namespace streams

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

enum class InterferenceMode { SnrOnly, Full };
enum class MobilityModel { RandomWalk, RandomWaypoint };
enum class ShadowingMode { PerEpisode, PerSlot };
enum class AssociationPolicy { MaxPower, LoadBalance };

// Microwave and mmWave link constants. Defaults are the macro/small-cell
// values used throughout the evaluation (dB, dBm, Hz).
struct RadioConstants {
  double kappa = 38.8;        // microwave path-loss factor, dB
  double rho = 2.0;           // microwave path-loss exponent
  double alpha = 61.3;        // mmWave floating intercept, dB
  double beta = 2.1;          // mmWave slope
  double sigma2 = 4.0;        // lognormal shadowing variance, dB^2
  double gT = 12.0;           // mmWave transmit antenna gain, dB
  double gR = 10.0;           // mmWave receive antenna gain, dB
  double pMbs = 50.0;         // MBS transmit power per user, dBm
  double pSbs = 37.0;         // mSBS transmit power per user, dBm
  double wMbs = 100e6;        // MBS bandwidth, Hz
  double wMm = 2e9;           // mmWave bandwidth, Hz
  double fMbs = 2.1e9;        // MBS carrier, Hz
  double fMm = 28e9;          // mmWave carrier, Hz
  double noiseFigure = 0.0;   // dB

  void validate() const;
};

struct MsbsDesc {
  int id = 0;
  Vec2 position;
  int sectors = 8;             // S_b
  int maxBeams = 3;            // M_b
  double coverageRadius = 50;  // rho_b, meters
};

// k1 + k2 = 1, both strictly inside (0, 1).
struct BalanceWeights {
  double k1 = 0.5;
  double k2 = 0.5;

  void validate() const;
};

struct Scenario {
  Vec2 area{100.0, 100.0};  // width, height in meters
  Vec2 mbsPosition{50.0, 50.0};
  std::vector<MsbsDesc> msbs;
  int users = 12;
  RadioConstants radio;
  int maxLinksPerUser = 3;          // B_u^max
  double sinrThresholdDb = -20.0;   // chi
  double powerThresholdDbm = -60.0; // varsigma
  double slotSeconds = 1.0;
  double userSpeed = 1.0;           // m/s
  MobilityModel mobility = MobilityModel::RandomWalk;
  InterferenceMode interference = InterferenceMode::SnrOnly;
  ShadowingMode shadowing = ShadowingMode::PerEpisode;
  AssociationPolicy association = AssociationPolicy::MaxPower;
  BalanceWeights balance;
  std::uint64_t seed = 1;

  int msbsCount() const { return static_cast<int>(msbs.size()); }
  void validate() const;
};

// Set of sector indices of one mSBS, stored as a bitmask (S_b <= 64).
class SectorSet {
 public:
  static constexpr int kMaxSectors = 64;

  SectorSet() = default;
  SectorSet(std::initializer_list<int> sectors);
  static SectorSet from_mask(std::uint64_t mask) {
    SectorSet s;
    s.bits_ = mask;
    return s;
  }

  bool contains(int sector) const {
    return sector >= 0 && sector < kMaxSectors && ((bits_ >> sector) & 1u) != 0;
  }
  void insert(int sector);
  void erase(int sector);
  int size() const { return std::popcount(bits_); }
  bool empty() const { return bits_ == 0; }
  std::uint64_t mask() const { return bits_; }
  // Highest index + 1, or 0 when empty.
  int upper_bound() const { return bits_ == 0 ? 0 : 64 - std::countl_zero(bits_); }
  std::vector<int> to_vector() const;  // ascending

  friend bool operator==(const SectorSet&, const SectorSet&) = default;

 private:
  std::uint64_t bits_ = 0;
};

struct BeamPolicy {
  std::vector<SectorSet> perMsbs;

  BeamPolicy() = default;
  explicit BeamPolicy(int msbsCount) : perMsbs(static_cast<std::size_t>(msbsCount)) {}

  friend bool operator==(const BeamPolicy&, const BeamPolicy&) = default;
};

// x_{u,b}(t) plus the serving sector and link SINR of every active link.
struct AssociationState {
  int users = 0;
  int msbs = 0;
  std::vector<std::uint8_t> x;     // users * msbs, row-major by user
  std::vector<int> servingSector;  // -1 when not linked
  std::vector<double> sinrDb;      // NaN when not linked

  AssociationState() = default;
  AssociationState(int userCount, int msbsCount);

  std::size_t index(int u, int b) const {
    return static_cast<std::size_t>(u) * static_cast<std::size_t>(msbs) +
           static_cast<std::size_t>(b);
  }
  bool linked(int u, int b) const { return x[index(u, b)] != 0; }
  int linkCount(int u) const;  // B_u(t)
  int load(int b) const;       // N_b(t)
  int mbsOnlyUsers() const;    // N_mbs(t): users with an empty serving set
};

// Per (user, mSBS) geometry and link-budget quantities for the current user
// positions; recomputed whenever users move or shadowing is redrawn.
struct LinkEntry {
  double distance = 0.0;
  int sector = 0;
  double rxDbm = 0.0;     // data link power (transmit + both antenna gains)
  double zetaDbm = 0.0;   // sweep power perceived with an omni receive pattern
  double rxMw = 0.0;      // rxDbm in milliwatts
  bool inRange = false;   // distance <= coverage radius
};

struct NetworkState {
  std::int64_t slot = 0;
  std::vector<Vec2> userPositions;
  BeamPolicy policy;
  AssociationState assoc;
  std::vector<double> shadowingDb;  // users * msbs
  std::vector<LinkEntry> links;     // users * msbs
  std::vector<double> mbsDistance;  // per user
  std::vector<Vec2> waypoints;      // random-waypoint targets, else empty

  int users() const { return static_cast<int>(userPositions.size()); }
  int msbsCount() const { return static_cast<int>(policy.perMsbs.size()); }
  std::size_t index(int u, int b) const {
    return static_cast<std::size_t>(u) * policy.perMsbs.size() + static_cast<std::size_t>(b);
  }
  const LinkEntry& link(int u, int b) const { return links[index(u, b)]; }
};

}  // namespace bmfl
