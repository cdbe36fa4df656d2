#include "bmfl/types.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "bmfl/error.hpp"

namespace bmfl {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::RangeError, what);
}
}  // namespace

void RadioConstants::validate() const {
  require(wMbs > 0.0 && wMm > 0.0, "bandwidths must be positive");
  require(rho > 0.0, "microwave path-loss exponent must be positive");
  require(beta > 0.0, "mmWave path-loss slope must be positive");
  require(sigma2 >= 0.0, "shadowing variance must be non-negative");
}

void BalanceWeights::validate() const {
  require(k1 > 0.0 && k1 < 1.0 && k2 > 0.0 && k2 < 1.0, "balance weights must lie in (0,1)");
  require(std::abs(k1 + k2 - 1.0) < 1e-12, "balance weights must sum to 1");
}

void Scenario::validate() const {
  radio.validate();
  require(users >= 1, "scenario needs at least one user");
  require(maxLinksPerUser >= 1, "max links per user must be >= 1");
  require(area.x > 0.0 && area.y > 0.0, "area must be positive");
  require(slotSeconds > 0.0, "slot duration must be positive");
  require(userSpeed >= 0.0, "user speed must be non-negative");
  for (const auto& m : msbs) {
    const std::string tag = "mSBS " + std::to_string(m.id);
    require(m.position.x >= 0.0 && m.position.x <= area.x && m.position.y >= 0.0 &&
                m.position.y <= area.y,
            tag + " lies outside the area");
    require(m.sectors >= 1 && m.sectors <= SectorSet::kMaxSectors,
            tag + " sector count out of range");
    require(m.maxBeams > 0 && m.maxBeams <= m.sectors, tag + " needs 0 < M_b <= S_b");
    require(m.coverageRadius > 0.0, tag + " coverage radius must be positive");
  }
}

SectorSet::SectorSet(std::initializer_list<int> sectors) {
  for (int s : sectors) insert(s);
}

void SectorSet::insert(int sector) {
  if (sector < 0 || sector >= kMaxSectors) {
    throw Error(ErrorCode::InvalidAction, "sector index " + std::to_string(sector));
  }
  bits_ |= (std::uint64_t{1} << sector);
}

void SectorSet::erase(int sector) {
  if (sector < 0 || sector >= kMaxSectors) return;
  bits_ &= ~(std::uint64_t{1} << sector);
}

std::vector<int> SectorSet::to_vector() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(size()));
  std::uint64_t m = bits_;
  while (m != 0) {
    out.push_back(std::countr_zero(m));
    m &= m - 1;
  }
  return out;
}

AssociationState::AssociationState(int userCount, int msbsCount)
    : users(userCount),
      msbs(msbsCount),
      x(static_cast<std::size_t>(userCount) * static_cast<std::size_t>(msbsCount), 0),
      servingSector(x.size(), -1),
      sinrDb(x.size(), std::numeric_limits<double>::quiet_NaN()) {}

int AssociationState::linkCount(int u) const {
  int n = 0;
  for (int b = 0; b < msbs; ++b) n += x[index(u, b)];
  return n;
}

int AssociationState::load(int b) const {
  int n = 0;
  for (int u = 0; u < users; ++u) n += x[index(u, b)];
  return n;
}

int AssociationState::mbsOnlyUsers() const {
  int n = 0;
  for (int u = 0; u < users; ++u) n += linkCount(u) == 0 ? 1 : 0;
  return n;
}

}  // namespace bmfl
