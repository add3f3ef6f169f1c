#include "protattn/structure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "protattn/error.hpp"

namespace protattn {

ContactMap::ContactMap(std::string protein_id, std::size_t length,
                       std::vector<std::pair<std::size_t, std::size_t>> pairs)
    : id_(std::move(protein_id)), length_(length), bits_(length * length, false) {
  for (auto [i, j] : pairs) {
    if (i >= length || j >= length || i == j) {
      throw Error(ErrorCode::InvalidArgument, "contact pair out of range or on the diagonal");
    }
    if (i > j) std::swap(i, j);
    bits_[i * length + j] = true;
    bits_[j * length + i] = true;
  }
  pairs_.reserve(pairs.size());
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t j = i + 1; j < length; ++j) {
      if (bits_[i * length + j]) pairs_.emplace_back(i, j);
    }
  }
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

ContactMap derive_contacts(const ProteinRecord& record, double dist_cutoff, std::size_t seq_sep) {
  if (!record.coords) throw Error(ErrorCode::NoCoordinates, "record '" + record.id + "'");
  if (!(dist_cutoff > 0.0)) throw Error(ErrorCode::InvalidArgument, "dist_cutoff must be positive");
  const auto& coords = *record.coords;
  const std::size_t n = coords.size();

  const auto cell_of = [&](const Vec3& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x / dist_cutoff)),
                   static_cast<std::int64_t>(std::floor(p.y / dist_cutoff)),
                   static_cast<std::int64_t>(std::floor(p.z / dist_cutoff))};
  };

  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t i = 0; i < n; ++i) {
    if (coords[i]) grid[cell_of(*coords[i])].push_back(i);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!coords[i]) continue;
    const CellKey c = cell_of(*coords[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i || j - i < seq_sep) continue;
            if (distance(*coords[i], *coords[j]) < dist_cutoff) pairs.emplace_back(i, j);
          }
        }
      }
    }
  }
  return ContactMap(record.id, n, std::move(pairs));
}

}  // namespace protattn
