#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "protattn/corpus.hpp"

namespace protattn {

inline constexpr double kContactDistance = 8.0;   // angstroms, strict
inline constexpr std::size_t kContactSeparation = 6;  // residues, inclusive

// Symmetric residue contact relation. Stored both as a dense bitset for O(1)
// lookup and as the sorted list of (i, j) pairs with i < j.
class ContactMap {
 public:
  ContactMap() = default;
  ContactMap(std::string protein_id, std::size_t length,
             std::vector<std::pair<std::size_t, std::size_t>> pairs);

  const std::string& protein_id() const noexcept { return id_; }
  std::size_t length() const noexcept { return length_; }
  bool contact(std::size_t i, std::size_t j) const noexcept {
    return i < length_ && j < length_ && bits_[i * length_ + j];
  }
  // Unordered pairs (i < j), sorted.
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept { return pairs_; }

  friend bool operator==(const ContactMap& a, const ContactMap& b) {
    return a.id_ == b.id_ && a.length_ == b.length_ && a.pairs_ == b.pairs_;
  }

 private:
  std::string id_;
  std::size_t length_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<bool> bits_;
};

// Pair (i, j) is a contact iff both coordinates are present, their distance is
// strictly below dist_cutoff and |i - j| >= seq_sep. Uses a uniform spatial
// grid, so cost is roughly linear in L for compact structures.
// Throws NoCoordinates when the record carries no coordinates.
ContactMap derive_contacts(const ProteinRecord& record, double dist_cutoff = kContactDistance,
                           std::size_t seq_sep = kContactSeparation);

}  // namespace protattn
