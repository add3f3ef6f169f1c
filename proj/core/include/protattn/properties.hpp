#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "protattn/corpus.hpp"
#include "protattn/structure.hpp"

namespace protattn {

enum class PropertyKind { Pairwise, Token };

// f(i, j) over residue indices of one protein. Token indicators depend only on
// the target j. A residue may be marked undefined (e.g. missing coordinates
// for a contact property); pairs touching it are excluded from both the
// metric and the background frequency.
class PropertyIndicator {
 public:
  static PropertyIndicator pairwise(std::string name, std::size_t length,
                                    std::vector<std::uint8_t> pair_mask,
                                    std::vector<std::uint8_t> defined = {});
  static PropertyIndicator token(std::string name, std::size_t length,
                                 std::vector<std::uint8_t> site_mask);

  const std::string& name() const noexcept { return name_; }
  PropertyKind kind() const noexcept { return kind_; }
  std::size_t length() const noexcept { return length_; }

  bool operator()(std::size_t i, std::size_t j) const noexcept {
    return kind_ == PropertyKind::Token ? mask_[j] != 0 : mask_[i * length_ + j] != 0;
  }
  bool defined(std::size_t i, std::size_t j) const noexcept {
    return kind_ == PropertyKind::Token || (defined_[i] != 0 && defined_[j] != 0);
  }
  bool residue_defined(std::size_t i) const noexcept {
    return kind_ == PropertyKind::Token || defined_[i] != 0;
  }

 private:
  std::string name_;
  PropertyKind kind_ = PropertyKind::Token;
  std::size_t length_ = 0;
  std::vector<std::uint8_t> mask_;
  std::vector<std::uint8_t> defined_;
};

// f(i, j) = contact(i, j). `defined` marks residues with known geometry; when
// empty every residue is defined.
PropertyIndicator make_contact_indicator(const ContactMap& map,
                                         std::vector<std::uint8_t> defined = {});
// f(i, j) = [j in sites]. Sites outside [0, length) are ignored.
PropertyIndicator make_token_indicator(const std::set<std::size_t>& sites, std::size_t length,
                                       std::string name = "token");

// A named property that yields an indicator per protein, or nullopt when the
// protein lacks the annotation it needs (such proteins are skipped).
struct Property {
  std::string name;
  PropertyKind kind = PropertyKind::Token;
  std::function<std::optional<PropertyIndicator>(const ProteinRecord&)> indicator_for;
};

// contact, binding_site, ptm, ss_helix, ss_strand, ss_turnbend, aa_A ... aa_V
std::vector<std::string> property_names();
// Throws UnknownProperty listing the valid names.
Property property_by_name(const std::string& name);
Property contact_property(double dist_cutoff = kContactDistance,
                          std::size_t seq_sep = kContactSeparation);
Property amino_acid_property(AminoAcid aa);

}  // namespace protattn
