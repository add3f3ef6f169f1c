#include "protattn/properties.hpp"

#include "protattn/error.hpp"

namespace protattn {

PropertyIndicator PropertyIndicator::pairwise(std::string name, std::size_t length,
                                              std::vector<std::uint8_t> pair_mask,
                                              std::vector<std::uint8_t> defined) {
  if (pair_mask.size() != length * length) {
    throw Error(ErrorCode::InvalidArgument, "pairwise mask must have length^2 entries");
  }
  if (defined.empty()) defined.assign(length, 1);
  if (defined.size() != length) {
    throw Error(ErrorCode::InvalidArgument, "defined mask must have one entry per residue");
  }
  PropertyIndicator p;
  p.name_ = std::move(name);
  p.kind_ = PropertyKind::Pairwise;
  p.length_ = length;
  p.mask_ = std::move(pair_mask);
  p.defined_ = std::move(defined);
  return p;
}

PropertyIndicator PropertyIndicator::token(std::string name, std::size_t length,
                                           std::vector<std::uint8_t> site_mask) {
  if (site_mask.size() != length) {
    throw Error(ErrorCode::InvalidArgument, "token mask must have one entry per residue");
  }
  PropertyIndicator p;
  p.name_ = std::move(name);
  p.kind_ = PropertyKind::Token;
  p.length_ = length;
  p.mask_ = std::move(site_mask);
  return p;
}

PropertyIndicator make_contact_indicator(const ContactMap& map, std::vector<std::uint8_t> defined) {
  const std::size_t n = map.length();
  std::vector<std::uint8_t> mask(n * n, 0);
  for (auto [i, j] : map.pairs()) {
    mask[i * n + j] = 1;
    mask[j * n + i] = 1;
  }
  return PropertyIndicator::pairwise("contact", n, std::move(mask), std::move(defined));
}

PropertyIndicator make_token_indicator(const std::set<std::size_t>& sites, std::size_t length,
                                       std::string name) {
  std::vector<std::uint8_t> mask(length, 0);
  for (std::size_t s : sites) {
    if (s < length) mask[s] = 1;
  }
  return PropertyIndicator::token(std::move(name), length, std::move(mask));
}

namespace {

Property token_property(std::string name,
                        std::function<std::optional<std::set<std::size_t>>(const ProteinRecord&)> sites) {
  Property p;
  p.name = name;
  p.kind = PropertyKind::Token;
  p.indicator_for = [name, sites = std::move(sites)](const ProteinRecord& r)
      -> std::optional<PropertyIndicator> {
    auto s = sites(r);
    if (!s) return std::nullopt;
    return make_token_indicator(*s, r.length(), name);
  };
  return p;
}

Property ss_property(std::string name, SecondaryStructure label) {
  return token_property(std::move(name), [label](const ProteinRecord& r)
                                             -> std::optional<std::set<std::size_t>> {
    if (!r.ss_labels) return std::nullopt;
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < r.ss_labels->size(); ++i) {
      if ((*r.ss_labels)[i] == label) s.insert(i);
    }
    return s;
  });
}

}  // namespace

Property contact_property(double dist_cutoff, std::size_t seq_sep) {
  Property p;
  p.name = "contact";
  p.kind = PropertyKind::Pairwise;
  p.indicator_for = [dist_cutoff, seq_sep](const ProteinRecord& r)
      -> std::optional<PropertyIndicator> {
    if (!r.coords) return std::nullopt;
    std::vector<std::uint8_t> defined(r.length());
    for (std::size_t i = 0; i < r.length(); ++i) defined[i] = (*r.coords)[i].has_value();
    return make_contact_indicator(derive_contacts(r, dist_cutoff, seq_sep), std::move(defined));
  };
  return p;
}

Property amino_acid_property(AminoAcid aa) {
  return token_property(std::string("aa_") + code_of(aa),
                        [aa](const ProteinRecord& r) -> std::optional<std::set<std::size_t>> {
                          std::set<std::size_t> s;
                          for (std::size_t i = 0; i < r.length(); ++i) {
                            if (r.sequence[i] == aa) s.insert(i);
                          }
                          return s;
                        });
}

std::vector<std::string> property_names() {
  std::vector<std::string> names{"contact", "binding_site", "ptm",
                                 "ss_helix", "ss_strand", "ss_turnbend"};
  for (AminoAcid aa : standard_amino_acids()) names.push_back(std::string("aa_") + code_of(aa));
  return names;
}

Property property_by_name(const std::string& name) {
  if (name == "contact") return contact_property();
  if (name == "binding_site") {
    return token_property(name, [](const ProteinRecord& r) -> std::optional<std::set<std::size_t>> {
      return r.binding_sites;
    });
  }
  if (name == "ptm") {
    return token_property(name, [](const ProteinRecord& r) -> std::optional<std::set<std::size_t>> {
      return r.ptm_sites;
    });
  }
  if (name == "ss_helix") return ss_property(name, SecondaryStructure::Helix);
  if (name == "ss_strand") return ss_property(name, SecondaryStructure::Strand);
  if (name == "ss_turnbend") return ss_property(name, SecondaryStructure::TurnBend);
  if (name.size() == 4 && name.rfind("aa_", 0) == 0) {
    const AminoAcid aa = from_code(name[3]);
    if (is_standard(aa) && code_of(aa) == name[3]) return amino_acid_property(aa);
  }
  std::string valid;
  for (const auto& n : property_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::UnknownProperty, "'" + name + "'; valid names: " + valid);
}

}  // namespace protattn
