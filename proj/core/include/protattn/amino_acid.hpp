#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace protattn {

// The 20 standard residues in the order of the reference amino-acid table
// (alphabetical by three-letter abbreviation), followed by the unknown
// sentinel X.
enum class AminoAcid : std::uint8_t {
  Ala, Arg, Asn, Asp, Cys, Gln, Glu, Gly, His, Ile,
  Leu, Lys, Met, Phe, Pro, Ser, Thr, Trp, Tyr, Val,
  Unknown,
};

inline constexpr std::size_t kNumStandardAminoAcids = 20;

struct AminoAcidInfo {
  char code;
  std::string_view abbrev;
  std::string_view name;
};

const AminoAcidInfo& info(AminoAcid aa) noexcept;
inline char code_of(AminoAcid aa) noexcept { return info(aa).code; }

// Unrecognised letters map to Unknown. Lower case is accepted.
AminoAcid from_code(char c) noexcept;
std::optional<AminoAcid> from_abbrev(std::string_view abbrev) noexcept;
std::optional<AminoAcid> from_name(std::string_view name) noexcept;

inline constexpr bool is_standard(AminoAcid aa) noexcept {
  return aa != AminoAcid::Unknown;
}
inline constexpr std::size_t index_of(AminoAcid aa) noexcept {
  return static_cast<std::size_t>(aa);
}

std::array<AminoAcid, kNumStandardAminoAcids> standard_amino_acids() noexcept;

// Letter-by-letter conversion; unknown letters become X.
std::vector<AminoAcid> sequence_from_string(std::string_view letters);
std::string sequence_to_string(std::span<const AminoAcid> sequence);

}  // namespace protattn
