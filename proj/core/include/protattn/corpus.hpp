#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "protattn/amino_acid.hpp"

namespace protattn {

inline constexpr std::size_t kDefaultMaxLength = 512;

enum class SecondaryStructure : std::uint8_t { Helix, Strand, TurnBend, Other };

// Single-character codes used in the corpus file: H, S, T, -.
char ss_code(SecondaryStructure ss) noexcept;
std::optional<SecondaryStructure> ss_from_code(char c) noexcept;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double distance(const Vec3& a, const Vec3& b) noexcept;

// One protein of the annotated corpus. All per-residue arrays, when present,
// have exactly length() entries and all site indices are < length().
struct ProteinRecord {
  std::string id;
  std::vector<AminoAcid> sequence;
  // One representative atom per residue; nullopt where the structure has a gap.
  std::optional<std::vector<std::optional<Vec3>>> coords;
  std::optional<std::vector<SecondaryStructure>> ss_labels;
  std::set<std::size_t> binding_sites;
  std::set<std::size_t> ptm_sites;

  std::size_t length() const noexcept { return sequence.size(); }
  bool has_coords() const noexcept { return coords.has_value(); }

  friend bool operator==(const ProteinRecord&, const ProteinRecord&) = default;
};

// Throws Error(MalformedRecord) naming the violated invariant.
void validate(const ProteinRecord& record, std::size_t max_len = kDefaultMaxLength);

// Prefix-truncates the sequence and every aligned annotation. Site indices at
// or beyond max_len are dropped.
ProteinRecord truncated(ProteinRecord record, std::size_t max_len);

struct RecordError {
  std::size_t line = 0;  // 1-based line number in the corpus file
  std::string reason;
};

struct CorpusLoadResult {
  std::vector<ProteinRecord> records;
  std::vector<RecordError> errors;
};

// Reads a JSON-Lines corpus. Malformed lines are reported in `errors` and
// skipped; an unreadable file or a corpus with no valid record throws.
CorpusLoadResult load_corpus(const std::filesystem::path& path,
                             std::size_t max_len = kDefaultMaxLength);
CorpusLoadResult parse_corpus(std::string_view text,
                              std::size_t max_len = kDefaultMaxLength);

std::string to_json_line(const ProteinRecord& record);
void write_corpus(const std::filesystem::path& path, const std::vector<ProteinRecord>& records);

// ---------------------------------------------------------------------------
// Substitution matrices

class SubstitutionMatrix {
 public:
  using Table = std::array<std::array<int, kNumStandardAminoAcids>, kNumStandardAminoAcids>;

  SubstitutionMatrix() = default;
  // Throws InvalidArgument when the table is not symmetric.
  explicit SubstitutionMatrix(const Table& scores);

  int score(AminoAcid a, AminoAcid b) const;
  const Table& table() const noexcept { return scores_; }

 private:
  Table scores_{};
};

// Parses the NCBI flat format: '#' comment lines, a header row of column
// letters, then one row per letter. Columns outside the 20 standard residues
// (B, Z, X, *) are ignored.
SubstitutionMatrix parse_ncbi_matrix(std::string_view text);

// BLOSUM62, compiled in from the NCBI distribution file.
const SubstitutionMatrix& load_blosum62();
std::string_view blosum62_ncbi_text() noexcept;

}  // namespace protattn
