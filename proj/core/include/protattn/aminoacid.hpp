#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "protattn/corpus.hpp"
#include "protattn/metrics.hpp"

namespace protattn {

// Per-head attention profile for each of the 20 standard residues. A head that
// is ABSENT in any profile is dropped from all of them so the vectors stay
// index-aligned; kept_heads lists the surviving layer-major head indices.
struct AAProfileMatrix {
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::vector<HeadScoreTable> tables;  // kNumStandardAminoAcids entries, table order
  std::vector<std::size_t> kept_heads;

  std::vector<double> profile(AminoAcid aa) const;
};

using AACorrelationMatrix =
    std::array<std::array<std::optional<double>, kNumStandardAminoAcids>, kNumStandardAminoAcids>;

AAProfileMatrix make_profile_matrix(std::vector<HeadScoreTable> tables);

AAProfileMatrix aa_profiles(const std::vector<ProteinRecord>& corpus, const AttentionSource& source,
                            const AnalysisConfig& config, const ScoreOptions& options = {});

// Entry (a, b) = pearson(profile(a), profile(b)); nullopt where a profile has
// zero variance or fewer than two heads survive.
AACorrelationMatrix aa_attention_correlation(const AAProfileMatrix& profiles);

// Pearson correlation over the 190 unordered pairs of distinct residues.
// Throws InvalidArgument when any off-diagonal entry is missing.
double blosum_agreement(const AACorrelationMatrix& corr, const SubstitutionMatrix& blosum);

// Rows and columns keyed by one-letter code in table order; missing entries
// are empty (CSV) or null (JSON). Numbers use 17 significant digits.
std::string correlation_csv(const AACorrelationMatrix& corr);
std::string correlation_json(const AACorrelationMatrix& corr);

}  // namespace protattn
