#include "protattn/aminoacid.hpp"

#include <cstdio>

#include <json.hpp>

#include "protattn/error.hpp"
#include "protattn/stats.hpp"

namespace protattn {

std::vector<double> AAProfileMatrix::profile(AminoAcid aa) const {
  if (!is_standard(aa)) throw Error(ErrorCode::InvalidArgument, "profile of non-standard residue");
  const HeadScoreTable& table = tables.at(index_of(aa));
  std::vector<double> out;
  out.reserve(kept_heads.size());
  for (std::size_t k : kept_heads) out.push_back(*table.heads[k].score);
  return out;
}

AAProfileMatrix make_profile_matrix(std::vector<HeadScoreTable> tables) {
  if (tables.size() != kNumStandardAminoAcids) {
    throw Error(ErrorCode::InvalidArgument, "expected one table per standard amino acid");
  }
  AAProfileMatrix m;
  m.n_layers = tables.front().n_layers;
  m.n_heads = tables.front().n_heads;
  for (const auto& t : tables) {
    if (t.n_layers != m.n_layers || t.n_heads != m.n_heads) {
      throw Error(ErrorCode::ShapeMismatch, "amino-acid tables disagree on head layout");
    }
  }
  const std::size_t n = m.n_layers * m.n_heads;
  for (std::size_t k = 0; k < n; ++k) {
    bool present = true;
    for (const auto& t : tables) present = present && t.heads[k].score.has_value();
    if (present) m.kept_heads.push_back(k);
  }
  m.tables = std::move(tables);
  return m;
}

AAProfileMatrix aa_profiles(const std::vector<ProteinRecord>& corpus, const AttentionSource& source,
                            const AnalysisConfig& config, const ScoreOptions& options) {
  std::vector<Property> properties;
  for (AminoAcid aa : standard_amino_acids()) properties.push_back(amino_acid_property(aa));
  return make_profile_matrix(score_heads(corpus, source, properties, config, options));
}

AACorrelationMatrix aa_attention_correlation(const AAProfileMatrix& profiles) {
  AACorrelationMatrix out{};
  std::vector<std::vector<double>> vectors;
  for (AminoAcid aa : standard_amino_acids()) vectors.push_back(profiles.profile(aa));
  for (std::size_t a = 0; a < kNumStandardAminoAcids; ++a) {
    for (std::size_t b = a; b < kNumStandardAminoAcids; ++b) {
      try {
        const double r = a == b ? (pearson(vectors[a], vectors[a]), 1.0)
                                : pearson(vectors[a], vectors[b]);
        out[a][b] = r;
        out[b][a] = r;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVariance && e.code() != ErrorCode::InvalidArgument) throw;
      }
    }
  }
  return out;
}

double blosum_agreement(const AACorrelationMatrix& corr, const SubstitutionMatrix& blosum) {
  std::vector<double> attention;
  std::vector<double> substitution;
  for (std::size_t a = 0; a < kNumStandardAminoAcids; ++a) {
    for (std::size_t b = a + 1; b < kNumStandardAminoAcids; ++b) {
      if (!corr[a][b]) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string("correlation missing for pair ") +
                        code_of(static_cast<AminoAcid>(a)) + code_of(static_cast<AminoAcid>(b)));
      }
      attention.push_back(*corr[a][b]);
      substitution.push_back(blosum.table()[a][b]);
    }
  }
  return pearson(attention, substitution);
}

namespace {

std::string format17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string correlation_csv(const AACorrelationMatrix& corr) {
  std::string out = "aa";
  for (AminoAcid aa : standard_amino_acids()) (out += ',') += code_of(aa);
  out += '\n';
  for (std::size_t a = 0; a < kNumStandardAminoAcids; ++a) {
    out += code_of(static_cast<AminoAcid>(a));
    for (std::size_t b = 0; b < kNumStandardAminoAcids; ++b) {
      out += ',';
      if (corr[a][b]) out += format17(*corr[a][b]);
    }
    out += '\n';
  }
  return out;
}

std::string correlation_json(const AACorrelationMatrix& corr) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json order = nlohmann::ordered_json::array();
  for (AminoAcid aa : standard_amino_acids()) order.push_back(std::string(1, code_of(aa)));
  j["order"] = order;
  nlohmann::ordered_json rows = nlohmann::ordered_json::object();
  for (std::size_t a = 0; a < kNumStandardAminoAcids; ++a) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (std::size_t b = 0; b < kNumStandardAminoAcids; ++b) {
      const std::string key(1, code_of(static_cast<AminoAcid>(b)));
      if (corr[a][b]) {
        row[key] = *corr[a][b];
      } else {
        row[key] = nullptr;
      }
    }
    rows[std::string(1, code_of(static_cast<AminoAcid>(a)))] = std::move(row);
  }
  j["matrix"] = std::move(rows);
  return j.dump(2);
}

}  // namespace protattn
