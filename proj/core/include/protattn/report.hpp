#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protattn/aminoacid.hpp"
#include "protattn/metrics.hpp"
#include "protattn/probes.hpp"
#include "protattn/stats.hpp"

namespace protattn {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::size_t kDefaultTopHeads = 10;

struct LayerProfile {
  std::string property;
  // Mean over the layer's non-ABSENT heads; nullopt when all are ABSENT.
  std::vector<std::optional<double>> layer_means;
  // sum(l * m_l) / sum(m_l) with 1-based l; nullopt when every mean is zero.
  std::optional<double> center_of_gravity;
};

// Throws AllAbsent when every head of the table is ABSENT.
LayerProfile layer_profile(const HeadScoreTable& table);

struct RankedHead {
  std::size_t layer = 0;  // 0-based
  std::size_t head = 0;   // 0-based
  double score = 0.0;
  std::uint64_t arc_count = 0;
  std::optional<SignificanceResult> significance;
};

// Descending by score, ties by (layer, head) ascending. Throws AllAbsent.
std::vector<RankedHead> top_heads(const HeadScoreTable& table, std::size_t n = kDefaultTopHeads);

// "<layer>-<head>" with 1-based indices.
std::string head_label(std::size_t layer, std::size_t head);

struct ReportInput {
  AnalysisConfig config;
  std::optional<std::uint64_t> null_seed;
  std::vector<HeadScoreTable> tables;
  std::vector<ProbeResult> probes;
  std::optional<AACorrelationMatrix> aa_correlation;
  std::optional<double> blosum_agreement;
};

// Text renderings. All numbers carry 17 significant digits so values re-read
// from disk equal the in-memory doubles.
std::string report_json(const ReportInput& input);
// Rows = layers, columns = heads (1-based labels), empty cell for ABSENT.
std::string heatmap_csv(const HeadScoreTable& table);
// layer,head,property,mode,score|ABSENT,arc_count,background,z,p,significant_bonferroni,ci_lo,ci_hi
std::string heads_csv(const HeadScoreTable& table);
std::string topheads_csv(const HeadScoreTable& table, std::size_t n = kDefaultTopHeads);
// The per-table and per-profile objects embedded in report.json.
std::string table_json_text(const HeadScoreTable& table);
std::string layer_profile_json(const LayerProfile& profile);

// Writes report.json plus heatmap_/heads_/topheads_<property>.csv per table
// (and aa_correlation.csv/json when present) into out_dir, creating it if
// needed. Identical inputs give byte-identical files. Throws IoFailure.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& out_dir,
                                               const ReportInput& input);

}  // namespace protattn
