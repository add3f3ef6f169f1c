#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "protattn/corpus.hpp"
#include "protattn/properties.hpp"
#include "protattn/tensors.hpp"

namespace protattn {

inline constexpr double kDefaultTheta = 0.3;
inline constexpr std::uint64_t kDefaultMinArcs = 100;

enum class MetricMode { HighConfidence, Weighted };

std::string to_string(MetricMode mode);
// Accepts "high" / "weighted" as well as the long spellings.
std::optional<MetricMode> metric_mode_from_string(const std::string& s);

struct AnalysisConfig {
  double theta = kDefaultTheta;
  std::uint64_t min_arcs = kDefaultMinArcs;
  std::set<TokenFlag> exclude_flags{TokenFlag::Cls, TokenFlag::Sep, TokenFlag::Pad};
  MetricMode metric = MetricMode::HighConfidence;

  // Throws InvalidArgument unless 0 < theta < 1 and min_arcs >= 1.
  void validate() const;
  // Stable textual key used for caching and report echoes.
  std::string cache_key() const;
};

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  void merge(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.compensation_);
  }
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

struct HeadAccumulator {
  std::uint64_t hits = 0;  // high-confidence arcs with f = 1
  std::uint64_t arcs = 0;  // high-confidence arcs
  CompensatedSum weighted_hits;
  CompensatedSum weighted_total;

  void merge(const HeadAccumulator& other) noexcept {
    hits += other.hits;
    arcs += other.arcs;
    weighted_hits.merge(other.weighted_hits);
    weighted_total.merge(other.weighted_total);
  }
};

struct BackgroundCounts {
  std::uint64_t positives = 0;
  std::uint64_t total = 0;

  double fraction() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(positives) / static_cast<double>(total);
  }
  void merge(const BackgroundCounts& o) noexcept {
    positives += o.positives;
    total += o.total;
  }
};

struct HeadScore {
  std::optional<double> score;  // nullopt = ABSENT
  std::uint64_t arc_count = 0;  // high-confidence admissible arcs
  std::uint64_t hits = 0;
  double attention_mass = 0.0;  // sum of admissible weights (weighted mode)
};

struct HeadScoreTable {
  std::string property;
  MetricMode mode = MetricMode::HighConfidence;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::vector<HeadScore> heads;  // layer-major
  BackgroundCounts background;

  const HeadScore& at(std::size_t layer, std::size_t head) const {
    return heads.at(layer * n_heads + head);
  }
  double background_frequency() const noexcept { return background.fraction(); }
  std::size_t present_count() const noexcept;
};

// ---------------------------------------------------------------------------
// Tensor sources

class AttentionSource {
 public:
  virtual ~AttentionSource() = default;
  // Throws MissingTensor when no tensor exists for the record. Shape checks
  // against the record are the caller's job.
  virtual std::shared_ptr<const AttentionTensor> load(const ProteinRecord& record) const = 0;
};

class InMemoryAttention final : public AttentionSource {
 public:
  InMemoryAttention() = default;
  explicit InMemoryAttention(std::vector<AttentionTensor> tensors);
  void add(AttentionTensor tensor);
  std::shared_ptr<const AttentionTensor> load(const ProteinRecord& record) const override;

 private:
  std::map<std::string, std::shared_ptr<const AttentionTensor>> tensors_;
};

// Reads <dir>/<id>.atns on demand.
class DirectoryAttention final : public AttentionSource {
 public:
  explicit DirectoryAttention(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::shared_ptr<const AttentionTensor> load(const ProteinRecord& record) const override;
  const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Arc admission

struct Arc {
  std::size_t from = 0;  // residue index
  std::size_t to = 0;    // residue index
  float weight = 0.0f;
};

// Arcs from and to tokens whose flag is excluded (and PAD, always) are
// inadmissible. Weights are compared in float32, strictly: w > float(theta).
class ArcFilter {
 public:
  ArcFilter(const AttentionTensor& tensor, const std::set<TokenFlag>& exclude_flags);

  bool admits(std::size_t from_token, std::size_t to_token) const noexcept {
    return admissible_[from_token] && admissible_[to_token];
  }
  std::optional<std::size_t> residue(std::size_t token) const noexcept { return residue_[token]; }

 private:
  std::vector<bool> admissible_;
  std::vector<std::optional<std::size_t>> residue_;
};

bool above_threshold(float weight, double theta) noexcept;

// The high-confidence residue arcs of one head, in (from, to) order. This is
// the arc set counted by score_heads (before indicator definedness).
std::vector<Arc> admitted_arcs(const AttentionTensor& tensor, std::size_t layer, std::size_t head,
                               double threshold, const std::set<TokenFlag>& exclude_flags);

// Adds one protein's contribution to per-head accumulators (layer-major).
void accumulate_protein(const AttentionTensor& tensor, const PropertyIndicator& indicator,
                        const AnalysisConfig& config, std::vector<HeadAccumulator>& heads);

BackgroundCounts background_counts(const PropertyIndicator& indicator);

// Turns merged accumulators into a table: ABSENT where arcs < min_arcs
// (high-confidence) or no attention mass (weighted).
HeadScoreTable finalize_table(const std::string& property, const AnalysisConfig& config,
                              std::size_t n_layers, std::size_t n_heads,
                              const std::vector<HeadAccumulator>& heads,
                              const BackgroundCounts& background);

struct ScoreOptions {
  std::size_t threads = 1;
  // Proteins are reduced in blocks of this many (in id order); the result is
  // identical for any thread count.
  std::size_t block_size = 64;
};

// Scores every head of the model for each property in one pass over the
// tensors. Proteins for which a property yields no indicator are skipped for
// that property. Throws MissingTensor / ShapeMismatch.
std::vector<HeadScoreTable> score_heads(const std::vector<ProteinRecord>& corpus,
                                        const AttentionSource& source,
                                        const std::vector<Property>& properties,
                                        const AnalysisConfig& config,
                                        const ScoreOptions& options = {});

HeadScoreTable score_heads(const std::vector<ProteinRecord>& corpus, const AttentionSource& source,
                           const Property& property, const AnalysisConfig& config,
                           const ScoreOptions& options = {});

double background_frequency(const std::vector<ProteinRecord>& corpus, const Property& property);
BackgroundCounts background_counts(const std::vector<ProteinRecord>& corpus,
                                   const Property& property);

}  // namespace protattn
