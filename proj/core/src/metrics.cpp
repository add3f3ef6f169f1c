#include "protattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "protattn/error.hpp"

namespace protattn {

std::string to_string(MetricMode mode) {
  return mode == MetricMode::HighConfidence ? "high" : "weighted";
}

std::optional<MetricMode> metric_mode_from_string(const std::string& s) {
  if (s == "high" || s == "high_confidence" || s == "HIGH_CONFIDENCE") return MetricMode::HighConfidence;
  if (s == "weighted" || s == "WEIGHTED") return MetricMode::Weighted;
  return std::nullopt;
}

void AnalysisConfig::validate() const {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "theta must lie in (0, 1), got " + std::to_string(theta));
  }
  if (min_arcs < 1) throw Error(ErrorCode::InvalidArgument, "min_arcs must be >= 1");
  if (exclude_flags.count(TokenFlag::Residue)) {
    throw Error(ErrorCode::InvalidArgument, "RESIDUE tokens cannot be excluded");
  }
}

std::string AnalysisConfig::cache_key() const {
  std::ostringstream out;
  out.precision(17);
  out << "theta=" << theta << ";min_arcs=" << min_arcs << ";metric=" << to_string(metric)
      << ";exclude=";
  for (auto f : exclude_flags) out << static_cast<int>(f);
  return out.str();
}

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

std::size_t HeadScoreTable::present_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(heads.begin(), heads.end(), [](const HeadScore& h) { return h.score.has_value(); }));
}

// ---------------------------------------------------------------------------

InMemoryAttention::InMemoryAttention(std::vector<AttentionTensor> tensors) {
  for (auto& t : tensors) add(std::move(t));
}

void InMemoryAttention::add(AttentionTensor tensor) {
  auto id = tensor.protein_id();
  tensors_[id] = std::make_shared<const AttentionTensor>(std::move(tensor));
}

std::shared_ptr<const AttentionTensor> InMemoryAttention::load(const ProteinRecord& record) const {
  auto it = tensors_.find(record.id);
  if (it == tensors_.end()) throw Error(ErrorCode::MissingTensor, record.id);
  return it->second;
}

std::shared_ptr<const AttentionTensor> DirectoryAttention::load(const ProteinRecord& record) const {
  const auto path = attention_path(dir_, record.id);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingTensor, record.id + " (" + path.string() + ")");
  }
  auto tensor = std::make_shared<AttentionTensor>(read_attention(path));
  if (tensor->protein_id() != record.id) {
    throw Error(ErrorCode::ShapeMismatch,
                record.id + ": file carries id '" + tensor->protein_id() + "'");
  }
  return tensor;
}

// ---------------------------------------------------------------------------

ArcFilter::ArcFilter(const AttentionTensor& tensor, const std::set<TokenFlag>& exclude_flags)
    : admissible_(tensor.n_tokens()), residue_(tensor.residue_index()) {
  const auto flags = tensor.flags();
  for (std::size_t t = 0; t < flags.size(); ++t) {
    admissible_[t] = flags[t] != TokenFlag::Pad && !exclude_flags.count(flags[t]);
  }
}

bool above_threshold(float weight, double theta) noexcept {
  return weight > static_cast<float>(theta);
}

std::vector<Arc> admitted_arcs(const AttentionTensor& tensor, std::size_t layer, std::size_t head,
                               double threshold, const std::set<TokenFlag>& exclude_flags) {
  if (layer >= tensor.n_layers() || head >= tensor.n_heads()) {
    throw Error(ErrorCode::InvalidArgument, "layer/head out of range");
  }
  const ArcFilter filter(tensor, exclude_flags);
  std::vector<Arc> arcs;
  const std::size_t n = tensor.n_tokens();
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = filter.residue(i);
    if (!ri) continue;
    const auto row = tensor.row(layer, head, i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto rj = filter.residue(j);
      if (!rj || !filter.admits(i, j) || !above_threshold(row[j], threshold)) continue;
      arcs.push_back({*ri, *rj, row[j]});
    }
  }
  return arcs;
}

void accumulate_protein(const AttentionTensor& tensor, const PropertyIndicator& indicator,
                        const AnalysisConfig& config, std::vector<HeadAccumulator>& heads) {
  const std::size_t layers = tensor.n_layers();
  const std::size_t n_heads = tensor.n_heads();
  if (heads.size() != layers * n_heads) {
    throw Error(ErrorCode::ShapeMismatch, "accumulator count does not match tensor heads");
  }
  const ArcFilter filter(tensor, config.exclude_flags);
  const std::size_t n = tensor.n_tokens();
  const float theta = static_cast<float>(config.theta);

  // Per-pair classification is shared by every head.
  enum : std::uint8_t { kSkip = 0, kMiss = 1, kHit = 2 };
  std::vector<std::uint8_t> pair_class(n * n, kSkip);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!filter.admits(i, j)) continue;
      const auto ri = filter.residue(i);
      const auto rj = filter.residue(j);
      if (ri && rj) {
        if (!indicator.defined(*ri, *rj)) continue;
        pair_class[i * n + j] = indicator(*ri, *rj) ? kHit : kMiss;
      } else {
        pair_class[i * n + j] = kMiss;
      }
    }
  }

  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      HeadAccumulator& acc = heads[l * n_heads + h];
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = tensor.row(l, h, i);
        const std::uint8_t* cls = pair_class.data() + i * n;
        double row_total = 0.0;
        double row_hits = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (cls[j] == kSkip) continue;
          const float w = row[j];
          const bool hit = cls[j] == kHit;
          row_total += w;
          if (hit) row_hits += w;
          if (w > theta) {
            ++acc.arcs;
            if (hit) ++acc.hits;
          }
        }
        acc.weighted_total.add(row_total);
        acc.weighted_hits.add(row_hits);
      }
    }
  }
}

BackgroundCounts background_counts(const PropertyIndicator& indicator) {
  BackgroundCounts bg;
  const std::size_t n = indicator.length();
  if (indicator.kind() == PropertyKind::Token) {
    for (std::size_t j = 0; j < n; ++j) {
      ++bg.total;
      if (indicator(0, j)) ++bg.positives;
    }
    return bg;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!indicator.defined(i, j)) continue;
      ++bg.total;
      if (indicator(i, j)) ++bg.positives;
    }
  }
  return bg;
}

HeadScoreTable finalize_table(const std::string& property, const AnalysisConfig& config,
                              std::size_t n_layers, std::size_t n_heads,
                              const std::vector<HeadAccumulator>& heads,
                              const BackgroundCounts& background) {
  HeadScoreTable table;
  table.property = property;
  table.mode = config.metric;
  table.n_layers = n_layers;
  table.n_heads = n_heads;
  table.background = background;
  table.heads.resize(heads.size());
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const HeadAccumulator& acc = heads[k];
    HeadScore& out = table.heads[k];
    out.arc_count = acc.arcs;
    out.hits = acc.hits;
    out.attention_mass = acc.weighted_total.value();
    if (config.metric == MetricMode::HighConfidence) {
      if (acc.arcs >= config.min_arcs && acc.arcs > 0) {
        out.score = static_cast<double>(acc.hits) / static_cast<double>(acc.arcs);
      }
    } else if (out.attention_mass > 0.0) {
      out.score = std::clamp(acc.weighted_hits.value() / out.attention_mass, 0.0, 1.0);
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

namespace {

struct BlockResult {
  // [property][head]
  std::vector<std::vector<HeadAccumulator>> heads;
  std::vector<BackgroundCounts> background;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  bool any_tensor = false;
};

void check_shape(BlockResult& block, const AttentionTensor& tensor, const ProteinRecord& record) {
  if (tensor.residue_count() != record.length()) {
    throw Error(ErrorCode::ShapeMismatch, record.id + ": tensor has " +
                                              std::to_string(tensor.residue_count()) +
                                              " RESIDUE tokens, record length " +
                                              std::to_string(record.length()));
  }
  if (!block.any_tensor) {
    block.any_tensor = true;
    block.n_layers = tensor.n_layers();
    block.n_heads = tensor.n_heads();
    for (auto& h : block.heads) h.assign(block.n_layers * block.n_heads, HeadAccumulator{});
  } else if (tensor.n_layers() != block.n_layers || tensor.n_heads() != block.n_heads) {
    throw Error(ErrorCode::ShapeMismatch, record.id + ": layer/head count differs from corpus");
  }
}

}  // namespace

std::vector<HeadScoreTable> score_heads(const std::vector<ProteinRecord>& corpus,
                                        const AttentionSource& source,
                                        const std::vector<Property>& properties,
                                        const AnalysisConfig& config, const ScoreOptions& options) {
  config.validate();
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });

  const std::size_t block_size = std::max<std::size_t>(1, options.block_size);
  const std::size_t n_blocks = (order.size() + block_size - 1) / block_size;
  std::vector<BlockResult> blocks(n_blocks);

  detail::parallel_for(n_blocks, options.threads, [&](std::size_t b) {
    BlockResult& block = blocks[b];
    block.heads.resize(properties.size());
    block.background.resize(properties.size());
    const std::size_t end = std::min(order.size(), (b + 1) * block_size);
    for (std::size_t k = b * block_size; k < end; ++k) {
      const ProteinRecord& record = corpus[order[k]];
      std::vector<std::optional<PropertyIndicator>> indicators;
      indicators.reserve(properties.size());
      bool needed = false;
      for (const auto& p : properties) {
        indicators.push_back(p.indicator_for(record));
        needed = needed || indicators.back().has_value();
      }
      if (!needed) continue;
      const auto tensor = source.load(record);
      check_shape(block, *tensor, record);
      for (std::size_t p = 0; p < properties.size(); ++p) {
        if (!indicators[p]) continue;
        accumulate_protein(*tensor, *indicators[p], config, block.heads[p]);
        block.background[p].merge(background_counts(*indicators[p]));
      }
    }
  });

  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  for (const auto& block : blocks) {
    if (!block.any_tensor) continue;
    if (n_layers == 0) {
      n_layers = block.n_layers;
      n_heads = block.n_heads;
    } else if (block.n_layers != n_layers || block.n_heads != n_heads) {
      throw Error(ErrorCode::ShapeMismatch, "layer/head count differs across the corpus");
    }
  }

  std::vector<HeadScoreTable> tables;
  tables.reserve(properties.size());
  for (std::size_t p = 0; p < properties.size(); ++p) {
    std::vector<HeadAccumulator> merged(n_layers * n_heads);
    BackgroundCounts background;
    for (const auto& block : blocks) {
      if (!block.any_tensor) continue;
      for (std::size_t k = 0; k < merged.size(); ++k) merged[k].merge(block.heads[p][k]);
      background.merge(block.background[p]);
    }
    tables.push_back(finalize_table(properties[p].name, config, n_layers, n_heads, merged, background));
  }
  return tables;
}

HeadScoreTable score_heads(const std::vector<ProteinRecord>& corpus, const AttentionSource& source,
                           const Property& property, const AnalysisConfig& config,
                           const ScoreOptions& options) {
  return std::move(score_heads(corpus, source, std::vector<Property>{property}, config, options).front());
}

BackgroundCounts background_counts(const std::vector<ProteinRecord>& corpus,
                                   const Property& property) {
  if (corpus.empty()) throw Error(ErrorCode::InvalidArgument, "background of an empty corpus");
  BackgroundCounts bg;
  for (const auto& record : corpus) {
    if (auto ind = property.indicator_for(record)) bg.merge(background_counts(*ind));
  }
  return bg;
}

double background_frequency(const std::vector<ProteinRecord>& corpus, const Property& property) {
  return background_counts(corpus, property).fraction();
}

}  // namespace protattn
