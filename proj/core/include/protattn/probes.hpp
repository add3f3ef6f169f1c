#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protattn/corpus.hpp"
#include "protattn/metrics.hpp"
#include "protattn/tensors.hpp"

namespace protattn {

enum class ProbeTask { SecondaryStructure, BindingSite, Contact };
enum class Representation { Embedding, Attention };

std::string to_string(ProbeTask task);
std::string to_string(Representation rep);
std::optional<ProbeTask> probe_task_from_string(const std::string& s);
std::optional<Representation> representation_from_string(const std::string& s);

struct TrainingParams {
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  double l2 = 1e-4;
  std::uint64_t seed = 42;
  std::size_t batch_size = 32;
};

struct ProbeSpec {
  ProbeTask task = ProbeTask::BindingSite;
  Representation representation = Representation::Embedding;
  std::size_t layer = 0;  // 0-based
  TrainingParams params;
  double validation_fraction = 0.2;
  // Contact task only: keep all positive pairs and at most this many
  // negatives per positive in the training set.
  double negatives_per_positive = 1.0;

  // Throws InvalidArgument for attention probes on token-level tasks.
  void validate() const;
};

std::size_t num_classes(ProbeTask task) noexcept;

// Row-major dense matrix of probe inputs.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t cols) : cols_(cols) {}

  std::size_t rows() const noexcept { return cols_ == 0 ? 0 : data_.size() / cols_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> mutable_row(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }
  void append(std::span<const double> values);
  void append(std::span<const float> values);

 private:
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// One row per RESIDUE token (in token order): that token's layer vector.
FeatureMatrix build_token_features(const EmbeddingTensor& emb, std::size_t layer);
// concat(h_i - h_j, h_i * h_j) for residue indices i != j.
std::vector<double> build_pair_features_embedding(const EmbeddingTensor& emb, std::size_t layer,
                                                  std::size_t i, std::size_t j);
// concat over heads of a(i -> j), then concat over heads of a(j -> i).
std::vector<double> build_pair_features_attention(const AttentionTensor& attn, std::size_t layer,
                                                  std::size_t i, std::size_t j);

// Linear map with one output per class, or a single logit for binary tasks.
struct LinearParams {
  std::size_t n_inputs = 0;
  std::size_t n_outputs = 0;
  std::vector<double> weights;  // n_outputs x n_inputs
  std::vector<double> bias;     // n_outputs
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> weights;
  std::vector<double> bias;
};

// Mean logistic (n_classes == 2) or softmax cross-entropy loss over the rows,
// plus 0.5 * l2 * |W|^2, and its analytic gradient.
LossGradient probe_loss_gradient(const LinearParams& params, const FeatureMatrix& x,
                                 std::span<const int> labels, std::size_t n_classes, double l2);

class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(LinearParams params, std::size_t n_classes, std::vector<double> mean,
              std::vector<double> scale);

  std::size_t n_classes() const noexcept { return n_classes_; }
  const LinearParams& params() const noexcept { return params_; }
  // Class probabilities for one raw (unstandardised) feature vector.
  std::vector<double> probabilities(std::span<const double> x) const;
  std::size_t predict(std::span<const double> x) const;
  // Ranking score for the positive class of a binary model.
  double positive_score(std::span<const double> x) const;

 private:
  std::vector<double> logits(std::span<const double> x) const;

  LinearParams params_;
  std::size_t n_classes_ = 2;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

struct TrainingReport {
  double final_loss = 0.0;
  bool converged = false;
};

// Standardises features, then minimises the regularised loss with mini-batch
// Adam. Deterministic in params.seed. Throws SingleClassLabels when fewer
// than two classes occur.
LinearModel train_linear(const TrainingParams& params, std::size_t n_classes, const FeatureMatrix& x,
                         std::span<const int> labels, TrainingReport* report = nullptr);
LinearModel train_probe(const ProbeSpec& spec, const FeatureMatrix& x, std::span<const int> labels,
                        TrainingReport* report = nullptr);

// Candidates of one protein: residues for token tasks, residue pairs
// (i < j, j - i >= 6, both coordinates known) for the contact task.
struct ProteinExamples {
  std::string protein_id;
  std::size_t length = 0;
  FeatureMatrix features;
  std::vector<int> labels;
};

// Fraction of positives among the k best scores (ties: lower index first).
double precision_at_k(std::span<const double> scores, std::span<const int> labels, std::size_t k);
// floor(L / 5) for contacts, floor(L / 20) for binding sites, at least 1.
std::size_t top_k_for(ProbeTask task, std::size_t length);
// Mean F1 over classes that occur in the truth or the predictions.
double macro_f1(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes);

// Macro F1 for secondary structure; mean per-protein precision@k otherwise,
// over proteins with at least one positive candidate.
// Throws EmptyEval when nothing can be scored.
double evaluate_probe(const LinearModel& model, const std::vector<ProteinExamples>& eval,
                      ProbeTask task);

// ---------------------------------------------------------------------------

class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual std::shared_ptr<const EmbeddingTensor> load(const ProteinRecord& record) const = 0;
};

class InMemoryEmbeddings final : public EmbeddingSource {
 public:
  InMemoryEmbeddings() = default;
  explicit InMemoryEmbeddings(std::vector<EmbeddingTensor> tensors);
  void add(EmbeddingTensor tensor);
  std::shared_ptr<const EmbeddingTensor> load(const ProteinRecord& record) const override;

 private:
  std::map<std::string, std::shared_ptr<const EmbeddingTensor>> tensors_;
};

class DirectoryEmbeddings final : public EmbeddingSource {
 public:
  explicit DirectoryEmbeddings(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::shared_ptr<const EmbeddingTensor> load(const ProteinRecord& record) const override;

 private:
  std::filesystem::path dir_;
};

// Builds the candidate set for one protein at one layer. Returns nullopt when
// the protein lacks the annotation the task needs.
std::optional<ProteinExamples> build_examples(const ProbeSpec& spec, const ProteinRecord& record,
                                              const AttentionSource* attention,
                                              const EmbeddingSource* embeddings);

struct ProbeResult {
  ProbeTask task = ProbeTask::BindingSite;
  Representation representation = Representation::Embedding;
  std::size_t layer = 0;  // 0-based
  double metric = 0.0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  std::uint64_t seed = 0;
  bool converged = false;
};

struct SplitIds {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

// Seeded shuffle of the sorted ids; the first ceil(fraction * N) become the
// validation split (at least one protein in each split).
SplitIds split_corpus(const std::vector<ProteinRecord>& corpus, double validation_fraction,
                      std::uint64_t seed);

// Trains and evaluates one probe per layer (spec.layer is ignored).
std::vector<ProbeResult> layer_sweep(const ProbeSpec& spec, const std::vector<ProteinRecord>& corpus,
                                     const AttentionSource* attention,
                                     const EmbeddingSource* embeddings, std::size_t threads = 1);

// JSON array of {task, representation, layer (1-based), metric, n_train, n_eval, seed}.
std::string probe_results_json(const std::vector<ProbeResult>& results);

}  // namespace protattn
