#include "protattn/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "parallel.hpp"
#include "protattn/error.hpp"
#include "protattn/rng.hpp"
#include "protattn/structure.hpp"

namespace protattn {

std::string to_string(ProbeTask task) {
  switch (task) {
    case ProbeTask::SecondaryStructure: return "secondary_structure";
    case ProbeTask::BindingSite: return "binding_site";
    case ProbeTask::Contact: return "contact";
  }
  return "unknown";
}

std::string to_string(Representation rep) {
  return rep == Representation::Embedding ? "embedding" : "attention";
}

std::optional<ProbeTask> probe_task_from_string(const std::string& s) {
  if (s == "secondary_structure" || s == "ss") return ProbeTask::SecondaryStructure;
  if (s == "binding_site" || s == "binding") return ProbeTask::BindingSite;
  if (s == "contact") return ProbeTask::Contact;
  return std::nullopt;
}

std::optional<Representation> representation_from_string(const std::string& s) {
  if (s == "embedding") return Representation::Embedding;
  if (s == "attention") return Representation::Attention;
  return std::nullopt;
}

void ProbeSpec::validate() const {
  if (representation == Representation::Attention && task != ProbeTask::Contact) {
    throw Error(ErrorCode::InvalidArgument, "attention probes are defined for the contact task only");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "validation_fraction must lie in (0, 1)");
  }
  if (!(params.learning_rate > 0.0) || params.epochs == 0 || params.batch_size == 0 ||
      params.l2 < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid training hyperparameters");
  }
  if (!(negatives_per_positive > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "negatives_per_positive must be positive");
  }
}

std::size_t num_classes(ProbeTask task) noexcept {
  return task == ProbeTask::SecondaryStructure ? 4 : 2;
}

void FeatureMatrix::append(std::span<const double> values) {
  if (values.size() != cols_) throw Error(ErrorCode::ShapeMismatch, "feature row width");
  data_.insert(data_.end(), values.begin(), values.end());
}

void FeatureMatrix::append(std::span<const float> values) {
  if (values.size() != cols_) throw Error(ErrorCode::ShapeMismatch, "feature row width");
  data_.insert(data_.end(), values.begin(), values.end());
}

// ---------------------------------------------------------------------------
// Features

namespace {

std::vector<std::size_t> residue_tokens(std::span<const TokenFlag> flags) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < flags.size(); ++t) {
    if (flags[t] == TokenFlag::Residue) out.push_back(t);
  }
  return out;
}

void embedding_pair(const EmbeddingTensor& emb, std::size_t layer, std::size_t ti, std::size_t tj,
                    std::vector<double>& out) {
  const auto hi = emb.vector(layer, ti);
  const auto hj = emb.vector(layer, tj);
  const std::size_t d = emb.dim();
  out.resize(2 * d);
  for (std::size_t k = 0; k < d; ++k) {
    out[k] = static_cast<double>(hi[k]) - static_cast<double>(hj[k]);
    out[d + k] = static_cast<double>(hi[k]) * static_cast<double>(hj[k]);
  }
}

void attention_pair(const AttentionTensor& attn, std::size_t layer, std::size_t ti, std::size_t tj,
                    std::vector<double>& out) {
  const std::size_t h = attn.n_heads();
  out.resize(2 * h);
  for (std::size_t k = 0; k < h; ++k) {
    out[k] = attn.weight(layer, k, ti, tj);
    out[h + k] = attn.weight(layer, k, tj, ti);
  }
}

void check_pair(std::size_t i, std::size_t j, std::size_t n_residues) {
  if (i == j) throw Error(ErrorCode::InvalidArgument, "pair features need i != j");
  if (i >= n_residues || j >= n_residues) {
    throw Error(ErrorCode::InvalidArgument, "residue index out of range");
  }
}

}  // namespace

FeatureMatrix build_token_features(const EmbeddingTensor& emb, std::size_t layer) {
  if (layer >= emb.n_layers()) throw Error(ErrorCode::InvalidArgument, "layer out of range");
  FeatureMatrix out(emb.dim());
  for (std::size_t t : residue_tokens(emb.flags())) out.append(emb.vector(layer, t));
  return out;
}

std::vector<double> build_pair_features_embedding(const EmbeddingTensor& emb, std::size_t layer,
                                                  std::size_t i, std::size_t j) {
  if (layer >= emb.n_layers()) throw Error(ErrorCode::InvalidArgument, "layer out of range");
  const auto tokens = residue_tokens(emb.flags());
  check_pair(i, j, tokens.size());
  std::vector<double> out;
  embedding_pair(emb, layer, tokens[i], tokens[j], out);
  return out;
}

std::vector<double> build_pair_features_attention(const AttentionTensor& attn, std::size_t layer,
                                                  std::size_t i, std::size_t j) {
  if (layer >= attn.n_layers()) throw Error(ErrorCode::InvalidArgument, "layer out of range");
  const auto tokens = residue_tokens(attn.flags());
  check_pair(i, j, tokens.size());
  std::vector<double> out;
  attention_pair(attn, layer, tokens[i], tokens[j], out);
  return out;
}

// ---------------------------------------------------------------------------
// Loss

namespace {

std::size_t outputs_for(std::size_t n_classes) { return n_classes == 2 ? 1 : n_classes; }

// Accumulates the summed (not averaged) data loss and gradient over `rows`.
double accumulate_loss(const LinearParams& p, const FeatureMatrix& x, std::span<const int> labels,
                       std::size_t n_classes, std::span<const std::size_t> rows,
                       std::vector<double>* grad_w, std::vector<double>* grad_b) {
  const std::size_t d = p.n_inputs;
  const std::size_t k_out = p.n_outputs;
  std::vector<double> z(k_out);
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto xr = x.row(r);
    for (std::size_t k = 0; k < k_out; ++k) {
      double acc = p.bias[k];
      const double* w = p.weights.data() + k * d;
      for (std::size_t c = 0; c < d; ++c) acc += w[c] * xr[c];
      z[k] = acc;
    }
    const int y = labels[r];
    if (n_classes == 2) {
      const double zz = z[0];
      loss += std::max(zz, 0.0) - (y == 1 ? zz : 0.0) + std::log1p(std::exp(-std::abs(zz)));
      z[0] = 1.0 / (1.0 + std::exp(-zz)) - (y == 1 ? 1.0 : 0.0);
    } else {
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - zmax);
      const double lse = zmax + std::log(sum);
      loss += lse - z[static_cast<std::size_t>(y)];
      for (std::size_t k = 0; k < k_out; ++k) {
        z[k] = std::exp(z[k] - lse) - (static_cast<int>(k) == y ? 1.0 : 0.0);
      }
    }
    if (grad_w) {
      for (std::size_t k = 0; k < k_out; ++k) {
        double* g = grad_w->data() + k * d;
        for (std::size_t c = 0; c < d; ++c) g[c] += z[k] * xr[c];
        (*grad_b)[k] += z[k];
      }
    }
  }
  return loss;
}

void check_labels(std::span<const int> labels, std::size_t n_classes) {
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw Error(ErrorCode::InvalidArgument, "label out of range");
    }
  }
}

double l2_penalty(const LinearParams& p, double l2) {
  double s = 0.0;
  for (double w : p.weights) s += w * w;
  return 0.5 * l2 * s;
}

}  // namespace

LossGradient probe_loss_gradient(const LinearParams& params, const FeatureMatrix& x,
                                 std::span<const int> labels, std::size_t n_classes, double l2) {
  if (x.rows() != labels.size() || x.rows() == 0 || x.cols() != params.n_inputs ||
      params.n_outputs != outputs_for(n_classes)) {
    throw Error(ErrorCode::ShapeMismatch, "loss inputs disagree on shape");
  }
  check_labels(labels, n_classes);
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  LossGradient out;
  out.weights.assign(params.weights.size(), 0.0);
  out.bias.assign(params.bias.size(), 0.0);
  const double n = static_cast<double>(x.rows());
  out.loss = accumulate_loss(params, x, labels, n_classes, rows, &out.weights, &out.bias) / n +
             l2_penalty(params, l2);
  for (std::size_t k = 0; k < out.weights.size(); ++k) {
    out.weights[k] = out.weights[k] / n + l2 * params.weights[k];
  }
  for (double& b : out.bias) b /= n;
  return out;
}

// ---------------------------------------------------------------------------
// Model

LinearModel::LinearModel(LinearParams params, std::size_t n_classes, std::vector<double> mean,
                         std::vector<double> scale)
    : params_(std::move(params)), n_classes_(n_classes), mean_(std::move(mean)), scale_(std::move(scale)) {}

std::vector<double> LinearModel::logits(std::span<const double> x) const {
  if (x.size() != params_.n_inputs) throw Error(ErrorCode::ShapeMismatch, "feature width");
  std::vector<double> z(params_.n_outputs);
  for (std::size_t k = 0; k < params_.n_outputs; ++k) {
    double acc = params_.bias[k];
    const double* w = params_.weights.data() + k * params_.n_inputs;
    for (std::size_t c = 0; c < params_.n_inputs; ++c) acc += w[c] * (x[c] - mean_[c]) / scale_[c];
    z[k] = acc;
  }
  return z;
}

std::vector<double> LinearModel::probabilities(std::span<const double> x) const {
  auto z = logits(x);
  if (n_classes_ == 2) {
    const double p = 1.0 / (1.0 + std::exp(-z[0]));
    return {1.0 - p, p};
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - zmax));
  for (double& v : z) v /= sum;
  return z;
}

std::size_t LinearModel::predict(std::span<const double> x) const {
  const auto p = probabilities(x);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double LinearModel::positive_score(std::span<const double> x) const {
  if (n_classes_ != 2) throw Error(ErrorCode::InvalidArgument, "positive_score needs a binary model");
  return logits(x)[0];
}

LinearModel train_linear(const TrainingParams& params, std::size_t n_classes, const FeatureMatrix& x,
                         std::span<const int> labels, TrainingReport* report) {
  if (x.rows() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "features vs labels");
  check_labels(labels, n_classes);
  std::vector<std::size_t> counts(n_classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw Error(ErrorCode::SingleClassLabels, "training labels contain fewer than two classes");
  }

  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x.row(r);
    for (std::size_t c = 0; c < d; ++c) mean[c] += row[c];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x.row(r);
    for (std::size_t c = 0; c < d; ++c) scale[c] += (row[c] - mean[c]) * (row[c] - mean[c]);
  }
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 1e-12)) s = 1.0;
  }
  FeatureMatrix z(d);
  std::vector<double> buf(d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x.row(r);
    for (std::size_t c = 0; c < d; ++c) buf[c] = (row[c] - mean[c]) / scale[c];
    z.append(std::span<const double>(buf));
  }

  LinearParams p;
  p.n_inputs = d;
  p.n_outputs = outputs_for(n_classes);
  p.weights.assign(p.n_outputs * d, 0.0);
  p.bias.assign(p.n_outputs, 0.0);
  // Start at the smoothed class prior.
  const auto prior = [&](std::size_t k) {
    return (static_cast<double>(counts[k]) + 1.0) / (static_cast<double>(n) + static_cast<double>(n_classes));
  };
  if (n_classes == 2) {
    p.bias[0] = std::log(prior(1) / prior(0));
  } else {
    for (std::size_t k = 0; k < n_classes; ++k) p.bias[k] = std::log(prior(k));
  }

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::vector<double> mw(p.weights.size(), 0.0), vw(p.weights.size(), 0.0);
  std::vector<double> mb(p.bias.size(), 0.0), vb(p.bias.size(), 0.0);
  std::vector<double> gw(p.weights.size()), gb(p.bias.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  double previous_loss = 0.0;
  double last_loss = 0.0;

  const auto full_loss = [&] {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    return accumulate_loss(p, z, labels, n_classes, all, nullptr, nullptr) / static_cast<double>(n) +
           l2_penalty(p, params.l2);
  };

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    Rng rng(stream_seed(params.seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += params.batch_size) {
      const std::size_t end = std::min(n, start + params.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      accumulate_loss(p, z, labels, n_classes, batch, &gw, &gb);
      const double bn = static_cast<double>(batch.size());
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      const auto update = [&](std::vector<double>& param, std::vector<double>& g,
                              std::vector<double>& m, std::vector<double>& v, bool decay) {
        for (std::size_t k = 0; k < param.size(); ++k) {
          const double grad = g[k] / bn + (decay ? params.l2 * param[k] : 0.0);
          m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * grad;
          v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * grad * grad;
          param[k] -= params.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
        }
      };
      update(p.weights, gw, mw, vw, true);
      update(p.bias, gb, mb, vb, false);
    }
    if (epoch + 2 >= params.epochs) {
      previous_loss = last_loss;
      last_loss = full_loss();
    }
  }
  if (report) {
    report->final_loss = last_loss;
    report->converged = params.epochs >= 2 &&
                        std::abs(last_loss - previous_loss) <= 1e-3 * std::max(1.0, std::abs(previous_loss));
  }
  return LinearModel(std::move(p), n_classes, std::move(mean), std::move(scale));
}

LinearModel train_probe(const ProbeSpec& spec, const FeatureMatrix& x, std::span<const int> labels,
                        TrainingReport* report) {
  spec.validate();
  return train_linear(spec.params, num_classes(spec.task), x, labels, report);
}

// ---------------------------------------------------------------------------
// Evaluation

double precision_at_k(std::span<const double> scores, std::span<const int> labels, std::size_t k) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "scores vs labels");
  k = std::min(k, scores.size());
  if (k == 0) throw Error(ErrorCode::EmptyEval, "precision@k with no candidates");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r) hits += labels[idx[r]] == 1;
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::size_t top_k_for(ProbeTask task, std::size_t length) {
  const std::size_t divisor = task == ProbeTask::Contact ? 5 : 20;
  return std::max<std::size_t>(1, length / divisor);
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes) {
  if (truth.size() != predicted.size()) throw Error(ErrorCode::ShapeMismatch, "truth vs predicted");
  if (truth.empty()) throw Error(ErrorCode::EmptyEval, "macro F1 of nothing");
  std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (t >= n_classes || p >= n_classes) throw Error(ErrorCode::InvalidArgument, "class out of range");
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    ++used;
  }
  return sum / static_cast<double>(used);
}

double evaluate_probe(const LinearModel& model, const std::vector<ProteinExamples>& eval,
                      ProbeTask task) {
  if (task == ProbeTask::SecondaryStructure) {
    std::vector<int> truth;
    std::vector<int> predicted;
    for (const auto& protein : eval) {
      for (std::size_t r = 0; r < protein.features.rows(); ++r) {
        truth.push_back(protein.labels[r]);
        predicted.push_back(static_cast<int>(model.predict(protein.features.row(r))));
      }
    }
    if (truth.empty()) throw Error(ErrorCode::EmptyEval, "no secondary-structure examples");
    return macro_f1(truth, predicted, num_classes(task));
  }
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> scores;
  for (const auto& protein : eval) {
    const std::size_t rows = protein.features.rows();
    // Precision@k is undefined for a protein without positives: even a
    // perfect ranking scores 0 there.
    if (rows == 0 || std::find(protein.labels.begin(), protein.labels.end(), 1) == protein.labels.end()) {
      continue;
    }
    scores.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) scores[r] = model.positive_score(protein.features.row(r));
    sum += precision_at_k(scores, protein.labels, top_k_for(task, protein.length));
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::EmptyEval, "no proteins with positive candidates");
  return sum / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// Sources and sweeps

InMemoryEmbeddings::InMemoryEmbeddings(std::vector<EmbeddingTensor> tensors) {
  for (auto& t : tensors) add(std::move(t));
}

void InMemoryEmbeddings::add(EmbeddingTensor tensor) {
  auto id = tensor.protein_id();
  tensors_[id] = std::make_shared<const EmbeddingTensor>(std::move(tensor));
}

std::shared_ptr<const EmbeddingTensor> InMemoryEmbeddings::load(const ProteinRecord& record) const {
  auto it = tensors_.find(record.id);
  if (it == tensors_.end()) throw Error(ErrorCode::MissingTensor, record.id);
  return it->second;
}

std::shared_ptr<const EmbeddingTensor> DirectoryEmbeddings::load(const ProteinRecord& record) const {
  const auto path = embedding_path(dir_, record.id);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingTensor, record.id + " (" + path.string() + ")");
  }
  return std::make_shared<const EmbeddingTensor>(read_embeddings(path, record.length()));
}

std::optional<ProteinExamples> build_examples(const ProbeSpec& spec, const ProteinRecord& record,
                                              const AttentionSource* attention,
                                              const EmbeddingSource* embeddings) {
  if (spec.task == ProbeTask::SecondaryStructure && !record.ss_labels) return std::nullopt;
  if (spec.task == ProbeTask::Contact && !record.coords) return std::nullopt;

  std::shared_ptr<const EmbeddingTensor> emb;
  std::shared_ptr<const AttentionTensor> attn;
  std::vector<std::size_t> tokens;
  if (spec.representation == Representation::Embedding) {
    if (!embeddings) throw Error(ErrorCode::InvalidArgument, "embedding probe without embeddings");
    emb = embeddings->load(record);
    if (spec.layer >= emb->n_layers()) throw Error(ErrorCode::InvalidArgument, "layer out of range");
    tokens = residue_tokens(emb->flags());
  } else {
    if (!attention) throw Error(ErrorCode::InvalidArgument, "attention probe without attention");
    attn = attention->load(record);
    if (spec.layer >= attn->n_layers()) throw Error(ErrorCode::InvalidArgument, "layer out of range");
    tokens = residue_tokens(attn->flags());
  }
  if (tokens.size() != record.length()) {
    throw Error(ErrorCode::ShapeMismatch, record.id + ": RESIDUE token count differs from length");
  }

  ProteinExamples ex;
  ex.protein_id = record.id;
  ex.length = record.length();
  const std::size_t n = record.length();
  if (spec.task != ProbeTask::Contact) {
    ex.features = FeatureMatrix(emb->dim());
    for (std::size_t i = 0; i < n; ++i) {
      ex.features.append(emb->vector(spec.layer, tokens[i]));
      if (spec.task == ProbeTask::SecondaryStructure) {
        ex.labels.push_back(static_cast<int>((*record.ss_labels)[i]));
      } else {
        ex.labels.push_back(record.binding_sites.count(i) ? 1 : 0);
      }
    }
    return ex;
  }

  const ContactMap contacts = derive_contacts(record);
  const auto& coords = *record.coords;
  ex.features = FeatureMatrix(emb ? 2 * emb->dim() : 2 * attn->n_heads());
  std::vector<double> buf;
  for (std::size_t i = 0; i < n; ++i) {
    if (!coords[i]) continue;
    for (std::size_t j = i + kContactSeparation; j < n; ++j) {
      if (!coords[j]) continue;
      if (emb) {
        embedding_pair(*emb, spec.layer, tokens[i], tokens[j], buf);
      } else {
        attention_pair(*attn, spec.layer, tokens[i], tokens[j], buf);
      }
      ex.features.append(std::span<const double>(buf));
      ex.labels.push_back(contacts.contact(i, j) ? 1 : 0);
    }
  }
  return ex;
}

SplitIds split_corpus(const std::vector<ProteinRecord>& corpus, double validation_fraction,
                      std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& r : corpus) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  if (ids.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two proteins to split");
  Rng rng(stream_seed(seed, 0x5B117ull));
  rng.shuffle(std::span<std::string>(ids));
  auto n_val = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(ids.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
  SplitIds split;
  split.validation.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

namespace {

ProbeResult run_layer(const ProbeSpec& spec, const std::vector<const ProteinRecord*>& train,
                      const std::vector<const ProteinRecord*>& validation,
                      const AttentionSource* attention, const EmbeddingSource* embeddings) {
  FeatureMatrix x;
  std::vector<int> y;
  bool first = true;
  for (const auto* record : train) {
    auto ex = build_examples(spec, *record, attention, embeddings);
    if (!ex) continue;
    if (first) {
      x = FeatureMatrix(ex->features.cols());
      first = false;
    }
    for (std::size_t r = 0; r < ex->features.rows(); ++r) {
      x.append(ex->features.row(r));
      y.push_back(ex->labels[r]);
    }
  }
  if (spec.task == ProbeTask::Contact && !y.empty()) {
    std::vector<std::size_t> negatives;
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < y.size(); ++r) (y[r] == 1 ? keep : negatives).push_back(r);
    const auto budget = static_cast<std::size_t>(spec.negatives_per_positive * static_cast<double>(keep.size()));
    if (negatives.size() > budget) {
      Rng rng(stream_seed(spec.params.seed, 0xBA1A0CEull, spec.layer));
      rng.shuffle(std::span<std::size_t>(negatives));
      negatives.resize(budget);
    }
    keep.insert(keep.end(), negatives.begin(), negatives.end());
    std::sort(keep.begin(), keep.end());
    FeatureMatrix bx(x.cols());
    std::vector<int> by;
    for (std::size_t r : keep) {
      bx.append(x.row(r));
      by.push_back(y[r]);
    }
    x = std::move(bx);
    y = std::move(by);
  }

  std::vector<ProteinExamples> eval;
  std::size_t n_eval = 0;
  for (const auto* record : validation) {
    auto ex = build_examples(spec, *record, attention, embeddings);
    if (!ex) continue;
    n_eval += ex->labels.size();
    eval.push_back(std::move(*ex));
  }

  TrainingReport report;
  const LinearModel model = train_probe(spec, x, y, &report);
  ProbeResult result;
  result.task = spec.task;
  result.representation = spec.representation;
  result.layer = spec.layer;
  result.metric = evaluate_probe(model, eval, spec.task);
  result.n_train = y.size();
  result.n_eval = n_eval;
  result.seed = spec.params.seed;
  result.converged = report.converged;
  return result;
}

}  // namespace

std::vector<ProbeResult> layer_sweep(const ProbeSpec& spec, const std::vector<ProteinRecord>& corpus,
                                     const AttentionSource* attention,
                                     const EmbeddingSource* embeddings, std::size_t threads) {
  spec.validate();
  if (spec.representation == Representation::Embedding && !embeddings) {
    throw Error(ErrorCode::InvalidArgument, "embedding probe requires an embeddings source");
  }
  if (spec.representation == Representation::Attention && !attention) {
    throw Error(ErrorCode::InvalidArgument, "attention probe requires an attention source");
  }
  const SplitIds split = split_corpus(corpus, spec.validation_fraction, spec.params.seed);
  std::map<std::string, const ProteinRecord*> by_id;
  for (const auto& r : corpus) by_id[r.id] = &r;
  std::vector<const ProteinRecord*> train, validation;
  for (const auto& id : split.train) train.push_back(by_id.at(id));
  for (const auto& id : split.validation) validation.push_back(by_id.at(id));

  std::size_t n_layers = 0;
  for (const auto* r : train) {
    if (spec.task == ProbeTask::SecondaryStructure && !r->ss_labels) continue;
    if (spec.task == ProbeTask::Contact && !r->coords) continue;
    n_layers = spec.representation == Representation::Embedding ? embeddings->load(*r)->n_layers()
                                                                : attention->load(*r)->n_layers();
    break;
  }
  if (n_layers == 0) throw Error(ErrorCode::EmptyEval, "no training protein carries the task's labels");

  std::vector<ProbeResult> results(n_layers);
  detail::parallel_for(n_layers, threads, [&](std::size_t layer) {
    ProbeSpec s = spec;
    s.layer = layer;
    results[layer] = run_layer(s, train, validation, attention, embeddings);
  });
  return results;
}

std::string probe_results_json(const std::vector<ProbeResult>& results) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["task"] = to_string(r.task);
    j["representation"] = to_string(r.representation);
    j["layer"] = r.layer + 1;
    j["metric"] = r.metric;
    j["n_train"] = r.n_train;
    j["n_eval"] = r.n_eval;
    j["seed"] = r.seed;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace protattn
