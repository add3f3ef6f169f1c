#include "protattn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "protattn/error.hpp"
#include "protattn/structure.hpp"

namespace protattn {

namespace {

constexpr double kBondLength = 3.8;
constexpr double kPlantedWeight = 0.7;

Vec3 random_direction(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(1.0 - z * z);
  return {r * std::cos(phi), r * std::sin(phi), z};
}

double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

std::vector<TokenFlag> layout(std::size_t length, std::size_t pad) {
  std::vector<TokenFlag> flags;
  flags.reserve(length + 2 + pad);
  flags.push_back(TokenFlag::Cls);
  flags.insert(flags.end(), length, TokenFlag::Residue);
  flags.push_back(TokenFlag::Sep);
  flags.insert(flags.end(), pad, TokenFlag::Pad);
  return flags;
}

// Writes `target` weight on `focus` and spreads the remainder evenly over
// non-PAD tokens.
void planted_row(std::span<float> row, std::span<const TokenFlag> flags, std::size_t focus) {
  std::size_t live = 0;
  for (auto f : flags) live += f != TokenFlag::Pad;
  const double rest = (1.0 - kPlantedWeight) / static_cast<double>(live);
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = flags[j] == TokenFlag::Pad ? 0.0f : static_cast<float>(rest);
  }
  row[focus] = static_cast<float>(kPlantedWeight + rest);
}

}  // namespace

ProteinRecord random_record(Rng& rng, std::string id, std::size_t length, double binding_rate,
                            double ptm_rate) {
  ProteinRecord r;
  r.id = std::move(id);
  r.sequence.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    r.sequence.push_back(static_cast<AminoAcid>(rng.below(kNumStandardAminoAcids)));
  }

  const double rg = 2.2 * std::pow(static_cast<double>(length), 0.38);
  const double radius = std::max(6.0, std::sqrt(5.0 / 3.0) * rg);
  std::vector<std::optional<Vec3>> coords;
  Vec3 pos{0.0, 0.0, 0.0};
  coords.emplace_back(pos);
  for (std::size_t i = 1; i < length; ++i) {
    Vec3 next = pos;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Vec3 d = random_direction(rng);
      next = {pos.x + kBondLength * d.x, pos.y + kBondLength * d.y, pos.z + kBondLength * d.z};
      if (norm(next) <= radius) break;
    }
    pos = next;
    coords.emplace_back(pos);
  }
  r.coords = std::move(coords);

  std::vector<SecondaryStructure> ss;
  while (ss.size() < length) {
    const auto label = static_cast<SecondaryStructure>(rng.below(4));
    const std::size_t run = 2 + static_cast<std::size_t>(rng.below(6));
    for (std::size_t k = 0; k < run && ss.size() < length; ++k) ss.push_back(label);
  }
  r.ss_labels = std::move(ss);

  for (std::size_t i = 0; i < length; ++i) {
    if (rng.uniform() < binding_rate) r.binding_sites.insert(i);
    if (rng.uniform() < ptm_rate) r.ptm_sites.insert(i);
  }
  return r;
}

AttentionTensor random_attention(Rng& rng, const std::string& id, std::size_t n_layers,
                                 std::size_t n_heads, const std::vector<TokenFlag>& flags,
                                 double sigma) {
  const std::size_t n = flags.size();
  std::vector<float> weights(n_layers * n_heads * n * n, 0.0f);
  std::vector<double> row(n);
  for (std::size_t block = 0; block < n_layers * n_heads; ++block) {
    for (std::size_t i = 0; i < n; ++i) {
      if (flags[i] == TokenFlag::Pad) continue;
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = flags[j] == TokenFlag::Pad ? 0.0 : std::exp(sigma * rng.normal());
        sum += row[j];
      }
      float* out = weights.data() + (block * n + i) * n;
      for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<float>(row[j] / sum);
    }
  }
  return AttentionTensor(id, n_layers, n_heads, flags, std::move(weights));
}

SyntheticDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.min_length == 0 || spec.min_length > spec.max_length || spec.n_layers == 0 ||
      spec.n_heads == 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid synthetic corpus shape");
  }
  const auto check_head = [&](const std::optional<HeadIndex>& h) {
    if (h && (h->layer >= spec.n_layers || h->head >= spec.n_heads)) {
      throw Error(ErrorCode::InvalidArgument, "planted head out of range");
    }
  };
  check_head(spec.contact_head);
  check_head(spec.binding_head);

  SyntheticDataset data;
  const std::size_t width = std::to_string(spec.n_proteins).size();
  for (std::size_t p = 0; p < spec.n_proteins; ++p) {
    Rng rng(stream_seed(spec.seed, p));
    std::string num = std::to_string(p);
    num.insert(0, width - num.size(), '0');
    const std::string id = spec.id_prefix + num;
    const std::size_t length =
        spec.min_length + static_cast<std::size_t>(rng.below(spec.max_length - spec.min_length + 1));
    ProteinRecord record = random_record(rng, id, length, spec.binding_rate, spec.ptm_rate);
    const auto flags = layout(length, spec.pad_tokens);
    AttentionTensor attn = random_attention(rng, id, spec.n_layers, spec.n_heads, flags,
                                            spec.attention_sigma);
    const std::size_t sep = length + 1;

    if (spec.contact_head) {
      const ContactMap contacts = derive_contacts(record);
      std::vector<std::vector<std::size_t>> partners(length);
      for (auto [i, j] : contacts.pairs()) {
        partners[i].push_back(j);
        partners[j].push_back(i);
      }
      for (std::size_t i = 0; i < length; ++i) {
        const std::size_t focus =
            partners[i].empty() ? sep : 1 + partners[i][rng.below(partners[i].size())];
        planted_row(attn.mutable_row(spec.contact_head->layer, spec.contact_head->head, i + 1),
                    flags, focus);
      }
    }
    if (spec.binding_head) {
      const std::vector<std::size_t> sites(record.binding_sites.begin(), record.binding_sites.end());
      for (std::size_t i = 0; i < length; ++i) {
        const std::size_t focus = sites.empty() ? sep : 1 + sites[rng.below(sites.size())];
        planted_row(attn.mutable_row(spec.binding_head->layer, spec.binding_head->head, i + 1),
                    flags, focus);
      }
    }

    if (spec.embedding_dim > 0) {
      const std::size_t d = spec.embedding_dim;
      std::vector<float> values(spec.n_layers * flags.size() * d);
      for (auto& v : values) v = static_cast<float>(rng.normal());
      if (spec.embedding_signal_layer && *spec.embedding_signal_layer < spec.n_layers) {
        const std::size_t l = *spec.embedding_signal_layer;
        for (std::size_t i = 0; i < length; ++i) {
          float* v = values.data() + (l * flags.size() + i + 1) * d;
          v[0] += record.binding_sites.count(i) ? 4.0f : -4.0f;
          if (d >= 5) v[1 + static_cast<std::size_t>((*record.ss_labels)[i])] += 4.0f;
        }
      }
      data.embeddings.emplace_back(id, spec.n_layers, d, flags, std::move(values));
    }
    data.records.push_back(std::move(record));
    data.attention.push_back(std::move(attn));
  }
  return data;
}

void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "attn", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / "attn").string());
  write_corpus(dir / "corpus.jsonl", data.records);
  for (const auto& t : data.attention) write_attention(attention_path(dir / "attn", t.protein_id()), t);
  if (!data.embeddings.empty()) {
    std::filesystem::create_directories(dir / "emb", ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / "emb").string());
    for (const auto& e : data.embeddings) {
      write_embeddings(embedding_path(dir / "emb", e.protein_id()), e);
    }
  }
}

}  // namespace protattn
