#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protattn/corpus.hpp"
#include "protattn/rng.hpp"
#include "protattn/tensors.hpp"

namespace protattn {

struct HeadIndex {
  std::size_t layer = 0;
  std::size_t head = 0;
};

// Parameters for deterministic synthetic corpora used by fixtures, tests and
// benchmarks. Token layout per protein: CLS, residues, SEP, then pad_tokens PADs.
struct SyntheticSpec {
  std::size_t n_proteins = 20;
  std::size_t min_length = 30;
  std::size_t max_length = 50;
  std::size_t n_layers = 2;
  std::size_t n_heads = 3;
  std::size_t pad_tokens = 0;
  std::uint64_t seed = 1;
  double binding_rate = 0.08;
  double ptm_rate = 0.02;
  // Log-normal spread of the unplanted heads; larger gives peakier rows.
  double attention_sigma = 2.5;
  // Head that puts 0.7 of each residue row on one of its contacts.
  std::optional<HeadIndex> contact_head;
  // Head that puts 0.7 of each residue row on one binding site.
  std::optional<HeadIndex> binding_head;
  // 0 disables embeddings.
  std::size_t embedding_dim = 0;
  // Layer whose embeddings encode binding-site and secondary-structure labels.
  std::optional<std::size_t> embedding_signal_layer;
  std::string id_prefix = "SYN";
};

struct SyntheticDataset {
  std::vector<ProteinRecord> records;
  std::vector<AttentionTensor> attention;
  std::vector<EmbeddingTensor> embeddings;
};

// Compact random-walk chain (3.8 A steps confined to a sphere), random
// secondary-structure runs and annotation sites.
ProteinRecord random_record(Rng& rng, std::string id, std::size_t length, double binding_rate,
                            double ptm_rate);

// Row-stochastic attention with log-normal rows over all non-PAD tokens.
AttentionTensor random_attention(Rng& rng, const std::string& id, std::size_t n_layers,
                                 std::size_t n_heads, const std::vector<TokenFlag>& flags,
                                 double sigma);

SyntheticDataset make_synthetic(const SyntheticSpec& spec);

// Writes corpus.jsonl, attn/<id>.atns and (when present) emb/<id>.embs.
void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& data);

}  // namespace protattn
