#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace protattn {

enum class TokenFlag : std::uint8_t { Residue = 0, Cls = 1, Sep = 2, Pad = 3 };

inline constexpr double kRowSumTolerance = 1e-3;
inline constexpr std::uint32_t kTensorFormatVersion = 1;

// Dense attention weights for one protein, laid out [layer][head][from][to].
class AttentionTensor {
 public:
  AttentionTensor() = default;
  // Takes ownership without validation; call validate() or go through
  // read_attention() for checked construction.
  AttentionTensor(std::string protein_id, std::size_t n_layers, std::size_t n_heads,
                  std::vector<TokenFlag> flags, std::vector<float> weights);

  const std::string& protein_id() const noexcept { return id_; }
  std::size_t n_layers() const noexcept { return n_layers_; }
  std::size_t n_heads() const noexcept { return n_heads_; }
  std::size_t n_tokens() const noexcept { return flags_.size(); }
  std::span<const TokenFlag> flags() const noexcept { return flags_; }
  std::span<const float> weights() const noexcept { return weights_; }
  std::span<float> mutable_weights() noexcept { return weights_; }

  float weight(std::size_t layer, std::size_t head, std::size_t from, std::size_t to) const {
    return weights_[offset(layer, head, from) + to];
  }
  std::span<const float> row(std::size_t layer, std::size_t head, std::size_t from) const {
    return std::span<const float>(weights_).subspan(offset(layer, head, from), n_tokens());
  }
  std::span<float> mutable_row(std::size_t layer, std::size_t head, std::size_t from) {
    return std::span<float>(weights_).subspan(offset(layer, head, from), n_tokens());
  }
  // Map token index -> residue index, nullopt for special tokens.
  std::vector<std::optional<std::size_t>> residue_index() const;
  std::size_t residue_count() const noexcept;

  // Throws NegativeWeight / NonFiniteValue / RowSumViolation naming the first
  // offending (layer, head, row), and FlagCountMismatch when expected_residues
  // is given and differs from the RESIDUE flag count.
  void validate(std::optional<std::size_t> expected_residues = std::nullopt) const;

  friend bool operator==(const AttentionTensor&, const AttentionTensor&) = default;

 private:
  std::size_t offset(std::size_t layer, std::size_t head, std::size_t from) const noexcept {
    return ((layer * n_heads_ + head) * n_tokens() + from) * n_tokens();
  }

  std::string id_;
  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::vector<TokenFlag> flags_;
  std::vector<float> weights_;
};

// Per-layer output embeddings, laid out [layer][token][dim].
class EmbeddingTensor {
 public:
  EmbeddingTensor() = default;
  EmbeddingTensor(std::string protein_id, std::size_t n_layers, std::size_t dim,
                  std::vector<TokenFlag> flags, std::vector<float> vectors);

  const std::string& protein_id() const noexcept { return id_; }
  std::size_t n_layers() const noexcept { return n_layers_; }
  std::size_t n_tokens() const noexcept { return flags_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const TokenFlag> flags() const noexcept { return flags_; }
  std::span<const float> values() const noexcept { return vectors_; }

  std::span<const float> vector(std::size_t layer, std::size_t token) const {
    return std::span<const float>(vectors_).subspan((layer * n_tokens() + token) * dim_, dim_);
  }
  std::size_t residue_count() const noexcept;

  void validate(std::optional<std::size_t> expected_residues = std::nullopt) const;

  friend bool operator==(const EmbeddingTensor&, const EmbeddingTensor&) = default;

 private:
  std::string id_;
  std::size_t n_layers_ = 0;
  std::size_t dim_ = 0;
  std::vector<TokenFlag> flags_;
  std::vector<float> vectors_;
};

// ATNS / EMBS binary codecs (little-endian, version 1).
AttentionTensor decode_attention(std::span<const std::byte> bytes,
                                 std::optional<std::size_t> expected_residues = std::nullopt);
std::vector<std::byte> encode_attention(const AttentionTensor& tensor);
EmbeddingTensor decode_embeddings(std::span<const std::byte> bytes,
                                  std::optional<std::size_t> expected_residues = std::nullopt);
std::vector<std::byte> encode_embeddings(const EmbeddingTensor& tensor);

AttentionTensor read_attention(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_residues = std::nullopt);
void write_attention(const std::filesystem::path& path, const AttentionTensor& tensor);
EmbeddingTensor read_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_residues = std::nullopt);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTensor& tensor);

// File naming inside a tensor directory: <id>.atns and <id>.embs.
std::filesystem::path attention_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path embedding_path(const std::filesystem::path& dir, const std::string& id);

}  // namespace protattn
