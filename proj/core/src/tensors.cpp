#include "protattn/tensors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "protattn/error.hpp"

namespace protattn {

namespace {

constexpr std::uint32_t kMaxDimension = 1u << 20;

std::string position(std::size_t layer, std::size_t head, std::size_t row) {
  return "(layer " + std::to_string(layer) + ", head " + std::to_string(head) + ", row " +
         std::to_string(row) + ")";
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::TruncatedFile, std::string("file ends inside ") + what);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(bytes_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  std::string string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::vector<TokenFlag> flags(std::size_t n) {
    need(n, "token flags");
    std::vector<TokenFlag> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = std::to_integer<std::uint8_t>(bytes_[pos_ + i]);
      if (v > 3) {
        throw Error(ErrorCode::MalformedHeader,
                    "token flag " + std::to_string(v) + " at token " + std::to_string(i));
      }
      out[i] = static_cast<TokenFlag>(v);
    }
    pos_ += n;
    return out;
  }

  std::vector<float> floats(std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / 4) {
      throw Error(ErrorCode::TruncatedFile, std::string("file ends inside ") + what);
    }
    std::vector<float> out(n);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), bytes_.data() + pos_, n * 4);
      pos_ += n * 4;
    } else {
      for (auto& f : out) f = std::bit_cast<float>(u32(what));
    }
    return out;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
  void raw(std::string_view s) {
    for (char c : s) out_.push_back(static_cast<std::byte>(c));
  }
  void flags(std::span<const TokenFlag> flags) {
    for (auto f : flags) out_.push_back(static_cast<std::byte>(f));
  }
  void floats(std::span<const float> values) {
    out_.reserve(out_.size() + values.size() * 4);
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

std::uint32_t dimension(ByteReader& in, const char* what) {
  const std::uint32_t v = in.u32(what);
  if (v == 0 || v > kMaxDimension) {
    throw Error(ErrorCode::MalformedHeader, std::string(what) + " = " + std::to_string(v));
  }
  return v;
}

void read_header(ByteReader& in, std::string_view magic, std::string& id) {
  if (in.string(4, "magic") != magic) {
    throw Error(ErrorCode::BadMagic, "expected '" + std::string(magic) + "'");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kTensorFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported, "version " + std::to_string(version));
  }
  const std::uint32_t id_len = in.u32("id length");
  if (id_len > kMaxDimension) throw Error(ErrorCode::MalformedHeader, "id length");
  id = in.string(id_len, "protein id");
}

std::vector<std::byte> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::byte> bytes(size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
  return bytes;
}

void spit(const std::filesystem::path& path, const std::vector<std::byte>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::size_t count_residues(std::span<const TokenFlag> flags) {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), TokenFlag::Residue));
}

void check_residue_count(const std::string& id, std::size_t have,
                         std::optional<std::size_t> expected) {
  if (expected && *expected != have) {
    throw Error(ErrorCode::FlagCountMismatch, "protein '" + id + "' has " + std::to_string(have) +
                                                  " RESIDUE tokens, expected " +
                                                  std::to_string(*expected));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

AttentionTensor::AttentionTensor(std::string protein_id, std::size_t n_layers, std::size_t n_heads,
                                 std::vector<TokenFlag> flags, std::vector<float> weights)
    : id_(std::move(protein_id)),
      n_layers_(n_layers),
      n_heads_(n_heads),
      flags_(std::move(flags)),
      weights_(std::move(weights)) {
  if (weights_.size() != n_layers_ * n_heads_ * flags_.size() * flags_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "attention weight count does not match shape");
  }
}

std::vector<std::optional<std::size_t>> AttentionTensor::residue_index() const {
  std::vector<std::optional<std::size_t>> out(n_tokens());
  std::size_t r = 0;
  for (std::size_t t = 0; t < n_tokens(); ++t) {
    if (flags_[t] == TokenFlag::Residue) out[t] = r++;
  }
  return out;
}

std::size_t AttentionTensor::residue_count() const noexcept { return count_residues(flags_); }

void AttentionTensor::validate(std::optional<std::size_t> expected_residues) const {
  if (n_layers_ == 0 || n_heads_ == 0 || flags_.empty()) {
    throw Error(ErrorCode::MalformedHeader, "attention tensor has an empty dimension");
  }
  const std::size_t n = n_tokens();
  for (std::size_t l = 0; l < n_layers_; ++l) {
    for (std::size_t h = 0; h < n_heads_; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = row(l, h, i);
        double sum = 0.0;
        for (float w : r) {
          if (!std::isfinite(w)) {
            throw Error(ErrorCode::NonFiniteValue, "non-finite weight at " + position(l, h, i));
          }
          if (w < 0.0f) {
            throw Error(ErrorCode::NegativeWeight, "negative weight at " + position(l, h, i));
          }
          sum += w;
        }
        if (flags_[i] == TokenFlag::Residue && std::abs(sum - 1.0) > kRowSumTolerance) {
          throw Error(ErrorCode::RowSumViolation,
                      "row sums to " + std::to_string(sum) + " at " + position(l, h, i));
        }
      }
    }
  }
  check_residue_count(id_, residue_count(), expected_residues);
}

EmbeddingTensor::EmbeddingTensor(std::string protein_id, std::size_t n_layers, std::size_t dim,
                                 std::vector<TokenFlag> flags, std::vector<float> vectors)
    : id_(std::move(protein_id)),
      n_layers_(n_layers),
      dim_(dim),
      flags_(std::move(flags)),
      vectors_(std::move(vectors)) {
  if (vectors_.size() != n_layers_ * flags_.size() * dim_) {
    throw Error(ErrorCode::ShapeMismatch, "embedding value count does not match shape");
  }
}

std::size_t EmbeddingTensor::residue_count() const noexcept { return count_residues(flags_); }

void EmbeddingTensor::validate(std::optional<std::size_t> expected_residues) const {
  if (n_layers_ == 0 || dim_ == 0 || flags_.empty()) {
    throw Error(ErrorCode::MalformedHeader, "embedding tensor has an empty dimension");
  }
  for (std::size_t l = 0; l < n_layers_; ++l) {
    for (std::size_t t = 0; t < n_tokens(); ++t) {
      for (float v : vector(l, t)) {
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::NonFiniteValue, "non-finite value at (layer " + std::to_string(l) +
                                                     ", token " + std::to_string(t) + ")");
        }
      }
    }
  }
  check_residue_count(id_, residue_count(), expected_residues);
}

// ---------------------------------------------------------------------------

AttentionTensor decode_attention(std::span<const std::byte> bytes,
                                 std::optional<std::size_t> expected_residues) {
  ByteReader in(bytes);
  std::string id;
  read_header(in, "ATNS", id);
  const std::size_t layers = dimension(in, "n_layers");
  const std::size_t heads = dimension(in, "n_heads");
  const std::size_t tokens = dimension(in, "n_tokens");
  auto flags = in.flags(tokens);
  auto weights = in.floats(layers * heads * tokens * tokens, "attention weights");
  if (!in.at_end()) throw Error(ErrorCode::MalformedHeader, "trailing bytes after weights");
  AttentionTensor t(std::move(id), layers, heads, std::move(flags), std::move(weights));
  t.validate(expected_residues);
  return t;
}

std::vector<std::byte> encode_attention(const AttentionTensor& tensor) {
  ByteWriter out;
  out.raw("ATNS");
  out.u32(kTensorFormatVersion);
  out.u32(checked_u32(tensor.protein_id().size(), "id length"));
  out.raw(tensor.protein_id());
  out.u32(checked_u32(tensor.n_layers(), "n_layers"));
  out.u32(checked_u32(tensor.n_heads(), "n_heads"));
  out.u32(checked_u32(tensor.n_tokens(), "n_tokens"));
  out.flags(tensor.flags());
  out.floats(tensor.weights());
  return out.take();
}

EmbeddingTensor decode_embeddings(std::span<const std::byte> bytes,
                                  std::optional<std::size_t> expected_residues) {
  ByteReader in(bytes);
  std::string id;
  read_header(in, "EMBS", id);
  const std::size_t layers = dimension(in, "n_layers");
  const std::size_t tokens = dimension(in, "n_tokens");
  const std::size_t dim = dimension(in, "dim");
  auto flags = in.flags(tokens);
  auto values = in.floats(layers * tokens * dim, "embedding vectors");
  if (!in.at_end()) throw Error(ErrorCode::MalformedHeader, "trailing bytes after vectors");
  EmbeddingTensor t(std::move(id), layers, dim, std::move(flags), std::move(values));
  t.validate(expected_residues);
  return t;
}

std::vector<std::byte> encode_embeddings(const EmbeddingTensor& tensor) {
  ByteWriter out;
  out.raw("EMBS");
  out.u32(kTensorFormatVersion);
  out.u32(checked_u32(tensor.protein_id().size(), "id length"));
  out.raw(tensor.protein_id());
  out.u32(checked_u32(tensor.n_layers(), "n_layers"));
  out.u32(checked_u32(tensor.n_tokens(), "n_tokens"));
  out.u32(checked_u32(tensor.dim(), "dim"));
  out.flags(tensor.flags());
  out.floats(tensor.values());
  return out.take();
}

AttentionTensor read_attention(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_residues) {
  const auto bytes = slurp(path);
  return decode_attention(bytes, expected_residues);
}

void write_attention(const std::filesystem::path& path, const AttentionTensor& tensor) {
  spit(path, encode_attention(tensor));
}

EmbeddingTensor read_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_residues) {
  const auto bytes = slurp(path);
  return decode_embeddings(bytes, expected_residues);
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTensor& tensor) {
  spit(path, encode_embeddings(tensor));
}

std::filesystem::path attention_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".atns");
}

std::filesystem::path embedding_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".embs");
}

}  // namespace protattn
