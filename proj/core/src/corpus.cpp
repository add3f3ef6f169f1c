#include "protattn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "protattn/error.hpp"

namespace protattn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::RowSumViolation: return "RowSumViolation";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::FlagCountMismatch: return "FlagCountMismatch";
    case ErrorCode::NoCoordinates: return "NoCoordinates";
    case ErrorCode::MissingTensor: return "MissingTensor";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::SingleClassLabels: return "SingleClassLabels";
    case ErrorCode::EmptyEval: return "EmptyEval";
    case ErrorCode::AllAbsent: return "AllAbsent";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UnknownProperty: return "UnknownProperty";
    case ErrorCode::PortInUse: return "PortInUse";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Amino acids

namespace {

constexpr std::array<AminoAcidInfo, kNumStandardAminoAcids + 1> kAminoAcids{{
    {'A', "Ala", "Alanine"},
    {'R', "Arg", "Arginine"},
    {'N', "Asn", "Asparagine"},
    {'D', "Asp", "Aspartic acid"},
    {'C', "Cys", "Cysteine"},
    {'Q', "Gln", "Glutamine"},
    {'E', "Glu", "Glutamic acid"},
    {'G', "Gly", "Glycine"},
    {'H', "His", "Histidine"},
    {'I', "Ile", "Isoleucine"},
    {'L', "Leu", "Leucine"},
    {'K', "Lys", "Lysine"},
    {'M', "Met", "Methionine"},
    {'F', "Phe", "Phenylalanine"},
    {'P', "Pro", "Proline"},
    {'S', "Ser", "Serine"},
    {'T', "Thr", "Threonine"},
    {'W', "Trp", "Tryptophan"},
    {'Y', "Tyr", "Tyrosine"},
    {'V', "Val", "Valine"},
    {'X', "Xaa", "Unknown"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

const AminoAcidInfo& info(AminoAcid aa) noexcept { return kAminoAcids[index_of(aa)]; }

AminoAcid from_code(char c) noexcept {
  const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kNumStandardAminoAcids; ++i) {
    if (kAminoAcids[i].code == upper) return static_cast<AminoAcid>(i);
  }
  return AminoAcid::Unknown;
}

std::optional<AminoAcid> from_abbrev(std::string_view abbrev) noexcept {
  for (std::size_t i = 0; i < kAminoAcids.size(); ++i) {
    if (iequals(kAminoAcids[i].abbrev, abbrev)) return static_cast<AminoAcid>(i);
  }
  return std::nullopt;
}

std::optional<AminoAcid> from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kAminoAcids.size(); ++i) {
    if (iequals(kAminoAcids[i].name, name)) return static_cast<AminoAcid>(i);
  }
  return std::nullopt;
}

std::array<AminoAcid, kNumStandardAminoAcids> standard_amino_acids() noexcept {
  std::array<AminoAcid, kNumStandardAminoAcids> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<AminoAcid>(i);
  return out;
}

// ---------------------------------------------------------------------------
// Records

char ss_code(SecondaryStructure ss) noexcept {
  switch (ss) {
    case SecondaryStructure::Helix: return 'H';
    case SecondaryStructure::Strand: return 'S';
    case SecondaryStructure::TurnBend: return 'T';
    case SecondaryStructure::Other: return '-';
  }
  return '-';
}

std::vector<AminoAcid> sequence_from_string(std::string_view letters) {
  std::vector<AminoAcid> out;
  out.reserve(letters.size());
  for (char c : letters) out.push_back(from_code(c));
  return out;
}

std::string sequence_to_string(std::span<const AminoAcid> sequence) {
  std::string out;
  out.reserve(sequence.size());
  for (AminoAcid aa : sequence) out.push_back(code_of(aa));
  return out;
}

std::optional<SecondaryStructure> ss_from_code(char c) noexcept {
  switch (c) {
    case 'H': return SecondaryStructure::Helix;
    case 'S': return SecondaryStructure::Strand;
    case 'T': return SecondaryStructure::TurnBend;
    case '-': return SecondaryStructure::Other;
    default: return std::nullopt;
  }
}

double distance(const Vec3& a, const Vec3& b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void validate(const ProteinRecord& record, std::size_t max_len) {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::MalformedRecord, "record '" + record.id + "': " + why);
  };
  const std::size_t n = record.length();
  if (record.id.empty()) fail("empty id");
  if (n == 0) fail("empty sequence");
  if (n > max_len) fail("length " + std::to_string(n) + " exceeds " + std::to_string(max_len));
  if (record.coords && record.coords->size() != n) {
    fail("coords has " + std::to_string(record.coords->size()) + " entries, expected " +
         std::to_string(n));
  }
  if (record.ss_labels && record.ss_labels->size() != n) {
    fail("ss has " + std::to_string(record.ss_labels->size()) + " labels, expected " +
         std::to_string(n));
  }
  if (!record.binding_sites.empty() && *record.binding_sites.rbegin() >= n) {
    fail("binding site index out of range");
  }
  if (!record.ptm_sites.empty() && *record.ptm_sites.rbegin() >= n) {
    fail("ptm site index out of range");
  }
  if (record.coords) {
    for (const auto& c : *record.coords) {
      if (c && !(std::isfinite(c->x) && std::isfinite(c->y) && std::isfinite(c->z))) {
        fail("non-finite coordinate");
      }
    }
  }
}

ProteinRecord truncated(ProteinRecord record, std::size_t max_len) {
  if (record.length() <= max_len) return record;
  record.sequence.resize(max_len);
  if (record.coords) record.coords->resize(max_len);
  if (record.ss_labels) record.ss_labels->resize(max_len);
  record.binding_sites.erase(record.binding_sites.lower_bound(max_len), record.binding_sites.end());
  record.ptm_sites.erase(record.ptm_sites.lower_bound(max_len), record.ptm_sites.end());
  return record;
}

namespace {

using nlohmann::json;

std::set<std::size_t> parse_sites(const json& obj, const char* key) {
  std::set<std::size_t> out;
  if (!obj.contains(key) || obj.at(key).is_null()) return out;
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw std::invalid_argument(std::string(key) + " is not an array");
  for (const json& v : arr) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw std::invalid_argument(std::string(key) + " must hold non-negative integers");
    }
    out.insert(v.get<std::size_t>());
  }
  return out;
}

ProteinRecord parse_record(const json& obj) {
  if (!obj.is_object()) throw std::invalid_argument("line is not a JSON object");
  ProteinRecord r;
  if (!obj.contains("id") || !obj.at("id").is_string()) throw std::invalid_argument("missing string id");
  r.id = obj.at("id").get<std::string>();
  if (!obj.contains("sequence") || !obj.at("sequence").is_string()) {
    throw std::invalid_argument("missing string sequence");
  }
  for (char c : obj.at("sequence").get<std::string>()) {
    if (!std::isalpha(static_cast<unsigned char>(c))) {
      throw std::invalid_argument(std::string("invalid residue character '") + c + "'");
    }
    r.sequence.push_back(from_code(c));
  }
  if (obj.contains("coords") && !obj.at("coords").is_null()) {
    const json& arr = obj.at("coords");
    if (!arr.is_array()) throw std::invalid_argument("coords is not an array");
    std::vector<std::optional<Vec3>> coords;
    coords.reserve(arr.size());
    for (const json& c : arr) {
      if (c.is_null()) {
        coords.emplace_back(std::nullopt);
        continue;
      }
      if (!c.is_array() || c.size() != 3 || !c[0].is_number() || !c[1].is_number() ||
          !c[2].is_number()) {
        throw std::invalid_argument("coordinate entries must be [x,y,z] or null");
      }
      coords.emplace_back(Vec3{c[0].get<double>(), c[1].get<double>(), c[2].get<double>()});
    }
    r.coords = std::move(coords);
  }
  if (obj.contains("ss") && !obj.at("ss").is_null()) {
    if (!obj.at("ss").is_string()) throw std::invalid_argument("ss is not a string");
    std::vector<SecondaryStructure> labels;
    for (char c : obj.at("ss").get<std::string>()) {
      auto label = ss_from_code(c);
      if (!label) throw std::invalid_argument(std::string("invalid ss label '") + c + "'");
      labels.push_back(*label);
    }
    r.ss_labels = std::move(labels);
  }
  r.binding_sites = parse_sites(obj, "binding_sites");
  r.ptm_sites = parse_sites(obj, "ptm_sites");
  return r;
}

}  // namespace

CorpusLoadResult parse_corpus(std::string_view text, std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorCode::InvalidArgument, "max_len must be positive");
  CorpusLoadResult result;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      ProteinRecord raw = parse_record(json::parse(line));
      // Alignment is checked on the raw record so truncation cannot hide a
      // length mismatch.
      validate(raw, std::max(max_len, raw.length()));
      if (!seen.insert(raw.id).second) {
        throw std::invalid_argument("duplicate id '" + raw.id + "'");
      }
      result.records.push_back(truncated(std::move(raw), max_len));
    } catch (const json::exception& e) {
      result.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
    } catch (const std::exception& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  if (result.records.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "no valid records (" +
                                            std::to_string(result.errors.size()) + " rejected)");
  }
  return result;
}

CorpusLoadResult load_corpus(const std::filesystem::path& path, std::size_t max_len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::FileUnreadable, path.string());
  return parse_corpus(buf.str(), max_len);
}

std::string to_json_line(const ProteinRecord& record) {
  json obj = json::object();
  obj["id"] = record.id;
  std::string seq;
  seq.reserve(record.length());
  for (AminoAcid aa : record.sequence) seq.push_back(code_of(aa));
  obj["sequence"] = seq;
  if (record.coords) {
    json arr = json::array();
    for (const auto& c : *record.coords) {
      if (c) {
        arr.push_back({c->x, c->y, c->z});
      } else {
        arr.push_back(nullptr);
      }
    }
    obj["coords"] = std::move(arr);
  } else {
    obj["coords"] = nullptr;
  }
  if (record.ss_labels) {
    std::string ss;
    for (auto l : *record.ss_labels) ss.push_back(ss_code(l));
    obj["ss"] = ss;
  } else {
    obj["ss"] = nullptr;
  }
  obj["binding_sites"] = std::vector<std::size_t>(record.binding_sites.begin(), record.binding_sites.end());
  obj["ptm_sites"] = std::vector<std::size_t>(record.ptm_sites.begin(), record.ptm_sites.end());
  return obj.dump();
}

void write_corpus(const std::filesystem::path& path, const std::vector<ProteinRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Substitution matrices

SubstitutionMatrix::SubstitutionMatrix(const Table& scores) : scores_(scores) {
  for (std::size_t a = 0; a < kNumStandardAminoAcids; ++a) {
    for (std::size_t b = a + 1; b < kNumStandardAminoAcids; ++b) {
      if (scores_[a][b] != scores_[b][a]) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string("substitution matrix not symmetric at ") +
                        kAminoAcids[a].code + "/" + kAminoAcids[b].code);
      }
    }
  }
}

int SubstitutionMatrix::score(AminoAcid a, AminoAcid b) const {
  if (!is_standard(a) || !is_standard(b)) {
    throw Error(ErrorCode::InvalidArgument, "substitution score requested for non-standard residue");
  }
  return scores_[index_of(a)][index_of(b)];
}

SubstitutionMatrix parse_ncbi_matrix(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<char> columns;
  SubstitutionMatrix::Table table{};
  std::array<bool, kNumStandardAminoAcids> row_seen{};
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    if (columns.empty()) {
      std::string tok;
      while (fields >> tok) columns.push_back(tok[0]);
      continue;
    }
    std::string row_tok;
    if (!(fields >> row_tok)) continue;
    const AminoAcid row = from_code(row_tok[0]);
    const bool keep_row = row_tok.size() == 1 && is_standard(row);
    for (char col_letter : columns) {
      int v = 0;
      if (!(fields >> v)) {
        throw Error(ErrorCode::MalformedRecord, "short matrix row for '" + row_tok + "'");
      }
      const AminoAcid col = from_code(col_letter);
      if (keep_row && is_standard(col)) table[index_of(row)][index_of(col)] = v;
    }
    if (keep_row) row_seen[index_of(row)] = true;
  }
  if (!std::all_of(row_seen.begin(), row_seen.end(), [](bool b) { return b; })) {
    throw Error(ErrorCode::MalformedRecord, "matrix is missing standard residue rows");
  }
  return SubstitutionMatrix(table);
}

std::string_view blosum62_ncbi_text() noexcept {
  static constexpr std::string_view kText =
      "#  Matrix made by matblas from blosum62.iij\n"
      "#  * column uses minimum score\n"
      "#  BLOSUM Clustered Scoring Matrix in 1/2 Bit Units\n"
      "#  Blocks Database = /data/blocks_5.0/blocks.dat\n"
      "#  Cluster Percentage: >= 62\n"
      "#  Entropy =   0.6979, Expected =  -0.5209\n"
      "   A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V  B  Z  X  *\n"
      "A  4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0 -2 -1  0 -4\n"
      "R -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3 -1  0 -1 -4\n"
      "N -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3  3  0 -1 -4\n"
      "D -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3  4  1 -1 -4\n"
      "C  0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1 -3 -3 -2 -4\n"
      "Q -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2  0  3 -1 -4\n"
      "E -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4\n"
      "G  0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3 -1 -2 -1 -4\n"
      "H -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3  0  0 -1 -4\n"
      "I -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3 -3 -3 -1 -4\n"
      "L -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1 -4 -3 -1 -4\n"
      "K -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2  0  1 -1 -4\n"
      "M -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1 -3 -1 -1 -4\n"
      "F -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1 -3 -3 -1 -4\n"
      "P -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2 -2 -1 -2 -4\n"
      "S  1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2  0  0  0 -4\n"
      "T  0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0 -1 -1  0 -4\n"
      "W -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3 -4 -3 -2 -4\n"
      "Y -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1 -3 -2 -1 -4\n"
      "V  0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4 -3 -2 -1 -4\n"
      "B -2 -1  3  4 -3  0  1 -1  0 -3 -4  0 -3 -3 -2  0 -1 -4 -3 -3  4  1 -1 -4\n"
      "Z -1  0  0  1 -3  3  4 -2  0 -3 -3  1 -1 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4\n"
      "X  0 -1 -1 -1 -2 -1 -1 -1 -1 -1 -1 -1 -1 -1 -2  0  0 -2 -1 -1 -1 -1 -1 -4\n"
      "* -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4  1\n";
  return kText;
}

const SubstitutionMatrix& load_blosum62() {
  static const SubstitutionMatrix matrix = parse_ncbi_matrix(blosum62_ncbi_text());
  return matrix;
}

}  // namespace protattn
