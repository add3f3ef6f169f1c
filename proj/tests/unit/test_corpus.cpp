#include <doctest.h>

#include <functional>

#include "helpers.hpp"
#include "protattn/corpus.hpp"
#include "protattn/error.hpp"

using namespace protattn;

namespace {

std::string line(const std::string& id, const std::string& seq, const std::string& extra = "") {
  return R"({"id":")" + id + R"(","sequence":")" + seq + "\"" + extra + "}\n";
}

ErrorCode code_of_throw(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("minimal record without coordinates") {
  auto res = parse_corpus(line("P1", "MKV"));
  REQUIRE(res.records.size() == 1);
  CHECK(res.errors.empty());
  const auto& r = res.records[0];
  CHECK(r.length() == 3);
  CHECK_FALSE(r.coords.has_value());
  CHECK_FALSE(r.ss_labels.has_value());
  CHECK(sequence_to_string(r.sequence) == "MKV");
}

TEST_CASE("long records are truncated with their annotations") {
  std::string seq(600, 'A');
  std::string ss(600, 'H');
  auto res = parse_corpus(line("long", seq, R"(,"ss":")" + ss + R"(","binding_sites":[3,511,512,599])"));
  REQUIRE(res.records.size() == 1);
  const auto& r = res.records[0];
  CHECK(r.length() == 512);
  CHECK(r.ss_labels->size() == 512);
  CHECK(r.binding_sites == std::set<std::size_t>{3, 511});
}

TEST_CASE("truncation keeps the prefix") {
  ProteinRecord r = testing::record("x", "ACDEFGHIK");
  r.coords = std::vector<std::optional<Vec3>>(9, Vec3{1, 2, 3});
  (*r.coords)[2] = std::nullopt;
  r.ptm_sites = {1, 8};
  auto t = truncated(r, 4);
  CHECK(sequence_to_string(t.sequence) == "ACDE");
  CHECK(t.coords->size() == 4);
  CHECK_FALSE((*t.coords)[2].has_value());
  CHECK(t.ptm_sites == std::set<std::size_t>{1});
}

TEST_CASE("misaligned annotations reject only their record") {
  std::string text = line("good", "MKV") + line("bad", "ACDEF", R"(,"ss":"HHHH")") +
                     line("bad2", "ACD", R"(,"coords":[[0,0,0],null])") +
                     line("bad3", "ACD", R"(,"binding_sites":[3])") + "not json\n" +
                     line("good", "MKV");
  auto res = parse_corpus(text);
  CHECK(res.records.size() == 1);
  REQUIRE(res.errors.size() == 5);
  CHECK(res.errors[0].line == 2);
  CHECK(res.errors[1].line == 3);
  CHECK(res.errors[2].line == 4);
  CHECK(res.errors[3].line == 5);
  CHECK(res.errors[4].line == 6);
  CHECK(res.errors[4].reason.find("duplicate") != std::string::npos);
}

TEST_CASE("a corpus with no valid record is an error") {
  CHECK(code_of_throw([] { parse_corpus(line("bad", "ACDEF", R"(,"ss":"HH")")); }) ==
        ErrorCode::EmptyCorpus);
  CHECK(code_of_throw([] { parse_corpus(""); }) == ErrorCode::EmptyCorpus);
  CHECK(code_of_throw([] { load_corpus("/nonexistent/corpus.jsonl"); }) ==
        ErrorCode::FileUnreadable);
}

TEST_CASE("coordinates, gaps and secondary structure parse") {
  auto res = parse_corpus(
      line("c", "ACG", R"(,"coords":[[1.5,2,3],null,[0,0,-1]],"ss":"HS-","ptm_sites":[0])"));
  const auto& r = res.records.at(0);
  REQUIRE(r.coords);
  CHECK((*r.coords)[0] == Vec3{1.5, 2, 3});
  CHECK_FALSE((*r.coords)[1]);
  CHECK((*r.ss_labels)[0] == SecondaryStructure::Helix);
  CHECK((*r.ss_labels)[1] == SecondaryStructure::Strand);
  CHECK((*r.ss_labels)[2] == SecondaryStructure::Other);
  CHECK(r.ptm_sites == std::set<std::size_t>{0});
}

TEST_CASE("unknown letters become X") {
  auto r = parse_corpus(line("u", "AZB")).records.at(0);
  CHECK(r.sequence[0] == AminoAcid::Ala);
  CHECK(r.sequence[1] == AminoAcid::Unknown);
  CHECK(code_of(r.sequence[2]) == 'X');
}

TEST_CASE("write then load is idempotent") {
  testing::TempDir dir;
  ProteinRecord a = testing::record("b", "MKVL");
  a.coords = std::vector<std::optional<Vec3>>{Vec3{0.1, 0.2, 0.30000000000000004}, std::nullopt,
                                              Vec3{1, 1, 1}, Vec3{-2.5e-7, 2, 2}};
  a.ss_labels = std::vector<SecondaryStructure>{SecondaryStructure::Helix, SecondaryStructure::Helix,
                                                SecondaryStructure::TurnBend, SecondaryStructure::Other};
  a.binding_sites = {1};
  ProteinRecord b = testing::record("a", "W");
  write_corpus(dir / "c.jsonl", {a, b});
  auto one = load_corpus(dir / "c.jsonl");
  auto two = load_corpus(dir / "c.jsonl");
  CHECK(one.records == two.records);
  REQUIRE(one.records.size() == 2);
  CHECK(one.records[0] == a);
  CHECK(one.records[1] == b);
}

TEST_CASE("amino-acid table round trips") {
  const std::string codes = "ARNDCQEGHILKMFPSTWYV";
  std::size_t k = 0;
  for (AminoAcid aa : standard_amino_acids()) {
    CHECK(code_of(aa) == codes[k++]);
    CHECK(from_code(code_of(aa)) == aa);
    CHECK(from_abbrev(info(aa).abbrev) == aa);
    CHECK(from_name(info(aa).name) == aa);
    CHECK(is_standard(aa));
  }
  CHECK(info(AminoAcid::Pro).abbrev == "Pro");
  CHECK(info(AminoAcid::Trp).name == "Tryptophan");
  CHECK_FALSE(is_standard(AminoAcid::Unknown));
  CHECK_FALSE(from_abbrev("Xyz").has_value());
}

TEST_CASE("BLOSUM62 matches the shipped NCBI file") {
  const auto& m = load_blosum62();
  CHECK(m.score(AminoAcid::Ala, AminoAcid::Ala) == 4);
  CHECK(m.score(AminoAcid::Trp, AminoAcid::Trp) == 11);
  CHECK(m.score(AminoAcid::Pro, AminoAcid::Phe) == m.score(AminoAcid::Phe, AminoAcid::Pro));
  for (AminoAcid a : standard_amino_acids()) {
    for (AminoAcid b : standard_amino_acids()) CHECK(m.score(a, b) == m.score(b, a));
  }
  const auto fixture = parse_ncbi_matrix(testing::slurp(testing::fixture_dir() / "BLOSUM62"));
  CHECK(fixture.table() == m.table());
}

TEST_CASE("asymmetric substitution tables are rejected") {
  SubstitutionMatrix::Table t{};
  t[0][1] = 1;
  CHECK_THROWS_AS(SubstitutionMatrix{t}, Error);
}

}
