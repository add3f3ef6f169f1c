#include <doctest.h>

#include "helpers.hpp"
#include "protattn/metrics.hpp"
#include "protattn/report.hpp"
#include "protattn/synthetic.hpp"

using namespace protattn;

TEST_SUITE("golden") {

TEST_CASE("the committed fixture regenerates byte for byte") {
  testing::TempDir d;
  write_dataset(d.path(), make_synthetic(testing::golden_spec()));
  const auto golden = testing::fixture_dir() / "golden";
  CHECK(testing::slurp(d / "corpus.jsonl") == testing::slurp(golden / "corpus.jsonl"));
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(golden / "attn")) {
    CHECK(testing::slurp(entry.path()) == testing::slurp(d.path() / "attn" / entry.path().filename()));
    ++files;
  }
  CHECK(files == 20);
}

TEST_CASE("planted heads rank first and the report matches the frozen copy") {
  const auto golden = testing::fixture_dir() / "golden";
  const auto records = load_corpus(golden / "corpus.jsonl").records;
  DirectoryAttention source(golden / "attn");
  ReportInput in;
  in.tables = score_heads(records, source, {property_by_name("contact"), property_by_name("binding_site")},
                          in.config);
  const auto contact = top_heads(in.tables[0]);
  CHECK(head_label(contact[0].layer, contact[0].head) == "3-2");
  CHECK(contact[0].significance->significant);
  const auto binding = top_heads(in.tables[1]);
  CHECK(head_label(binding[0].layer, binding[0].head) == "2-4");
  CHECK(binding[0].significance->significant);

  testing::TempDir out;
  emit_report(out.path(), in);
  for (const char* f : {"report.json", "heatmap_contact.csv", "heatmap_binding_site.csv"}) {
    CHECK_MESSAGE(testing::slurp(out / f) == testing::slurp(golden / "expected" / f), f);
  }
}

}
