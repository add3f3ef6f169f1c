#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "protattn/service.hpp"

using namespace protattn;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string s(const std::filesystem::path& p) { return p.string(); }

void synth(const testing::TempDir& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"synth", "--out", s(dir.path()), "--proteins", "12", "--min-len", "20",
                                   "--max-len", "28", "--layers", "3", "--heads", "2", "--seed", "4",
                                   "--contact-head", "2-1", "--binding-head", "3-2", "--binding-rate",
                                   "0.15", "--emb-dim", "8", "--emb-signal-layer", "2"};
  args.insert(args.end(), extra.begin(), extra.end());
  REQUIRE(run(args).code == 0);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth then analyze writes the report files") {
  testing::TempDir d;
  synth(d);
  CHECK(std::filesystem::exists(d / "corpus.jsonl"));
  CHECK(std::filesystem::exists(d.path() / "attn" / "SYN00.atns"));
  CHECK(std::filesystem::exists(d.path() / "emb" / "SYN11.embs"));

  const auto r = run({"analyze", "--corpus", s(d / "corpus.jsonl"), "--attn", s(d / "attn"),
                      "--property", "contact,binding_site", "--aa-correlation", "--out", s(d / "out")});
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"report.json", "heatmap_contact.csv", "heads_contact.csv", "topheads_contact.csv",
                        "heatmap_binding_site.csv", "aa_correlation.csv", "aa_correlation.json"}) {
    CHECK(std::filesystem::exists(d.path() / "out" / f));
  }
  const auto j = nlohmann::json::parse(testing::slurp(d.path() / "out" / "report.json"));
  CHECK(j["tables"][0]["top_heads"][0]["head"] == "2-1");
  CHECK(j["tables"][1]["top_heads"][0]["head"] == "3-2");
  CHECK(r.out.find("best 2-1") != std::string::npos);
}

TEST_CASE("null seed changes the analysis") {
  testing::TempDir d;
  synth(d);
  const std::vector<std::string> base = {"analyze", "--corpus", s(d / "corpus.jsonl"), "--attn",
                                         s(d / "attn"), "--property", "binding_site", "--out"};
  auto a = base;
  a.push_back(s(d / "plain"));
  auto b = base;
  b.insert(b.end(), {s(d / "null"), "--null-seed", "3"});
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  const auto plain = testing::slurp(d.path() / "plain" / "heatmap_binding_site.csv");
  const auto null = testing::slurp(d.path() / "null" / "heatmap_binding_site.csv");
  CHECK(plain != null);
  const auto j = nlohmann::json::parse(testing::slurp(d.path() / "null" / "report.json"));
  CHECK(j["config"]["null_seed"] == 3);
}

TEST_CASE("input errors exit with code 2") {
  testing::TempDir d;
  synth(d);
  auto r = run({"analyze", "--corpus", s(d / "corpus.jsonl"), "--attn", s(d / "attn"), "--property",
                "helixiness", "--out", s(d / "o")});
  CHECK(r.code == 2);
  CHECK(r.err.find("valid names") != std::string::npos);
  CHECK(r.err.find("binding_site") != std::string::npos);

  r = run({"probe", "--corpus", s(d / "corpus.jsonl"), "--emb", s(d / "missing"), "--task",
           "binding_site", "--out", s(d / "o")});
  CHECK(r.code == 2);
  CHECK(r.err.find("missing") != std::string::npos);

  CHECK(run({"analyze", "--bogus"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"analyze", "--corpus", s(d / "nope.jsonl"), "--attn", s(d / "attn"), "--property",
             "contact", "--out", s(d / "o")})
            .code == 2);
  CHECK(run({"synth", "--out", s(d / "x"), "--contact-head", "0-1"}).code == 2);
  CHECK(run({"serve", "--corpus", s(d / "corpus.jsonl"), "--attn", s(d / "attn"), "--port", "70000"})
            .code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("probe output is deterministic and has one point per layer") {
  testing::TempDir d;
  synth(d);
  const auto probe = [&](const std::string& out) {
    return run({"probe", "--corpus", s(d / "corpus.jsonl"), "--emb", s(d / "emb"), "--task",
                "binding_site", "--seed", "7", "--epochs", "60", "--out", s(d / out)});
  };
  const auto a = probe("p1");
  INFO(a.err);
  REQUIRE(a.code == 0);
  REQUIRE(probe("p2").code == 0);
  const auto f1 = testing::slurp(d.path() / "p1" / "probes_binding_site_embedding.json");
  const auto f2 = testing::slurp(d.path() / "p2" / "probes_binding_site_embedding.json");
  CHECK(f1 == f2);
  const auto j = nlohmann::json::parse(f1);
  REQUIRE(j.size() == 3);
  CHECK(j[1]["layer"] == 2);
  CHECK(j[1]["metric"].get<double>() > j[0]["metric"].get<double>());
}

}
