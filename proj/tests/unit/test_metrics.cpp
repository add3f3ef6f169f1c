#include <doctest.h>

#include <algorithm>
#include <map>

#include "helpers.hpp"
#include "oracles.hpp"
#include "protattn/error.hpp"
#include "protattn/metrics.hpp"

using namespace protattn;

namespace {

using R = TokenFlag;

// The L=3 hand example: one head, no special tokens.
AttentionTensor worked_tensor() {
  return AttentionTensor("W", 1, 1, {R::Residue, R::Residue, R::Residue},
                         {0.0f, 0.7f, 0.3f, 0.5f, 0.4f, 0.1f, 0.2f, 0.2f, 0.6f});
}

// f(0,1) = f(1,0) = 1.
Property worked_property() {
  return {"pair01", PropertyKind::Pairwise, [](const ProteinRecord& r) -> std::optional<PropertyIndicator> {
            std::vector<std::uint8_t> mask(r.length() * r.length(), 0);
            mask[0 * 3 + 1] = mask[1 * 3 + 0] = 1;
            return PropertyIndicator::pairwise("pair01", r.length(), mask);
          }};
}

Property constant_property(bool value) {
  return {"const", PropertyKind::Token, [value](const ProteinRecord& r) -> std::optional<PropertyIndicator> {
            return PropertyIndicator::token("const", r.length(),
                                            std::vector<std::uint8_t>(r.length(), value ? 1 : 0));
          }};
}

AnalysisConfig config(MetricMode mode, std::uint64_t min_arcs = 1) {
  AnalysisConfig c;
  c.metric = mode;
  c.min_arcs = min_arcs;
  return c;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("worked example, high confidence") {
  std::vector<ProteinRecord> corpus{testing::record("W", "ACD")};
  InMemoryAttention src({worked_tensor()});
  auto t = score_heads(corpus, src, worked_property(), config(MetricMode::HighConfidence));
  REQUIRE(t.at(0, 0).score);
  CHECK(*t.at(0, 0).score == 0.5);
  CHECK(t.at(0, 0).arc_count == 4);
  CHECK(t.at(0, 0).hits == 2);

  const auto arcs = admitted_arcs(worked_tensor(), 0, 0, 0.3, {R::Cls, R::Sep, R::Pad});
  std::vector<std::pair<std::size_t, std::size_t>> ends;
  for (const auto& a : arcs) ends.emplace_back(a.from, a.to);
  CHECK(ends == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}, {1, 1}, {2, 2}});
}

TEST_CASE("worked example, weighted") {
  std::vector<ProteinRecord> corpus{testing::record("W", "ACD")};
  InMemoryAttention src({worked_tensor()});
  auto t = score_heads(corpus, src, worked_property(), config(MetricMode::Weighted));
  REQUIRE(t.at(0, 0).score);
  // The weights are float32, so the value is (0.7f + 0.5f) / (sum of all nine
  // float weights) evaluated in double; it agrees with 0.4 to float precision.
  const double expected = (double(0.7f) + double(0.5f)) /
                          (double(0.0f) + double(0.7f) + double(0.3f) + double(0.5f) +
                           double(0.4f) + double(0.1f) + double(0.2f) + double(0.2f) + double(0.6f));
  CHECK(*t.at(0, 0).score == doctest::Approx(expected).epsilon(1e-15));
  CHECK(std::abs(*t.at(0, 0).score - 0.4) < 1e-7);
}

TEST_CASE("a head with no arc above theta is ABSENT") {
  std::vector<ProteinRecord> corpus{testing::record("U", "ACDE")};
  std::vector<float> w(16, 0.25f);
  InMemoryAttention src({AttentionTensor("U", 1, 1, std::vector<TokenFlag>(4, R::Residue), w)});
  auto t = score_heads(corpus, src, constant_property(true), config(MetricMode::HighConfidence));
  CHECK_FALSE(t.at(0, 0).score);
  CHECK(t.at(0, 0).arc_count == 0);
  CHECK(t.present_count() == 0);
}

TEST_CASE("min_arcs boundary") {
  std::vector<ProteinRecord> corpus{testing::record("W", "ACD")};
  InMemoryAttention src({worked_tensor()});
  CHECK(score_heads(corpus, src, worked_property(), config(MetricMode::HighConfidence, 4)).at(0, 0).score);
  CHECK_FALSE(score_heads(corpus, src, worked_property(), config(MetricMode::HighConfidence, 5)).at(0, 0).score);
  // min_arcs does not apply to the weighted metric
  CHECK(score_heads(corpus, src, worked_property(), config(MetricMode::Weighted, 5)).at(0, 0).score);
}

TEST_CASE("theta is compared strictly in float32") {
  AttentionTensor t("T", 1, 1, {R::Residue, R::Residue}, {0.3f, 0.7f, 0.5f, 0.5f});
  const auto arcs = admitted_arcs(t, 0, 0, 0.3, {});
  CHECK(arcs.size() == 3);
  CHECK_FALSE(above_threshold(0.3f, 0.3));
  CHECK(above_threshold(std::nextafter(0.3f, 1.0f), 0.3));
}

TEST_CASE("f identically 1 scores 1 in both modes") {
  Rng rng(5);
  std::vector<ProteinRecord> corpus;
  InMemoryAttention src;
  for (int p = 0; p < 4; ++p) {
    const std::string id = "P" + std::to_string(p);
    corpus.push_back(testing::record(id, "ACDEFG"));
    src.add(oracle::random_tensor(rng, id, {R::Cls, R::Residue, R::Residue, R::Residue, R::Residue,
                                            R::Residue, R::Residue, R::Sep, R::Pad},
                                  2, 2));
  }
  for (auto mode : {MetricMode::HighConfidence, MetricMode::Weighted}) {
    auto t = score_heads(corpus, src, constant_property(true), config(mode));
    for (const auto& h : t.heads) {
      if (h.score) CHECK(*h.score == 1.0);
    }
    CHECK(t.present_count() > 0);
    CHECK(t.background_frequency() == 1.0);
  }
}

TEST_CASE("background frequency") {
  ProteinRecord r = testing::record("B", "ACDEFGHIKL");
  r.binding_sites = {2, 3};
  CHECK(background_frequency({r}, property_by_name("binding_site")) == 0.2);
  CHECK(background_frequency({r}, constant_property(true)) == 1.0);
  CHECK_THROWS_AS(background_frequency({}, constant_property(true)), Error);
}

TEST_CASE("arcs touching excluded tokens never count") {
  // Same residue block with and without heavy attention on CLS/SEP/PAD.
  std::vector<TokenFlag> flags{R::Cls, R::Residue, R::Residue, R::Sep, R::Pad};
  std::vector<float> base(25, 0.0f);
  auto set = [&](std::vector<float>& w, std::size_t i, std::vector<float> row) {
    for (std::size_t j = 0; j < 5; ++j) w[i * 5 + j] = row[j];
  };
  set(base, 0, {0.9f, 0.05f, 0.05f, 0.0f, 0.0f});
  set(base, 1, {0.6f, 0.35f, 0.05f, 0.0f, 0.0f});
  set(base, 2, {0.0f, 0.4f, 0.0f, 0.6f, 0.0f});
  set(base, 3, {0.0f, 0.9f, 0.1f, 0.0f, 0.0f});
  std::vector<ProteinRecord> corpus{testing::record("X", "AC")};
  InMemoryAttention src({AttentionTensor("X", 1, 1, flags, base)});
  auto t = score_heads(corpus, src, constant_property(true), config(MetricMode::HighConfidence));
  // Admitted: (1->1: 0.35) and (2->1: 0.4); CLS/SEP rows and columns are ignored.
  CHECK(t.at(0, 0).arc_count == 2);
  auto w = score_heads(corpus, src, constant_property(true), config(MetricMode::Weighted));
  CHECK(w.at(0, 0).attention_mass == doctest::Approx(double(0.35f) + 0.05f + 0.4f + 0.0f));

  AnalysisConfig keep_specials = config(MetricMode::HighConfidence);
  keep_specials.exclude_flags = {};
  auto k = score_heads(corpus, src, constant_property(true), keep_specials);
  // Now CLS and SEP participate (PAD never does) and count as misses.
  CHECK(k.at(0, 0).arc_count == 6);
  CHECK(k.at(0, 0).hits == 2);
}

TEST_CASE("matches the brute-force oracle on random corpora") {
  Rng rng(1234);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n_prot = 1 + rng.below(5);
    const std::size_t layers = 1 + rng.below(2);
    const std::size_t heads = 1 + rng.below(3);
    std::vector<ProteinRecord> corpus;
    std::vector<AttentionTensor> tensors;
    std::vector<PropertyIndicator> indicators;
    std::map<std::string, PropertyIndicator> by_id;
    const bool pairwise = rng.below(2) == 0;
    for (std::size_t p = 0; p < n_prot; ++p) {
      const std::size_t tokens = 1 + rng.below(8);
      std::vector<TokenFlag> flags(tokens);
      std::size_t L = 0;
      for (auto& f : flags) {
        f = static_cast<TokenFlag>(rng.below(4));
        if (rng.below(2)) f = R::Residue;
        L += f == R::Residue;
      }
      const std::string id = "p" + std::to_string(p);
      ProteinRecord r = testing::record(id, std::string(L, 'A'));
      tensors.push_back(oracle::random_tensor(rng, id, flags, layers, heads));
      std::optional<PropertyIndicator> ind;
      if (pairwise) {
        std::vector<std::uint8_t> mask(L * L), defined(L);
        for (auto& m : mask) m = rng.below(3) == 0;
        for (auto& d : defined) d = rng.below(5) != 0;
        ind = PropertyIndicator::pairwise("rand", L, mask, defined);
      } else {
        std::vector<std::uint8_t> mask(L);
        for (auto& m : mask) m = rng.below(3) == 0;
        ind = PropertyIndicator::token("rand", L, mask);
      }
      indicators.push_back(*ind);
      by_id.emplace(id, *ind);
      corpus.push_back(std::move(r));
    }
    Property prop{"rand", pairwise ? PropertyKind::Pairwise : PropertyKind::Token,
                  [&](const ProteinRecord& r) -> std::optional<PropertyIndicator> { return by_id.at(r.id); }};
    InMemoryAttention src(tensors);
    const auto expect = oracle::score(tensors, indicators, 0.3, {R::Cls, R::Sep, R::Pad});
    auto hc = score_heads(corpus, src, prop, config(MetricMode::HighConfidence));
    auto wt = score_heads(corpus, src, prop, config(MetricMode::Weighted));
    for (std::size_t k = 0; k < expect.size(); ++k) {
      CHECK(hc.heads[k].arc_count == expect[k].arcs);
      CHECK(hc.heads[k].hits == expect[k].hits);
      if (expect[k].weighted_total > 0) {
        REQUIRE(wt.heads[k].score);
        CHECK(std::abs(*wt.heads[k].score - expect[k].weighted_hits / expect[k].weighted_total) < 1e-12);
      }
    }
  }
}

TEST_CASE("scores do not depend on corpus order, threads or sharding") {
  SyntheticSpec spec;
  spec.n_proteins = 70;
  spec.n_layers = 2;
  spec.n_heads = 2;
  spec.contact_head = HeadIndex{1, 0};
  auto data = make_synthetic(spec);
  InMemoryAttention src(data.attention);
  auto props = std::vector<Property>{property_by_name("contact"), property_by_name("binding_site")};
  for (auto mode : {MetricMode::HighConfidence, MetricMode::Weighted}) {
    const auto one = score_heads(data.records, src, props, config(mode));
    auto shuffled = data.records;
    std::reverse(shuffled.begin(), shuffled.end());
    ScoreOptions many{4, 64};
    const auto four = score_heads(shuffled, src, props, config(mode), many);
    for (std::size_t p = 0; p < props.size(); ++p) {
      for (std::size_t k = 0; k < one[p].heads.size(); ++k) {
        CHECK(one[p].heads[k].score == four[p].heads[k].score);
        CHECK(one[p].heads[k].attention_mass == four[p].heads[k].attention_mass);
      }
    }
    ScoreOptions tiny{3, 1};
    const auto split = score_heads(data.records, src, props, config(mode), tiny);
    for (std::size_t p = 0; p < props.size(); ++p) {
      for (std::size_t k = 0; k < one[p].heads.size(); ++k) {
        CHECK(one[p].heads[k].arc_count == split[p].heads[k].arc_count);
        CHECK(*one[p].heads[k].score == doctest::Approx(*split[p].heads[k].score).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("missing tensors and shape mismatches") {
  std::vector<ProteinRecord> corpus{testing::record("W", "ACD"), testing::record("Z", "AC")};
  InMemoryAttention src({worked_tensor()});
  try {
    score_heads(corpus, src, worked_property(), config(MetricMode::HighConfidence));
    FAIL("expected MissingTensor");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingTensor);
  }
  std::vector<ProteinRecord> wrong{testing::record("W", "ACDE")};
  try {
    score_heads(wrong, src, worked_property(), config(MetricMode::HighConfidence));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("config validation") {
  AnalysisConfig c;
  c.theta = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.theta = 0.3;
  c.min_arcs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  AnalysisConfig a, b;
  b.theta = 0.31;
  CHECK(a.cache_key() != b.cache_key());
}

}
