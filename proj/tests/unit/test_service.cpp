#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "helpers.hpp"
#include "protattn/error.hpp"
#include "protattn/service.hpp"
#include "protattn/synthetic.hpp"

using namespace protattn;
using nlohmann::json;

namespace {

Session make_session(SessionOptions options = {}) {
  SyntheticSpec spec;
  spec.n_proteins = 6;
  spec.min_length = 30;
  spec.max_length = 40;
  spec.binding_rate = 0.15;
  spec.seed = 11;
  spec.contact_head = HeadIndex{1, 0};
  spec.binding_head = HeadIndex{0, 2};
  auto data = make_synthetic(spec);
  data.records[2].coords.reset();
  auto source = std::make_shared<InMemoryAttention>(std::move(data.attention));
  return Session(std::move(data.records), source, options);
}

json body(const ApiResponse& r) { return json::parse(r.body); }

}  // namespace

TEST_SUITE("service") {

TEST_CASE("protein list and detail") {
  Session session = make_session();
  ApiHandler api(session);

  const auto list = api.get("/api/proteins", {});
  REQUIRE(list.status == 200);
  const auto j = body(list);
  REQUIRE(j.size() == 6);
  CHECK(j[0]["id"] == "SYN0");
  CHECK(j[2]["has_coords"] == false);

  const auto& rec = *session.find("SYN1");
  const auto detail = body(api.get("/api/proteins/SYN1", {}));
  CHECK(detail["sequence"] == sequence_to_string(rec.sequence));
  CHECK(detail["length"] == rec.length());
  CHECK(detail["coords"].size() == rec.length());
  CHECK(detail["ss"].get<std::string>().size() == rec.length());
  CHECK(detail["contacts"].size() == derive_contacts(rec).pairs().size());

  const auto bare = body(api.get("/api/proteins/SYN2", {}));
  CHECK(bare["coords"].is_null());
  CHECK(bare["contacts"].is_null());

  CHECK(api.get("/api/proteins/NOPE", {}).status == 404);
  CHECK(api.get("/api/unknown", {}).status == 404);
  CHECK(api.get("/", {}).status == 404);
}

TEST_CASE("attention endpoint returns the admitted arc set") {
  Session session = make_session();
  ApiHandler api(session);
  const auto& rec = *session.find("SYN3");
  const auto tensor = session.tensor(rec);

  for (std::size_t l = 1; l <= 2; ++l) {
    for (std::size_t h = 1; h <= 3; ++h) {
      const auto r = api.get("/api/proteins/SYN3/attention",
                             {{"layer", std::to_string(l)}, {"head", std::to_string(h)}});
      REQUIRE(r.status == 200);
      const auto j = body(r);
      CHECK(j["threshold"] == kViewerThreshold);
      const auto expected = admitted_arcs(*tensor, l - 1, h - 1, 0.1, {});
      REQUIRE(j["arcs"].size() == expected.size());
      for (std::size_t k = 0; k < expected.size(); ++k) {
        CHECK(j["arcs"][k]["from"] == expected[k].from);
        CHECK(j["arcs"][k]["to"] == expected[k].to);
        CHECK(j["arcs"][k]["weight"].get<double>() == static_cast<double>(expected[k].weight));
      }
    }
  }

  const auto none = body(api.get("/api/proteins/SYN3/attention",
                                 {{"layer", "1"}, {"head", "1"}, {"threshold", "1"}}));
  CHECK(none["arcs"].empty());

  CHECK(api.get("/api/proteins/SYN3/attention", {{"layer", "1"}}).status == 400);
  CHECK(api.get("/api/proteins/SYN3/attention", {{"layer", "0"}, {"head", "1"}}).status == 400);
  CHECK(api.get("/api/proteins/SYN3/attention", {{"layer", "3"}, {"head", "1"}}).status == 400);
  CHECK(api.get("/api/proteins/SYN3/attention", {{"layer", "x"}, {"head", "1"}}).status == 400);
  CHECK(api.get("/api/proteins/SYN3/attention",
                {{"layer", "1"}, {"head", "1"}, {"threshold", "1.5"}})
            .status == 400);
}

TEST_CASE("rankings, profiles and amino-acid correlation") {
  Session session = make_session();
  ApiHandler api(session);

  const auto r = api.get("/api/heads/rankings", {{"property", "binding_site"}});
  REQUIRE(r.status == 200);
  const auto j = body(r);
  CHECK(j["property"] == "binding_site");
  CHECK(j["top_heads"][0]["head"] == "1-3");
  CHECK(r.body == table_json_text(*session.table("binding_site")));

  const auto bad = api.get("/api/heads/rankings", {{"property", "nonsense"}});
  CHECK(bad.status == 400);
  CHECK(body(bad)["error"].get<std::string>().find("contact") != std::string::npos);
  CHECK(api.get("/api/heads/rankings", {}).status == 400);

  const auto p = body(api.get("/api/layers/profile", {{"property", "contact"}}));
  CHECK(p["layer_means"].size() == 2);

  const auto aa = api.get("/api/aa/correlation", {});
  REQUIRE(aa.status == 200);
  CHECK(body(aa)["correlation"].is_object());
}

TEST_CASE("identical concurrent requests compute once") {
  Session session = make_session();
  ApiHandler api(session);
  std::vector<std::thread> threads;
  std::vector<std::string> bodies(8);
  for (std::size_t t = 0; t < bodies.size(); ++t) {
    threads.emplace_back([&, t] {
      bodies[t] = api.get("/api/heads/rankings", {{"property", "contact"}}).body;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(session.table_computations() == 1);
  for (const auto& b : bodies) CHECK(b == bodies[0]);
  api.get("/api/layers/profile", {{"property", "contact"}});
  CHECK(session.table_computations() == 1);
}

TEST_CASE("single-flight cache retries after a failure") {
  SingleFlightCache<int> cache;
  CHECK_THROWS(cache.get("k", []() -> int { throw std::runtime_error("boom"); }));
  CHECK(*cache.get("k", [] { return 3; }) == 3);
  CHECK(*cache.get("k", [] { return 4; }) == 3);
  CHECK(cache.computations() == 2);
}

TEST_CASE("missing tensor and shape mismatch map to error statuses") {
  SyntheticSpec spec;
  spec.n_proteins = 2;
  spec.seed = 5;
  auto data = make_synthetic(spec);
  auto source = std::make_shared<InMemoryAttention>();
  source->add(std::move(data.attention[0]));
  data.records[0].sequence.pop_back();
  Session session(std::move(data.records), source, {});
  ApiHandler api(session);
  const auto missing = api.get("/api/proteins/SYN1/attention", {{"layer", "1"}, {"head", "1"}});
  CHECK(missing.status == 404);
  const auto shape = api.get("/api/proteins/SYN0/attention", {{"layer", "1"}, {"head", "1"}});
  CHECK(shape.status == 500);
  CHECK(body(shape)["error"].get<std::string>().find("ShapeMismatch") != std::string::npos);
}

TEST_CASE("null seed shuffles what the session serves") {
  SessionOptions opts;
  opts.null_seed = 9;
  Session shuffled = make_session(opts);
  Session plain = make_session();
  CHECK(*shuffled.table("binding_site")->at(0, 2).score < *plain.table("binding_site")->at(0, 2).score);
}

TEST_CASE("HTTP server round trip, port conflict and shutdown") {
  Session session = make_session();
  std::atomic<bool> stop{false};
  std::atomic<int> port{0};
  std::exception_ptr failure;
  std::thread server([&] {
    try {
      serve(session, "127.0.0.1", 0, stop, &port);
    } catch (...) {
      failure = std::current_exception();
    }
  });
  for (int i = 0; i < 200 && port.load() == 0 && !failure; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  REQUIRE(port.load() > 0);

  httplib::Client client("127.0.0.1", port.load());
  auto res = client.Get("/api/proteins");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type").starts_with("application/json"));
  CHECK(json::parse(res->body).size() == 6);
  res = client.Get("/api/proteins/SYN0/attention?layer=2&head=1&threshold=0.1");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == ApiHandler(session).get("/api/proteins/SYN0/attention",
                                              {{"layer", "2"}, {"head", "1"}, {"threshold", "0.1"}})
                         .body);

  std::atomic<bool> stop2{false};
  try {
    serve(session, "127.0.0.1", port.load(), stop2);
    FAIL("second bind should fail");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PortInUse);
  }

  stop = true;
  server.join();
  CHECK_FALSE(failure);
}

}
