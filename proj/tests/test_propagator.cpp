#include <cmath>
#include <functional>

#include "doctest.h"
#include "ripple/error.hpp"
#include "ripple/external_client.hpp"
#include "ripple/propagator.hpp"
#include "ripple/csv.hpp"
#include "ripple/rng.hpp"
#include "test_support.hpp"

using namespace ripple;
using ripple::testing::edge;

namespace {

LayerConfig unit_weights() {
  LayerConfig cfg;
  cfg.weights = {1.0, 1.0, 1.0, 1.0};
  return cfg;
}

Event event_on(std::vector<std::string> codes, std::string id = "e1") {
  Event e;
  e.id = std::move(id);
  e.datetime = "2023-01-10T09:30:00";
  for (auto& c : codes) e.company_codes.emplace_back(c);
  e.title = "t";
  return e;
}

// mu(A,B)=0.5, mu(B,C)=0.4 (supply chain, normalized against X->Y weight 10).
GraphSnapshot chain() {
  std::vector<EdgeRecord> edges{edge("A", "B", RelationKind::SupplyChain, 5.0),
                                edge("B", "C", RelationKind::SupplyChain, 4.0),
                                edge("X", "Y", RelationKind::SupplyChain, 10.0)};
  return build_snapshot(edges, {}, unit_weights());
}

double z_of(const ShockVector& z, const char* firm) {
  auto it = z.find(FirmId(firm));
  return it == z.end() ? 0.0 : it->second;
}

}  // namespace

TEST_CASE("diffusion hand examples") {
  const auto s = chain();
  DiffusionParams p;
  p.decay = {0.5, 0.5, 0.5, 0.5};
  p.seed_scale = 1.0;

  SUBCASE("no hops keeps only the seed") {
    p.hops = 0;
    auto z = aggregate_shocks(s, propagate_diffusion(s, event_on({"A"}), p));
    CHECK(z.size() == 1);
    CHECK(z_of(z, "A") == doctest::Approx(0.8));
  }
  SUBCASE("two hops down the chain") {
    p.hops = 2;
    auto pred = propagate_diffusion(s, event_on({"A"}), p);
    auto z = aggregate_shocks(s, pred);
    CHECK(std::abs(z_of(z, "A") - 0.8) <= 1e-12);
    CHECK(std::abs(z_of(z, "B") - 0.2) <= 1e-12);
    CHECK(std::abs(z_of(z, "C") - 0.04) <= 1e-12);
    CHECK(z_of(z, "X") == 0.0);
    CHECK(pred.claims.size() == 2);  // A (8) and B (2); C rounds to 0
  }
  SUBCASE("zero interaction means only seeds") {
    auto lonely = build_snapshot({}, std::vector<CpcProfile>{}, {}, Month{2023, 1});
    std::vector<EdgeRecord> none{edge("A", "B", RelationKind::SupplyChain, 0.0)};
    auto s0 = build_snapshot(none, {}, unit_weights());
    p.hops = 3;
    auto z = aggregate_shocks(s0, propagate_diffusion(s0, event_on({"A"}), p));
    CHECK(z.size() == 1);
    CHECK(z_of(z, "A") == doctest::Approx(0.8));
    CHECK_THROWS_AS(propagate_diffusion(lonely, event_on({"A"}), p), Error);
  }
  SUBCASE("unknown seed") {
    try {
      propagate_diffusion(s, event_on({"NOPE"}), p);
      FAIL("expected NoSeedInGraph");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoSeedInGraph);
    }
    auto pred = propagate_diffusion(s, event_on({"NOPE", "A"}), p);
    CHECK(pred.unresolved == std::vector<std::string>{"NOPE"});
  }
  SUBCASE("invalid params") {
    p.decay[0] = 1.5;
    CHECK_THROWS_AS(propagate_diffusion(s, event_on({"A"}), p), Error);
  }
}

TEST_CASE("diffusion matches brute-force path sums") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    auto edges = ripple::testing::random_edges(rng, n, 0.3);
    if (edges.empty()) continue;
    LayerConfig cfg;
    for (auto& w : cfg.weights) w = rng.uniform(0.0, 1.0);
    auto s = build_snapshot(edges, {}, cfg);
    DiffusionParams p;
    for (auto& d : p.decay) d = rng.uniform();
    p.hops = static_cast<int>(rng.below(4));
    p.seed_scale = rng.uniform(0.1, 1.0);
    auto seed_firm = s.firms()[rng.below(s.size())];
    auto z = aggregate_shocks(s, propagate_diffusion(s, event_on({seed_firm.str()}), p));
    auto oracle = ripple::testing::path_sum(s, {*s.index_of(seed_firm)}, p);
    for (std::size_t j = 0; j < s.size(); ++j) {
      auto it = z.find(s.firms()[j]);
      const double got = it == z.end() ? 0.0 : it->second;
      CHECK(std::abs(got - oracle[j]) <= 1e-9);
    }
  }
}

TEST_CASE("diffusion invariants") {
  Rng rng(3);
  auto edges = ripple::testing::random_edges(rng, 12, 0.15);
  auto s = build_snapshot(edges);
  DiffusionParams p;
  p.hops = 3;
  const auto seed = s.firms()[0];

  SUBCASE("zero decay keeps support on the seeds") {
    p.decay = {0, 0, 0, 0};
    auto z = aggregate_shocks(s, propagate_diffusion(s, event_on({seed.str(), s.firms()[1].str()}), p));
    for (const auto& [firm, v] : z) CHECK((firm == seed || firm == s.firms()[1]));
  }
  SUBCASE("firm insertion order does not matter") {
    auto shuffled = edges;
    rng.shuffle(shuffled);
    auto s2 = build_snapshot(shuffled);
    auto a = aggregate_shocks(s, propagate_diffusion(s, event_on({seed.str()}), p));
    auto b = aggregate_shocks(s2, propagate_diffusion(s2, event_on({seed.str()}), p));
    REQUIRE(a.size() == b.size());
    for (const auto& [firm, v] : a) CHECK(std::abs(b.at(firm) - v) <= 1e-12);
  }
}

TEST_CASE("aggregate shocks") {
  const auto s = chain();
  PredictionSet pred;
  CHECK(aggregate_shocks(s, pred).empty());
  pred.y[{FirmId("A"), FirmId("B")}] = 0.8;
  CHECK(std::abs(z_of(aggregate_shocks(s, pred), "B") - 0.4) <= 1e-15);

  pred.y[{FirmId("ZZZ"), FirmId("B")}] = 1.0;
  std::vector<std::string> skipped;
  auto z = aggregate_shocks(s, pred, &skipped);
  CHECK(skipped == std::vector<std::string>{"ZZZ"});
  CHECK(std::abs(z_of(z, "B") - 0.4) <= 1e-15);

  // Linearity on random sparse Y.
  Rng rng(8);
  auto edges = ripple::testing::random_edges(rng, 10, 0.2);
  auto g = build_snapshot(edges);
  for (int trial = 0; trial < 100; ++trial) {
    PredictionSet y1, y2, mix;
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    for (int k = 0; k < 15; ++k) {
      auto i = g.firms()[rng.below(g.size())], j = g.firms()[rng.below(g.size())];
      const double u = rng.uniform(-1, 1), w = rng.uniform(-1, 1);
      y1.y[{i, j}] += u;
      y2.y[{i, j}] += w;
    }
    for (const auto& [k, v] : y1.y) mix.y[k] += a * v;
    for (const auto& [k, v] : y2.y) mix.y[k] += b * v;
    auto z1 = aggregate_shocks(g, y1), z2 = aggregate_shocks(g, y2), zm = aggregate_shocks(g, mix);
    for (const auto& firm : g.firms()) {
      auto get = [&](const ShockVector& z) {
        auto it = z.find(firm);
        return it == z.end() ? 0.0 : it->second;
      };
      CHECK(std::abs(get(zm) - (a * get(z1) + b * get(z2))) <= 1e-12);
    }
  }
  // Doubling Y doubles Z exactly.
  PredictionSet twice = pred;
  for (auto& [k, v] : twice.y) v *= 2.0;
  auto z2 = aggregate_shocks(s, twice);
  for (const auto& [firm, v] : z) CHECK(z2.at(firm) == 2.0 * v);
}

TEST_CASE("parse impact_analysis") {
  const std::string example = R"({
    "impact_analysis": {
      "affected_companies": [
        {"name": "Company A", "impact_type": "positive", "impact_score": 8},
        {"name": "Company B", "impact_type": "positive", "impact_score": 6}
      ],
      "analysis": "The partnership is expected to enhance both firms."
    }
  })";
  auto outcome = parse_prediction(example);
  REQUIRE(std::holds_alternative<PredictionSet>(outcome));
  const auto& p = std::get<PredictionSet>(outcome);
  REQUIRE(p.claims.size() == 2);
  CHECK(p.claims[0] == ImpactClaim{"Company A", ImpactType::Positive, 8});
  CHECK(p.y.at({FirmId("Company A"), FirmId("Company A")}) == doctest::Approx(0.8));

  auto reason = [](std::string_view text) {
    auto o = parse_prediction(text);
    REQUIRE(std::holds_alternative<Refusal>(o));
    return std::get<Refusal>(o).reason;
  };
  CHECK(reason("") == RefusalReason::EmptyOutput);
  CHECK(reason("  \n") == RefusalReason::EmptyOutput);
  CHECK(reason(example.substr(0, 60)) == RefusalReason::ParseError);
  CHECK(reason(R"({"impact_analysis":{"affected_companies":[{"name":"A","impact_type":"positive","impact_score":15}],"analysis":""}})") ==
        RefusalReason::ScoreOutOfRange);
  CHECK(reason(R"({"impact_analyses":{}})") == RefusalReason::SchemaViolation);
  CHECK(reason(R"({"impact_analysis":{"affected_companies":[],"analysis":3}})") == RefusalReason::SchemaViolation);
  CHECK(reason(R"({"impact_analysis":{"affected_companies":[{"name":"A","impact_type":"positive","impact_score":7.5}],"analysis":""}})") ==
        RefusalReason::SchemaViolation);
  CHECK(reason(R"({"impact_analysis":{"affected_companies":[{"name":"A","impact_type":"neutral","impact_score":2}],"analysis":""}})") ==
        RefusalReason::SchemaViolation);
  CHECK(reason(R"({"impact_analysis":{"affected_companies":[{"name":"A","impact_type":"positive","impact_score":-2}],"analysis":""}})") ==
        RefusalReason::SchemaViolation);
  CHECK(reason("[1,2]") == RefusalReason::SchemaViolation);

  // Negative claims may carry a magnitude; the stored score is signed.
  auto neg = parse_prediction(R"({"impact_analysis":{"affected_companies":[{"name":"A","impact_type":"negative","impact_score":6},{"name":"A","impact_type":"negative","impact_score":-2}],"analysis":"x"}})");
  REQUIRE(std::holds_alternative<PredictionSet>(neg));
  const auto& np = std::get<PredictionSet>(neg);
  CHECK(np.claims[0].impact_score == -6);
  CHECK(np.y.at({FirmId("A"), FirmId("A")}) == doctest::Approx(-0.8));  // same firm summed
}

TEST_CASE("serialize/parse round trip") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    PredictionSet p;
    p.event_id = "evt-" + std::to_string(trial);
    p.analysis = trial % 2 ? "quoted \"analysis\"\nline" : "";
    const int n = static_cast<int>(rng.below(6));
    for (int k = 0; k < n; ++k) {
      ImpactClaim c;
      c.name = "F" + std::to_string(rng.below(4));
      c.impact_score = static_cast<int>(rng.below(21)) - 10;
      c.impact_type = c.impact_score > 0 ? ImpactType::Positive
                      : c.impact_score < 0 ? ImpactType::Negative : ImpactType::Neutral;
      p.y[{FirmId(c.name), FirmId(c.name)}] += c.impact_score / 10.0;
      p.claims.push_back(c);
    }
    auto back = parse_prediction(serialize_prediction(p));
    REQUIRE(std::holds_alternative<PredictionSet>(back));
    CHECK(std::get<PredictionSet>(back) == p);
  }
}

TEST_CASE("context trimming and request line") {
  const auto s = chain();
  auto view = trim_context(s, event_on({"A"}));
  CHECK(view.firms == std::vector<FirmId>{FirmId("A"), FirmId("B"), FirmId("C")});
  REQUIRE(view.edges.size() == 2);
  CHECK(view.edges[0].mu == doctest::Approx(0.5));
  auto small = trim_context(s, event_on({"A"}), 1);
  CHECK(small.edges.size() == 1);
  const auto req = build_request(event_on({"A"}), small);
  CHECK(req ==
        R"({"id":"e1","event":{"datetime":"2023-01-10T09:30:00","company_codes":["A"],"title":"t","body":""},"context":{"firms":["A","B","C"],"edges":[["A","B","supply_chain",0.5]]}})");
}

TEST_CASE("events jsonl") {
  const std::string text =
      R"({"id":"e1","datetime":"2023-01-03T10:00:00","company_codes":["AAA"],"title":"x","body":"y"})"
      "\n"
      R"({"id":"e2","datetime":"2023-01-04","company_codes":["BBB","CCC"],"title":"x","body":"y","action":"merger"})"
      "\n";
  auto events = parse_events_jsonl(text);
  REQUIRE(events.size() == 2);
  CHECK(events[1].action == "merger");
  CHECK(events[0].date() == Date{2023, 1, 3});
  CHECK(parse_events_jsonl(events_to_jsonl(events)).size() == 2);
  CHECK_THROWS_AS(parse_events_jsonl(text + text), Error);  // duplicate ids
}

// --- external process host ---------------------------------------------------

namespace {

std::string mock(const std::string& args) { return std::string(MOCK_PROPAGATOR_PATH) + " " + args; }

Event golden_event() {
  Event e = event_on({"AAA"}, "evt-golden");
  e.datetime = "2023-03-01T09:30:00";
  e.title = "AAA wins supply contract";
  e.body = "AAA signs a multi-year supply agreement.";
  return e;
}

ContextView golden_context() {
  ContextView v;
  v.firms = {FirmId("AAA"), FirmId("BBB"), FirmId("CCC")};
  v.edges = {{FirmId("AAA"), FirmId("BBB"), RelationKind::SupplyChain, 0.5},
             {FirmId("BBB"), FirmId("CCC"), RelationKind::SupplyChain, 0.4}};
  return v;
}

std::string fixture(const char* name) {
  auto text = read_text_file(std::string(RIPPLE_FIXTURE_DIR) + "/" + name);
  while (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

}  // namespace

TEST_CASE("golden request fixture matches build_request") {
  CHECK(build_request(golden_event(), golden_context()) == fixture("golden_request.jsonl"));
}

TEST_CASE("external client conformance") {
  const auto golden = fixture("golden_response.jsonl");
  SUBCASE("golden echo round trip") {
    PropagatorClient client(mock(std::string("--mode golden --golden ") + RIPPLE_FIXTURE_DIR +
                                 "/golden_response.jsonl"));
    auto outcome = run_external(client, golden_event(), golden_context(), std::chrono::seconds(5));
    REQUIRE(std::holds_alternative<PredictionSet>(outcome));
    CHECK(serialize_prediction(std::get<PredictionSet>(outcome)) == golden);
    CHECK(std::get<PredictionSet>(outcome) == std::get<PredictionSet>(parse_prediction(golden)));
  }
  SUBCASE("heuristic client reproduces the golden response") {
    PropagatorClient client(mock("--mode heuristic --decay 0.5"));
    auto outcome = run_external(client, golden_event(), golden_context(), std::chrono::seconds(5));
    REQUIRE(std::holds_alternative<PredictionSet>(outcome));
    CHECK(serialize_prediction(std::get<PredictionSet>(outcome)) == golden);
  }
  SUBCASE("slow client times out, later reply is discarded as stale") {
    PropagatorClient client(mock("--mode heuristic --delay-ms 400"));
    auto first = run_external(client, golden_event(), golden_context(), std::chrono::milliseconds(100));
    REQUIRE(std::holds_alternative<Refusal>(first));
    CHECK(std::get<Refusal>(first).reason == RefusalReason::Timeout);
    Event second = golden_event();
    second.id = "evt-2";
    auto outcome = run_external(client, second, golden_context(), std::chrono::seconds(5));
    REQUIRE(std::holds_alternative<PredictionSet>(outcome));
    CHECK(std::get<PredictionSet>(outcome).event_id == "evt-2");
  }
  SUBCASE("chaos client yields refusals") {
    PropagatorClient client(mock("--mode chaos --chaos-rate 1.0"));
    int refusals = 0;
    for (int i = 0; i < 20; ++i) {
      Event e = golden_event();
      e.id = "evt-" + std::to_string(i);
      auto outcome = run_external(client, e, golden_context(), std::chrono::seconds(5));
      refusals += std::holds_alternative<Refusal>(outcome);
    }
    CHECK(refusals == 20);
  }
  SUBCASE("exit then broken pipe") {
    PropagatorClient client(mock("--mode exit"));
    auto outcome = run_external(client, golden_event(), golden_context(), std::chrono::seconds(5));
    REQUIRE(std::holds_alternative<Refusal>(outcome));
    CHECK(std::get<Refusal>(outcome).reason == RefusalReason::Died);
    try {
      run_external(client, golden_event(), golden_context(), std::chrono::seconds(1));
      FAIL("expected ClientDead");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ClientDead);
    }
  }
  SUBCASE("batch over two processes comes back in id order") {
    std::vector<std::unique_ptr<PropagatorClient>> clients;
    clients.push_back(std::make_unique<PropagatorClient>(mock("--mode heuristic")));
    clients.push_back(std::make_unique<PropagatorClient>(mock("--mode heuristic")));
    std::vector<Event> events;
    for (int i = 9; i >= 0; --i) {
      Event e = golden_event();
      e.id = "evt-" + std::to_string(i);
      events.push_back(e);
    }
    auto results = run_external_batch(clients, events, [](const Event&) { return golden_context(); },
                                      std::chrono::seconds(5));
    REQUIRE(results.size() == 10);
    for (std::size_t i = 0; i < results.size(); ++i) {
      CHECK(results[i].first == "evt-" + std::to_string(i));
      REQUIRE(std::holds_alternative<PredictionSet>(results[i].second));
      CHECK(std::get<PredictionSet>(results[i].second).event_id == results[i].first);
    }
  }
}
