#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/metrics.hpp"
#include "chatact/taxonomy.hpp"
#include "test_support.hpp"

using namespace chatact;
using nlohmann::json;

namespace {

const Taxonomy& tax() { return Taxonomy::builtin(); }

LabeledSentence ls(std::string id, std::string speaker, std::int64_t seconds, std::optional<std::string> label,
                   std::string dialogue = "d") {
  return {std::move(id), std::move(dialogue), std::move(speaker), Timestamp(std::chrono::seconds(seconds)),
          std::move(label), ""};
}

std::vector<LabeledSentence> fixture_stream() { return parse_labeled(chatact::testing::fixture("metrics_fixture.jsonl")); }

std::vector<std::string> ids_of(const json& j) { return j.get<std::vector<std::string>>(); }

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Recomputes a metric from its evidence alone.
std::optional<double> recompute(const MetricsReport& r, const Metric& m) {
  switch (m.unit) {
    case MetricUnit::kRatio:
      if (m.denominator_ids.empty()) return std::nullopt;
      return static_cast<double>(m.numerator_ids.size()) / static_cast<double>(m.denominator_ids.size());
    case MetricUnit::kPer100:
      if (r.labeled_sentence_ids.empty()) return std::nullopt;
      return 100.0 * static_cast<double>(m.numerator_ids.size()) / static_cast<double>(r.labeled_sentence_ids.size());
    case MetricUnit::kSeconds: {
      std::vector<double> l;
      for (auto k : m.pairs) l.push_back(static_cast<double>(r.pairs[k].latency->count()) / 1e6);
      if (l.empty()) return std::nullopt;
      std::sort(l.begin(), l.end());
      return l.size() % 2 ? l[l.size() / 2] : (l[l.size() / 2 - 1] + l[l.size() / 2]) / 2;
    }
  }
  return std::nullopt;
}

void check_self_consistent(const MetricsReport& r) {
  for (const auto& m : r.metrics) {
    const auto again = recompute(r, m);
    CHECK(again.has_value() == m.value.has_value());
    if (again && m.value) CHECK(*again == *m.value);
    if (m.value && m.unit == MetricUnit::kRatio) CHECK((*m.value >= 0.0 && *m.value <= 1.0));
    if (m.value) CHECK(*m.value >= 0.0);
  }
  for (const auto& p : r.pairs) {
    CHECK(p.closed == p.responder_sentence_id.has_value());
    if (p.closed) {
      CHECK(*p.responder_speaker != p.initiator_speaker);
      CHECK(p.latency->count() >= 0);
    }
  }
}

const LabeledSentence& by_id(const std::vector<LabeledSentence>& s, const std::string& id) {
  return *std::find_if(s.begin(), s.end(), [&](const LabeledSentence& x) { return x.id == id; });
}

}  // namespace

TEST_CASE("hand-labeled fixture matches the golden report") {
  const auto golden = json::parse(chatact::testing::fixture("metrics_golden.json"));
  const auto stream = fixture_stream();
  REQUIRE(stream.size() == 20);
  const auto r = build_report(stream, tax());

  CHECK(r.frequencies.sentences == golden["sentences"].get<std::size_t>());
  CHECK(r.frequencies.labeled == golden["labeled"].get<std::size_t>());
  CHECK(r.frequencies.unlabeled == golden["unlabeled"].get<std::size_t>());
  std::map<std::string, std::size_t> counts;
  for (const auto& [label, lc] : r.frequencies.labels) counts[label] = lc.count;
  CHECK(counts == golden["label_counts"].get<std::map<std::string, std::size_t>>());

  REQUIRE(r.pairs.size() == golden["pairs"].size());
  for (std::size_t k = 0; k < r.pairs.size(); ++k) {
    const auto& g = golden["pairs"][k];
    const auto& p = r.pairs[k];
    CHECK(p.initiator_sentence_id == g["initiator"].get<std::string>());
    CHECK(p.initiator_kind == g["kind"].get<std::string>());
    if (g["responder"].is_null()) {
      CHECK_FALSE(p.closed);
    } else {
      REQUIRE(p.closed);
      CHECK(*p.responder_sentence_id == g["responder"].get<std::string>());
      CHECK(p.latency->count() == g["latency"].get<std::int64_t>() * 1000000);
    }
  }

  for (const auto& [name, g] : golden["team"].items()) {
    CAPTURE(name);
    const Metric& m = r.metric(name);
    REQUIRE(m.value);
    CHECK(*m.value == g["value"].get<double>());
    CHECK(m.low_signal == g["low_signal"].get<bool>());
    if (g.contains("numerator")) CHECK(sorted(m.numerator_ids) == sorted(ids_of(g["numerator"])));
    if (g.contains("denominator")) CHECK(sorted(m.denominator_ids) == sorted(ids_of(g["denominator"])));
  }

  REQUIRE(r.speakers.size() == 3);
  for (const auto& s : r.speakers) {
    const auto& g = golden["speakers"][s.scope.substr(std::string("speaker:").size())];
    CAPTURE(s.scope);
    CHECK(s.frequencies.sentences == g["sentences"].get<std::size_t>());
    CHECK(s.frequencies.labeled == g["labeled"].get<std::size_t>());
    for (const char* name :
         {"loop_closure_rate", "assignment_uptake_rate", "assignment_decline_rate", "median_response_latency"}) {
      if (!g.contains(name)) continue;
      const Metric& m = s.metric(name);
      if (g[name].is_null()) {
        CHECK_FALSE(m.value);
      } else {
        REQUIRE(m.value);
        CHECK(*m.value == g[name].get<double>());
      }
    }
    check_self_consistent(s);
  }
  check_self_consistent(r);
}

TEST_CASE("per-speaker counts sum to the team counts") {
  const auto r = build_report(fixture_stream(), tax());
  std::map<std::string, std::size_t> sum;
  std::size_t sentences = 0;
  for (const auto& s : r.speakers) {
    sentences += s.frequencies.sentences;
    for (const auto& [label, lc] : s.frequencies.labels) sum[label] += lc.count;
  }
  CHECK(sentences == r.frequencies.sentences);
  for (const auto& [label, lc] : r.frequencies.labels) CHECK(sum[label] == lc.count);
}

TEST_CASE("principles, polarity and report rendering") {
  const auto r = build_report(fixture_stream(), tax());
  std::set<std::string> principles;
  for (const auto& m : r.metrics) principles.insert(m.principles.begin(), m.principles.end());
  CHECK(principles.size() == 6);
  CHECK(r.metric("blame_rate").polarity == Polarity::kNegative);
  CHECK(r.metric("median_response_latency").polarity == Polarity::kClue);
  const auto j = json::parse(report_json(r));
  CHECK(j["metrics"][0]["name"] == "loop_closure_rate");
  CHECK(j["window_of_analysis"]["start"] == "2021-03-01T10:00:00Z");
  CHECK(j["window_of_analysis"]["end"] == "2021-03-01T10:40:00Z");
  CHECK(j["speakers"].size() == 3);
  const auto text = report_text(r);
  CHECK(text.find("loop_closure_rate") != std::string::npos);
  CHECK(text.find("0.800 (4/5)") != std::string::npos);
  CHECK(text.find("low-signal") != std::string::npos);
}

TEST_CASE("one correction changes only metrics whose evidence holds the sentence") {
  const auto before_stream = fixture_stream();
  auto after_stream = before_stream;
  for (auto& s : after_stream) {
    if (s.id == "s15") s.label = "Social-Appreciation";
  }
  const auto before = build_report(before_stream, tax());
  const auto after = build_report(after_stream, tax());
  std::set<std::string> changed;
  for (std::size_t k = 0; k < before.metrics.size(); ++k) {
    const auto& a = before.metrics[k];
    const auto& b = after.metrics[k];
    const auto ea = before.evidence(a), eb = after.evidence(b);
    const bool holds = std::binary_search(ea.begin(), ea.end(), "s15") || std::binary_search(eb.begin(), eb.end(), "s15");
    if (a.value != b.value) {
      changed.insert(a.name);
      CHECK(holds);
    }
  }
  CHECK(changed == std::set<std::string>{"appreciation_rate"});
  CHECK(*after.metric("appreciation_rate").value == 200.0 / 19);
  // s12 is now answered by s19 twenty minutes later.
  CHECK(after.pairs[5].responder_sentence_id == std::optional<std::string>("s19"));
}

TEST_CASE("random corrections respect evidence") {
  static const std::vector<std::string> labels = {
      "Query-Technical", "Query-For-Clarification", "Inform-InResponse", "Inform-Technical", "Acknowledge-Accept",
      "Acknowledge-Receipt", "Reject-Counter", "Request-Help", "Assign-Task", "Propose-PossibleSolution",
      "Social-Comradery", "Social-Appreciation"};
  Rng rng(99);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<LabeledSentence> stream;
    const std::size_t n = 1 + rng.below(30);
    std::int64_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t += static_cast<std::int64_t>(rng.below(5) == 0 ? rng.below(200000) : rng.below(600));
      std::optional<std::string> label;
      if (rng.below(8) != 0) label = labels[rng.below(labels.size())];
      stream.push_back(ls("s" + std::to_string(i), std::string(1, static_cast<char>('A' + rng.below(3))), t, label,
                          rng.below(20) == 0 && i > 0 ? "other" : "d"));
    }
    std::stable_sort(stream.begin(), stream.end(),
                     [](const LabeledSentence& a, const LabeledSentence& b) { return a.dialogue_id < b.dialogue_id; });
    const std::size_t at = rng.below(n);
    auto changed = stream;
    changed[at].label = rng.below(6) == 0 ? std::nullopt : std::optional<std::string>(labels[rng.below(labels.size())]);
    const auto a = build_report(stream, tax());
    const auto b = build_report(changed, tax());
    check_self_consistent(a);
    const std::string& id = stream[at].id;
    for (std::size_t k = 0; k < a.metrics.size(); ++k) {
      if (a.metrics[k].value == b.metrics[k].value) continue;
      const auto ea = a.evidence(a.metrics[k]), eb = b.evidence(b.metrics[k]);
      CAPTURE(trial);
      CAPTURE(a.metrics[k].name);
      CHECK((std::binary_search(ea.begin(), ea.end(), id) || std::binary_search(eb.begin(), eb.end(), id)));
    }
  }
}

TEST_CASE("request then acknowledgement from another speaker") {
  const std::vector<LabeledSentence> s = {ls("f1", "PG", 0, "Request-Help"), ls("f2", "BR", 60, "Acknowledge"),
                                          ls("f3", "ER", 180, "Inform")};
  const auto pairs = detect_pairs(s, tax());
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].closed);
  CHECK(*pairs[0].responder_sentence_id == "f2");
  CHECK(*pairs[0].latency == std::chrono::seconds(60));
}

TEST_CASE("pair detection edge cases") {
  SUBCASE("unanswered query") {
    const auto p = detect_pairs({ls("a", "A", 0, "Query"), ls("b", "A", 5, "Inform")}, tax());
    REQUIRE(p.size() == 1);
    CHECK_FALSE(p[0].closed);
  }
  SUBCASE("two queries share one answer: the earlier wins") {
    const auto p =
        detect_pairs({ls("q1", "A", 0, "Query"), ls("q2", "A", 1, "Query"), ls("r", "B", 2, "Inform-InResponse")}, tax());
    REQUIRE(p.size() == 2);
    CHECK(*p[0].responder_sentence_id == "r");
    CHECK_FALSE(p[1].closed);
    CHECK(p[1].depends_on == std::vector<std::string>{"q1", "r"});
  }
  SUBCASE("horizons") {
    std::vector<LabeledSentence> s = {ls("q", "A", 0, "Query")};
    for (int i = 1; i <= 10; ++i) s.push_back(ls("x" + std::to_string(i), "A", i, "Social"));
    s.push_back(ls("late", "B", 11, "Inform"));
    CHECK_FALSE(detect_pairs(s, tax())[0].closed);
    s.erase(s.begin() + 1);
    CHECK(detect_pairs(s, tax())[0].closed);
    const auto slow = detect_pairs({ls("q", "A", 0, "Query"), ls("r", "B", 24 * 3600 + 1, "Inform")}, tax());
    CHECK_FALSE(slow[0].closed);
    const auto edge = detect_pairs({ls("q", "A", 0, "Query"), ls("r", "B", 24 * 3600, "Inform")}, tax());
    CHECK(edge[0].closed);
  }
  SUBCASE("pairs never cross dialogues") {
    const auto p = detect_pairs({ls("q", "A", 0, "Query", "d1"), ls("r", "B", 1, "Inform", "d2")}, tax());
    CHECK_FALSE(p[0].closed);
  }
  SUBCASE("a query can answer a proposal") {
    const auto p = detect_pairs({ls("p", "A", 0, "Propose-Task"), ls("q", "B", 1, "Query-Technical")}, tax());
    REQUIRE(p.size() == 2);
    CHECK(*p[0].responder_sentence_id == "q");
  }
  SUBCASE("trailing sentences beyond both horizons change nothing") {
    auto s = fixture_stream();
    const auto before = detect_pairs(s, tax());
    const Timestamp last = s.back().timestamp;
    for (int i = 0; i < 12; ++i) {
      s.push_back({"t" + std::to_string(i), "fx", "Z", last + std::chrono::hours(25 + i), std::string("Inform"), ""});
    }
    const auto after = detect_pairs(s, tax());
    REQUIRE(after.size() == before.size());
    for (std::size_t k = 0; k < before.size(); ++k) {
      CHECK(after[k].responder_sentence_id == before[k].responder_sentence_id);
      CHECK(after[k].depends_on == before[k].depends_on);
    }
  }
}

TEST_CASE("simple rates") {
  std::vector<LabeledSentence> s;
  for (int i = 0; i < 200; ++i) s.push_back(ls("s" + std::to_string(i), "A", i, i < 8 ? "Social-Comradery" : "Inform"));
  CHECK(*build_report(s, tax()).metric("comradery_rate").value == 4.0);

  std::vector<LabeledSentence> q;
  for (int i = 0; i < 10; ++i) q.push_back(ls("q" + std::to_string(i), "A", i, i < 2 ? "Query-For-Clarification" : "Query-Admin"));
  CHECK(*build_report(q, tax()).metric("clarification_rate").value == 0.2);

  const auto none = build_report({ls("a", "A", 0, "Inform"), ls("b", "B", 1, "Acknowledge")}, tax());
  CHECK_FALSE(none.metric("clarification_rate").value);
  CHECK_FALSE(none.metric("loop_closure_rate").value);
  CHECK(none.metric("loop_closure_rate").low_signal);
  for (const char* social : {"comradery_rate", "appreciation_rate", "frustration_rate", "blame_rate"}) {
    CHECK(*none.metric(social).value == 0.0);
    CHECK(none.metric(social).low_signal);
  }

  std::vector<LabeledSentence> loops = {ls("q1", "A", 0, "Query"), ls("r1", "B", 1, "Inform"), ls("q2", "A", 2, "Query"),
                                        ls("r2", "B", 3, "Inform"), ls("q3", "A", 4, "Query"), ls("r3", "B", 5, "Inform"),
                                        ls("q4", "A", 6, "Query")};
  CHECK(*build_report(loops, tax()).metric("loop_closure_rate").value == 0.75);

  const auto two = build_report({ls("a1", "A", 0, "Assign-Task"), ls("k1", "B", 1, "Acknowledge-Accept"),
                                 ls("a2", "A", 2, "Assign-Admin"), ls("k2", "B", 3, "Acknowledge")},
                                tax());
  CHECK(*two.metric("assignment_uptake_rate").value == 1.0);

  const auto declined = build_report({ls("a", "J", 0, "Assign-Task"), ls("r", "K", 1, "Reject-Counter-Assign")}, tax());
  const auto& up = declined.metric("assignment_uptake_rate");
  CHECK(up.denominator_ids.size() == 1);
  CHECK(*up.value == 0.0);
  CHECK(*declined.metric("assignment_decline_rate").value == 1.0);
}

TEST_CASE("empty stream") {
  const auto r = build_report({}, tax());
  CHECK(r.frequencies.sentences == 0);
  for (const auto& m : r.metrics) CHECK_FALSE(m.value);
  CHECK_FALSE(r.window_start);
}

TEST_CASE("labeled stream round-trip and config") {
  const auto s = fixture_stream();
  CHECK(by_id(s, "s18").label == std::nullopt);
  CHECK_THROWS_AS(parse_labeled("{\"dialogue_id\":\"d\"}\n"), ParseError);
  CHECK_THROWS_AS(build_report({ls("x", "A", 0, "Not-A-Label")}, tax()), DataError);

  MetricsConfig c;
  c.horizon_sentences = 3;
  c.horizon_time = std::chrono::hours(2);
  c.polarity["blame_rate"] = Polarity::kClue;
  const auto back = MetricsConfig::from_json(c.to_json());
  CHECK(back.horizon_sentences == 3);
  CHECK(back.horizon_time == std::chrono::hours(2));
  CHECK(back.polarity.at("blame_rate") == Polarity::kClue);
  CHECK(back.response_sets == c.response_sets);
  CHECK_THROWS_AS(MetricsConfig::from_json("{\"polarity\":{\"x\":\"meh\"}}"), DataError);

  const Dialogue d = Dialogue::build("dd", {chatact::testing::msg("m1", "A", 0, "Hi. Who?")});
  const auto round = parse_labeled(serialize_labeled({d}));
  CHECK(round == labeled_stream({d}));
}

TEST_CASE("reports are deterministic") {
  const auto s = fixture_stream();
  CHECK(report_json(build_report(s, tax())) == report_json(build_report(s, tax())));
}
