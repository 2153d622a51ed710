#include "chatact/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/taxonomy.hpp"
#include "chatact/util.hpp"

namespace chatact {
namespace {

using nlohmann::json;

constexpr const char* kMetricOrder[] = {
    "loop_closure_rate", "clarification_rate", "assignment_uptake_rate", "assignment_decline_rate",
    "median_response_latency", "comradery_rate", "appreciation_rate", "frustration_rate", "blame_rate",
    "offer_assistance_rate"};

// Per-100 metrics and the collapsed label each counts.
const std::vector<std::pair<std::string, std::string>> kSocialRates = {
    {"comradery_rate", "Social-Comradery"},   {"appreciation_rate", "Social-Appreciation"},
    {"frustration_rate", "Social-Frustration"}, {"blame_rate", "Social-Blame-Person"},
    {"offer_assistance_rate", "Propose-OfferAssistance"}};

std::string_view unit_name(MetricUnit unit) {
  switch (unit) {
    case MetricUnit::kRatio: return "ratio";
    case MetricUnit::kPer100: return "per_100_sentences";
    case MetricUnit::kSeconds: return "seconds";
  }
  return "ratio";
}

Polarity polarity_from_string(std::string_view text) {
  if (text == "positive") return Polarity::kPositive;
  if (text == "negative") return Polarity::kNegative;
  if (text == "clue") return Polarity::kClue;
  throw DataError("unknown polarity '" + std::string(text) + "'");
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Collapsed {
  std::vector<std::optional<std::string>> labels;  // collapsed effective label per stream index
};

Collapsed collapse_all(const std::vector<LabeledSentence>& stream, const Taxonomy& taxonomy) {
  Collapsed c;
  c.labels.reserve(stream.size());
  for (const auto& s : stream) {
    if (s.label) {
      c.labels.push_back(taxonomy.collapse(*s.label));
    } else {
      c.labels.emplace_back();
    }
  }
  return c;
}

bool matches_any(const Taxonomy& taxonomy, const std::vector<std::string>& accepted, const std::string& label) {
  return std::any_of(accepted.begin(), accepted.end(),
                     [&](const std::string& a) { return taxonomy.is_ancestor_or_self(a, label); });
}

std::optional<double> median_seconds(std::vector<std::int64_t> us) {
  if (us.empty()) return std::nullopt;
  std::sort(us.begin(), us.end());
  const std::size_t n = us.size();
  const double mid = n % 2 ? static_cast<double>(us[n / 2])
                           : (static_cast<double>(us[n / 2 - 1]) + static_cast<double>(us[n / 2])) / 2.0;
  return mid / 1e6;
}

// Builds the ten metrics over a sentence subset (`in_scope`) and a pair
// subset, with `initiated` / `responded` selecting which pairs count as the
// scope's own initiations and responses.
MetricsReport compute(const std::vector<LabeledSentence>& stream, const Collapsed& collapsed,
                      const std::vector<std::size_t>& in_scope, std::vector<ResponsePair> pairs,
                      const std::vector<bool>& initiated, const std::vector<bool>& responded,
                      const Taxonomy& taxonomy, const MetricsConfig& config) {
  MetricsReport r;
  r.pairs = std::move(pairs);
  auto& f = r.frequencies;
  f.sentences = in_scope.size();
  for (auto i : in_scope) {
    const auto& s = stream[i];
    if (!r.window_start || s.timestamp < *r.window_start) r.window_start = s.timestamp;
    if (!r.window_end || s.timestamp > *r.window_end) r.window_end = s.timestamp;
    if (!collapsed.labels[i]) {
      ++f.unlabeled;
      continue;
    }
    ++f.labeled;
    ++f.labels[*collapsed.labels[i]].count;
    r.labeled_sentence_ids.push_back(s.id);
  }
  for (auto& [label, lc] : f.labels) {
    lc.per_100 = f.labeled ? std::optional<double>(100.0 * static_cast<double>(lc.count) / f.labeled) : std::nullopt;
  }

  auto make = [&](const std::string& name, MetricUnit unit) {
    Metric m;
    m.name = name;
    m.unit = unit;
    const auto pol = config.polarity.find(name);
    m.polarity = pol == config.polarity.end() ? Polarity::kClue : pol->second;
    for (const auto& [principle, names] : config.principles) {
      if (std::find(names.begin(), names.end(), name) != names.end()) m.principles.push_back(principle);
    }
    return m;
  };
  auto finish_ratio = [&](Metric& m) {
    m.value = ratio(m.numerator_ids.size(), m.denominator_ids.size());
    m.low_signal = !m.value || m.denominator_ids.size() < config.low_signal_denominator;
  };

  Metric loop = make("loop_closure_rate", MetricUnit::kRatio);
  Metric uptake = make("assignment_uptake_rate", MetricUnit::kRatio);
  Metric decline = make("assignment_decline_rate", MetricUnit::kRatio);
  Metric latency = make("median_response_latency", MetricUnit::kSeconds);
  std::vector<std::int64_t> latencies;
  for (std::size_t k = 0; k < r.pairs.size(); ++k) {
    const auto& p = r.pairs[k];
    if (initiated[k] && (p.initiator_kind == "Query" || p.initiator_kind == "Request")) {
      loop.pairs.push_back(k);
      loop.denominator_ids.push_back(p.initiator_sentence_id);
      if (p.closed) loop.numerator_ids.push_back(p.initiator_sentence_id);
    }
    if (initiated[k] && p.initiator_kind == "Assign") {
      uptake.pairs.push_back(k);
      decline.pairs.push_back(k);
      uptake.denominator_ids.push_back(p.initiator_sentence_id);
      decline.denominator_ids.push_back(p.initiator_sentence_id);
      if (p.closed && taxonomy.root(*p.response_kind) == "Acknowledge") {
        uptake.numerator_ids.push_back(p.initiator_sentence_id);
      }
      if (p.closed && taxonomy.root(*p.response_kind) == "Reject") {
        decline.numerator_ids.push_back(p.initiator_sentence_id);
      }
    }
    if (responded[k] && p.closed) {
      latency.pairs.push_back(k);
      latencies.push_back(p.latency->count());
    }
  }
  finish_ratio(loop);
  finish_ratio(uptake);
  finish_ratio(decline);
  latency.value = median_seconds(latencies);
  latency.low_signal = !latency.value || latencies.size() < config.low_signal_denominator;

  Metric clar = make("clarification_rate", MetricUnit::kRatio);
  for (auto i : in_scope) {
    const auto& label = collapsed.labels[i];
    if (!label || taxonomy.root(*label) != "Query") continue;
    clar.denominator_ids.push_back(stream[i].id);
    if (taxonomy.is_ancestor_or_self("Query-For-Clarification", *label)) clar.numerator_ids.push_back(stream[i].id);
  }
  finish_ratio(clar);

  std::map<std::string, Metric> by_name;
  for (const auto& [name, target] : kSocialRates) {
    Metric m = make(name, MetricUnit::kPer100);
    for (auto i : in_scope) {
      const auto& label = collapsed.labels[i];
      if (label && taxonomy.is_ancestor_or_self(target, *label)) m.numerator_ids.push_back(stream[i].id);
    }
    if (f.labeled) m.value = 100.0 * static_cast<double>(m.numerator_ids.size()) / static_cast<double>(f.labeled);
    m.low_signal = !m.value || m.numerator_ids.empty();
    by_name[name] = std::move(m);
  }
  by_name[loop.name] = std::move(loop);
  by_name[clar.name] = std::move(clar);
  by_name[uptake.name] = std::move(uptake);
  by_name[decline.name] = std::move(decline);
  by_name[latency.name] = std::move(latency);
  for (const char* name : kMetricOrder) r.metrics.push_back(std::move(by_name[name]));
  return r;
}

json pair_json(const ResponsePair& p) {
  json j = {{"initiator", p.initiator_sentence_id},
            {"initiator_kind", p.initiator_kind},
            {"initiator_speaker", p.initiator_speaker},
            {"closed", p.closed}};
  j["responder"] = p.responder_sentence_id ? json(*p.responder_sentence_id) : json(nullptr);
  j["responder_speaker"] = p.responder_speaker ? json(*p.responder_speaker) : json(nullptr);
  j["response_kind"] = p.response_kind ? json(*p.response_kind) : json(nullptr);
  j["latency_seconds"] = p.latency ? json(static_cast<double>(p.latency->count()) / 1e6) : json(nullptr);
  j["depends_on"] = p.depends_on;
  return j;
}

json report_to_json(const MetricsReport& r) {
  json freq = json::object();
  for (const auto& [label, lc] : r.frequencies.labels) {
    freq[label] = {{"count", lc.count}, {"per_100", optional_number(lc.per_100)}};
  }
  json metrics = json::array();
  for (const auto& m : r.metrics) {
    json jm = {{"name", m.name},
               {"unit", std::string(unit_name(m.unit))},
               {"value", optional_number(m.value)},
               {"polarity", std::string(to_string(m.polarity))},
               {"principles", m.principles},
               {"low_signal", m.low_signal},
               {"numerator_ids", m.numerator_ids},
               {"pairs", m.pairs}};
    if (m.unit == MetricUnit::kRatio) jm["denominator_ids"] = m.denominator_ids;
    if (m.unit == MetricUnit::kPer100) jm["denominator"] = "labeled_sentence_ids";
    metrics.push_back(std::move(jm));
  }
  json pairs = json::array();
  for (const auto& p : r.pairs) pairs.push_back(pair_json(p));
  json out = {{"scope", r.scope},
              {"window_of_analysis",
               {{"start", r.window_start ? json(format_rfc3339(*r.window_start)) : json(nullptr)},
                {"end", r.window_end ? json(format_rfc3339(*r.window_end)) : json(nullptr)}}},
              {"sentences", r.frequencies.sentences},
              {"labeled", r.frequencies.labeled},
              {"unlabeled", r.frequencies.unlabeled},
              {"label_frequencies", freq},
              {"metrics", metrics},
              {"pairs", pairs},
              {"labeled_sentence_ids", r.labeled_sentence_ids}};
  if (r.scope == "team") {
    json speakers = json::array();
    for (const auto& s : r.speakers) speakers.push_back(report_to_json(s));
    out["speakers"] = speakers;
    out["note"] = "principle grouping and polarity tags are configurable; no composite score is computed";
  }
  return out;
}

}  // namespace

std::string_view to_string(Polarity polarity) {
  switch (polarity) {
    case Polarity::kPositive: return "positive";
    case Polarity::kNegative: return "negative";
    case Polarity::kClue: return "clue";
  }
  return "clue";
}

std::vector<LabeledSentence> labeled_stream(const std::vector<Dialogue>& dialogues) {
  std::vector<LabeledSentence> out;
  for (const auto& d : dialogues) {
    for (std::size_t i = 0; i < d.sentences().size(); ++i) {
      const auto& s = d.sentences()[i];
      const auto& m = d.message_of(i);
      out.push_back({s.id, d.id(), m.speaker, m.timestamp, s.effective_label(), s.text});
    }
  }
  return out;
}

std::string serialize_labeled(const std::vector<Dialogue>& dialogues) {
  std::string out;
  for (const auto& d : dialogues) {
    for (std::size_t i = 0; i < d.sentences().size(); ++i) {
      const auto& s = d.sentences()[i];
      const auto& m = d.message_of(i);
      auto opt = [](const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); };
      json j = {{"dialogue_id", d.id()},     {"sentence_id", s.id},
                {"speaker", m.speaker},      {"ts", format_rfc3339(m.timestamp)},
                {"text", s.text},            {"label", opt(s.effective_label())},
                {"gold_label", opt(s.gold_label)}, {"predicted_label", opt(s.predicted_label)}};
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<LabeledSentence> parse_labeled(std::string_view jsonl) {
  std::vector<LabeledSentence> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto nl = jsonl.find('\n', pos);
    const auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      LabeledSentence s;
      s.dialogue_id = j.at("dialogue_id").get<std::string>();
      s.id = j.at("sentence_id").get<std::string>();
      s.speaker = j.at("speaker").get<std::string>();
      s.timestamp = parse_timestamp(j.at("ts").get<std::string>());
      s.text = j.value("text", "");
      if (j.contains("label") && !j["label"].is_null()) s.label = j["label"].get<std::string>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const DataError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

MetricsConfig MetricsConfig::from_json(std::string_view text) {
  MetricsConfig c;
  try {
    const json j = json::parse(text);
    if (j.contains("response_sets")) c.response_sets = j["response_sets"].get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("horizon_sentences")) c.horizon_sentences = j["horizon_sentences"].get<std::size_t>();
    if (j.contains("horizon_time")) c.horizon_time = parse_duration(j["horizon_time"].get<std::string>());
    if (j.contains("principles")) c.principles = j["principles"].get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("polarity")) {
      c.polarity.clear();
      for (const auto& [name, v] : j["polarity"].items()) c.polarity[name] = polarity_from_string(v.get<std::string>());
    }
    if (j.contains("low_signal_denominator")) c.low_signal_denominator = j["low_signal_denominator"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("metrics config: ") + e.what());
  }
  return c;
}

std::string MetricsConfig::to_json() const {
  json pol = json::object();
  for (const auto& [name, p] : polarity) pol[name] = std::string(chatact::to_string(p));
  const json j = {{"response_sets", response_sets},
                  {"horizon_sentences", horizon_sentences},
                  {"horizon_time", std::to_string(horizon_time.count() / 1000000) + "s"},
                  {"principles", principles},
                  {"polarity", pol},
                  {"low_signal_denominator", low_signal_denominator}};
  return j.dump(2);
}

std::vector<ResponsePair> detect_pairs(const std::vector<LabeledSentence>& stream, const Taxonomy& taxonomy,
                                       const MetricsConfig& config) {
  const Collapsed collapsed = collapse_all(stream, taxonomy);
  std::vector<ResponsePair> pairs;
  std::vector<std::set<std::string>> deps;
  std::unordered_map<std::size_t, std::size_t> consumed_by;  // stream index -> pair index

  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& label = collapsed.labels[i];
    if (!label) continue;
    const auto rs = config.response_sets.find(taxonomy.root(*label));
    if (rs == config.response_sets.end()) continue;

    ResponsePair p;
    p.initiator_sentence_id = stream[i].id;
    p.initiator_kind = rs->first;
    p.initiator_speaker = stream[i].speaker;
    std::set<std::string> d;
    for (std::size_t j = i + 1; j < stream.size() && j - i <= config.horizon_sentences; ++j) {
      const auto& c = stream[j];
      if (c.dialogue_id != stream[i].dialogue_id) break;
      if (c.timestamp - stream[i].timestamp > config.horizon_time) break;
      d.insert(c.id);
      const auto& cl = collapsed.labels[j];
      if (!cl || c.speaker == p.initiator_speaker || !matches_any(taxonomy, rs->second, *cl)) continue;
      if (const auto used = consumed_by.find(j); used != consumed_by.end()) {
        d.insert(deps[used->second].begin(), deps[used->second].end());
        d.insert(pairs[used->second].initiator_sentence_id);
        continue;
      }
      consumed_by[j] = pairs.size();
      p.responder_sentence_id = c.id;
      p.responder_speaker = c.speaker;
      p.response_kind = *cl;
      p.latency = std::chrono::duration_cast<Microseconds>(c.timestamp - stream[i].timestamp);
      p.closed = true;
      break;
    }
    d.erase(p.initiator_sentence_id);
    if (p.responder_sentence_id) d.erase(*p.responder_sentence_id);
    p.depends_on.assign(d.begin(), d.end());
    deps.push_back(std::move(d));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

const Metric& MetricsReport::metric(std::string_view name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  throw DataError("no metric named '" + std::string(name) + "'");
}

std::vector<std::string> MetricsReport::evidence(const Metric& m) const {
  std::set<std::string> ids(m.numerator_ids.begin(), m.numerator_ids.end());
  ids.insert(m.denominator_ids.begin(), m.denominator_ids.end());
  if (m.unit == MetricUnit::kPer100) ids.insert(labeled_sentence_ids.begin(), labeled_sentence_ids.end());
  for (auto k : m.pairs) {
    const auto& p = pairs[k];
    ids.insert(p.initiator_sentence_id);
    if (p.responder_sentence_id) ids.insert(*p.responder_sentence_id);
    ids.insert(p.depends_on.begin(), p.depends_on.end());
  }
  return {ids.begin(), ids.end()};
}

MetricsReport build_report(const std::vector<LabeledSentence>& stream, const Taxonomy& taxonomy,
                           const MetricsConfig& config) {
  const Collapsed collapsed = collapse_all(stream, taxonomy);
  auto pairs = detect_pairs(stream, taxonomy, config);

  std::vector<std::size_t> all(stream.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::vector<bool> every(pairs.size(), true);
  MetricsReport team = compute(stream, collapsed, all, pairs, every, every, taxonomy, config);

  std::set<std::string> speakers;
  for (const auto& s : stream) speakers.insert(s.speaker);
  for (const auto& who : speakers) {
    std::vector<std::size_t> mine;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (stream[i].speaker == who) mine.push_back(i);
    }
    std::vector<ResponsePair> involved;
    std::vector<bool> initiated, responded;
    for (const auto& p : pairs) {
      const bool init = p.initiator_speaker == who;
      const bool resp = p.responder_speaker == who;
      if (!init && !resp) continue;
      involved.push_back(p);
      initiated.push_back(init);
      responded.push_back(resp);
    }
    MetricsReport r = compute(stream, collapsed, mine, std::move(involved), initiated, responded, taxonomy, config);
    r.scope = "speaker:" + who;
    team.speakers.push_back(std::move(r));
  }
  return team;
}

std::string report_json(const MetricsReport& report) { return report_to_json(report).dump(2); }

std::string report_text(const MetricsReport& report) {
  std::string out;
  char line[200];
  auto value_text = [](const Metric& m) {
    if (!m.value) return std::string("undefined");
    char buf[64];
    if (m.unit == MetricUnit::kRatio) {
      std::snprintf(buf, sizeof buf, "%.3f (%zu/%zu)", *m.value, m.numerator_ids.size(), m.denominator_ids.size());
    } else if (m.unit == MetricUnit::kPer100) {
      std::snprintf(buf, sizeof buf, "%.2f per 100 (%zu)", *m.value, m.numerator_ids.size());
    } else {
      std::snprintf(buf, sizeof buf, "%.1fs over %zu pairs", *m.value, m.pairs.size());
    }
    return std::string(buf);
  };
  auto section = [&](const MetricsReport& r) {
    std::snprintf(line, sizeof line, "== %s: %zu sentences, %zu labeled, %zu unlabeled\n", r.scope.c_str(),
                  r.frequencies.sentences, r.frequencies.labeled, r.frequencies.unlabeled);
    out += line;
    for (const auto& m : r.metrics) {
      std::snprintf(line, sizeof line, "  %-26s %-28s %-9s%s\n", m.name.c_str(), value_text(m).c_str(),
                    std::string(to_string(m.polarity)).c_str(), m.low_signal ? " low-signal" : "");
      out += line;
    }
  };
  section(report);
  out += "  label frequencies:\n";
  for (const auto& [label, lc] : report.frequencies.labels) {
    std::snprintf(line, sizeof line, "    %-28s %6zu  %6.2f per 100\n", label.c_str(), lc.count, lc.per_100.value_or(0));
    out += line;
  }
  for (const auto& s : report.speakers) section(s);
  return out;
}

}  // namespace chatact
