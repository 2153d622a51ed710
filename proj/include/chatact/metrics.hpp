#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chatact/corpus.hpp"
#include "chatact/timeutil.hpp"

namespace chatact {

class Taxonomy;

// One sentence of a labeled stream as the metrics see it.
struct LabeledSentence {
  std::string id;
  std::string dialogue_id;
  std::string speaker;
  Timestamp timestamp{};
  std::optional<std::string> label;  // effective label, uncollapsed
  std::string text;

  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

// Effective labels (corrected > human > predicted) of every sentence.
std::vector<LabeledSentence> labeled_stream(const std::vector<Dialogue>& dialogues);

// JSON lines, one sentence per line: {dialogue_id, sentence_id, speaker, ts,
// text, label, gold_label, predicted_label}. `label` is the effective label.
std::string serialize_labeled(const std::vector<Dialogue>& dialogues);
std::vector<LabeledSentence> parse_labeled(std::string_view jsonl);

enum class Polarity { kPositive, kNegative, kClue };
std::string_view to_string(Polarity polarity);

struct MetricsConfig {
  // Initiator root -> acceptable responder labels (matched ancestor-or-self
  // on collapsed labels).
  std::map<std::string, std::vector<std::string>> response_sets = {
      {"Query", {"Inform-InResponse", "Inform", "Acknowledge", "Reject"}},
      {"Request", {"Acknowledge", "Reject"}},
      {"Assign", {"Acknowledge", "Reject"}},
      {"Propose", {"Acknowledge", "Reject", "Query"}},
  };
  std::size_t horizon_sentences = 10;
  Microseconds horizon_time = std::chrono::hours(24);
  // Principle -> metric names. A metric may serve several principles.
  std::map<std::string, std::vector<std::string>> principles = {
      {"communication", {"loop_closure_rate", "clarification_rate", "median_response_latency"}},
      {"coordination", {"assignment_uptake_rate", "assignment_decline_rate", "median_response_latency"}},
      {"focus_on_goals", {"loop_closure_rate", "assignment_uptake_rate"}},
      {"positive_collaborative_attitude", {"comradery_rate", "frustration_rate", "blame_rate"}},
      {"supportiveness", {"appreciation_rate", "offer_assistance_rate"}},
      {"adaptability", {"clarification_rate", "assignment_decline_rate"}},
  };
  std::map<std::string, Polarity> polarity = {
      {"loop_closure_rate", Polarity::kPositive},      {"clarification_rate", Polarity::kNegative},
      {"assignment_uptake_rate", Polarity::kPositive}, {"assignment_decline_rate", Polarity::kClue},
      {"median_response_latency", Polarity::kClue},    {"comradery_rate", Polarity::kPositive},
      {"appreciation_rate", Polarity::kPositive},      {"offer_assistance_rate", Polarity::kPositive},
      {"frustration_rate", Polarity::kClue},           {"blame_rate", Polarity::kNegative},
  };
  // Ratios over fewer than this many items are flagged low-signal.
  std::size_t low_signal_denominator = 3;

  static MetricsConfig from_json(std::string_view json);
  std::string to_json() const;
};

struct ResponsePair {
  std::string initiator_sentence_id;
  std::optional<std::string> responder_sentence_id;
  std::string initiator_kind;  // Query, Request, Assign or Propose
  std::string initiator_speaker;
  std::optional<std::string> responder_speaker;
  std::optional<std::string> response_kind;  // collapsed responder label
  std::optional<Microseconds> latency;
  bool closed = false;
  // Sentences whose labels decided which responders were still free when
  // this pair was matched (transitively through earlier pairs).
  std::vector<std::string> depends_on;
};

// Greedy earliest-first matching inside each dialogue of the stream.
// Unlabeled sentences neither initiate nor respond.
std::vector<ResponsePair> detect_pairs(const std::vector<LabeledSentence>& stream, const Taxonomy& taxonomy,
                                       const MetricsConfig& config = {});

enum class MetricUnit { kRatio, kPer100, kSeconds };

struct Metric {
  std::string name;
  MetricUnit unit = MetricUnit::kRatio;
  std::optional<double> value;  // nullopt when undefined
  // Ratio: numerator / denominator. Per-100: 100 * numerator / labeled
  // sentences. Seconds: median latency of the listed pairs.
  std::vector<std::string> numerator_ids;
  std::vector<std::string> denominator_ids;
  std::vector<std::size_t> pairs;  // indices into MetricsReport::pairs
  Polarity polarity = Polarity::kClue;
  std::vector<std::string> principles;
  bool low_signal = false;
};

struct LabelCount {
  std::size_t count = 0;
  std::optional<double> per_100;
};

struct Frequencies {
  std::map<std::string, LabelCount> labels;  // collapsed label -> count
  std::size_t sentences = 0;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
};

struct MetricsReport {
  std::string scope = "team";  // "team" or "speaker:<name>"
  std::optional<Timestamp> window_start;
  std::optional<Timestamp> window_end;
  Frequencies frequencies;
  std::vector<std::string> labeled_sentence_ids;
  std::vector<ResponsePair> pairs;
  std::vector<Metric> metrics;                 // fixed order
  std::vector<MetricsReport> speakers;         // per-speaker reports, team scope only

  const Metric& metric(std::string_view name) const;
  // Every sentence id the metric's value depends on.
  std::vector<std::string> evidence(const Metric& metric) const;
};

MetricsReport build_report(const std::vector<LabeledSentence>& stream, const Taxonomy& taxonomy,
                           const MetricsConfig& config = {});

std::string report_json(const MetricsReport& report);
std::string report_text(const MetricsReport& report);

}  // namespace chatact
