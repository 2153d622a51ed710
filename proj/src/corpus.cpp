#include "chatact/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/util.hpp"

namespace chatact {

using nlohmann::json;

std::string_view to_string(AnnotationSource source) {
  switch (source) {
    case AnnotationSource::kHuman: return "human";
    case AnnotationSource::kModel: return "model";
    case AnnotationSource::kCorrected: return "corrected";
  }
  return "human";
}

AnnotationSource annotation_source_from_string(std::string_view text) {
  if (text == "human") return AnnotationSource::kHuman;
  if (text == "model") return AnnotationSource::kModel;
  if (text == "corrected") return AnnotationSource::kCorrected;
  throw DataError("unknown annotation source '" + std::string(text) + "'");
}

std::size_t code_point_length(std::string_view utf8) {
  return static_cast<std::size_t>(
      std::count_if(utf8.begin(), utf8.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

namespace {

bool message_less(const Message& a, const Message& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return natural_less(a.id, b.id);
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == text.size()) break;
    pos = nl + 1;
  }
  return lines;
}

Timestamp json_timestamp(const json& v) {
  if (v.is_string()) return parse_timestamp(v.get<std::string>());
  if (v.is_number()) return timestamp_from_epoch_seconds(v.get<double>());
  throw DataError("timestamp must be a string or a number");
}

}  // namespace

Dialogue Dialogue::build(std::string id, std::vector<Message> messages) {
  Dialogue d;
  d.id_ = std::move(id);
  d.reordered_ = !std::is_sorted(messages.begin(), messages.end(), message_less);
  std::stable_sort(messages.begin(), messages.end(), message_less);

  for (std::size_t m = 0; m < messages.size(); ++m) {
    auto& msg = messages[m];
    if (msg.dialogue_id.empty()) msg.dialogue_id = d.id_;
    if (trim(msg.text).empty()) throw DataError("message '" + msg.id + "' has empty text");
    if (!d.message_index_.emplace(msg.id, m).second) throw DataError("duplicate message id '" + msg.id + "'");

    const auto spans = split_sentences(msg.text);
    for (std::size_t k = 0; k < spans.size(); ++k) {
      Sentence s;
      s.id = msg.id + "#" + std::to_string(k);
      s.message_id = msg.id;
      s.index_in_message = k;
      s.index_in_dialogue = d.sentences_.size();
      s.text = spans[k].text;
      s.char_offset = spans[k].offset;
      s.is_code_block = spans[k].is_code_block;
      s.is_emoticon = spans[k].is_emoticon;
      d.sentence_index_.emplace(s.id, d.sentences_.size());
      d.sentences_.push_back(std::move(s));
      d.sentence_message_.push_back(m);
    }
    d.message_first_.push_back(d.sentences_.size());
  }
  d.messages_ = std::move(messages);
  return d;
}

std::optional<std::size_t> Dialogue::find_sentence(std::string_view sentence_id) const {
  auto it = sentence_index_.find(std::string(sentence_id));
  if (it == sentence_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Dialogue::find_message(std::string_view message_id) const {
  auto it = message_index_.find(std::string(message_id));
  if (it == message_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Dialogue> parse_transcript(std::string_view jsonl, const std::string& default_dialogue_id) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Message>> grouped;

  const auto lines = split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (trim(lines[i]).empty()) continue;
    json rec;
    try {
      rec = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line_no, "record must be a JSON object");
    try {
      Message msg;
      if (!rec.contains("ts")) throw DataError("missing field 'ts'");
      msg.timestamp = json_timestamp(rec["ts"]);
      if (!rec.contains("speaker") || !rec["speaker"].is_string()) throw DataError("missing string field 'speaker'");
      msg.speaker = rec["speaker"].get<std::string>();
      if (trim(msg.speaker).empty()) throw DataError("empty speaker");
      if (!rec.contains("text") || !rec["text"].is_string()) throw DataError("missing string field 'text'");
      msg.text = rec["text"].get<std::string>();
      if (trim(msg.text).empty()) throw DataError("empty text");
      msg.dialogue_id = rec.value("dialogue_id", default_dialogue_id);
      msg.id = rec.contains("id") ? rec["id"].get<std::string>() : msg.dialogue_id + ":" + std::to_string(line_no);
      if (!grouped.count(msg.dialogue_id)) order.push_back(msg.dialogue_id);
      grouped[msg.dialogue_id].push_back(std::move(msg));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }

  std::vector<Dialogue> out;
  out.reserve(order.size());
  for (const auto& id : order) out.push_back(Dialogue::build(id, std::move(grouped[id])));
  return out;
}

std::string serialize_transcript(const Dialogue& dialogue) {
  std::string out;
  for (const auto& m : dialogue.messages()) {
    json rec = {{"id", m.id},
                {"dialogue_id", m.dialogue_id},
                {"ts", format_rfc3339(m.timestamp)},
                {"speaker", m.speaker},
                {"text", m.text}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> parse_slack_user_map(std::string_view text) {
  std::map<std::string, std::string> names;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("user map: ") + e.what());
  }
  if (doc.is_object()) {
    for (const auto& [id, name] : doc.items()) {
      if (!name.is_string()) throw DataError("user map: value for '" + id + "' is not a string");
      names[id] = name.get<std::string>();
    }
  } else if (doc.is_array()) {
    for (const auto& user : doc) {
      if (!user.is_object() || !user.contains("id")) continue;
      std::string name;
      if (user.contains("profile") && user["profile"].is_object()) {
        name = user["profile"].value("display_name", "");
      }
      if (name.empty()) name = user.value("real_name", "");
      if (name.empty()) name = user.value("name", "");
      if (!name.empty()) names[user["id"].get<std::string>()] = name;
    }
  } else {
    throw DataError("user map must be a JSON object or array");
  }
  return names;
}

namespace {

const std::set<std::string, std::less<>> kSystemSubtypes = {
    "channel_join",    "channel_leave",   "channel_topic", "channel_purpose", "channel_name",
    "channel_archive", "channel_unarchive", "group_join",  "group_leave",     "group_topic",
    "group_purpose",   "group_name",      "pinned_item",   "unpinned_item",   "bot_add",
    "bot_remove",      "reminder_add",    "tombstone",     "channel_convert_to_private"};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// <@U123> mentions become @name; HTML entities Slack escapes are restored.
std::string normalize_slack_text(std::string text, const std::map<std::string, std::string>& names) {
  std::size_t pos = 0;
  while ((pos = text.find("<@", pos)) != std::string::npos) {
    const auto close = text.find('>', pos);
    if (close == std::string::npos) break;
    std::string user = text.substr(pos + 2, close - pos - 2);
    if (auto bar = user.find('|'); bar != std::string::npos) user = user.substr(0, bar);
    auto it = names.find(user);
    const std::string mention = "@" + (it != names.end() ? it->second : user);
    text.replace(pos, close - pos + 1, mention);
    pos += mention.size();
  }
  text = replace_all(std::move(text), "&lt;", "<");
  text = replace_all(std::move(text), "&gt;", ">");
  return replace_all(std::move(text), "&amp;", "&");
}

}  // namespace

SlackImport parse_slack_export(const std::vector<std::string>& day_files,
                               const std::map<std::string, std::string>& user_names,
                               const std::string& dialogue_id) {
  SlackImport result;
  std::vector<Message> messages;
  std::size_t total = 0;

  for (std::size_t f = 0; f < day_files.size(); ++f) {
    json doc;
    try {
      doc = json::parse(day_files[f]);
    } catch (const json::parse_error& e) {
      throw DataError("slack export file " + std::to_string(f + 1) + ": " + e.what());
    }
    if (!doc.is_array()) throw DataError("slack export file " + std::to_string(f + 1) + " is not a JSON array");

    for (const auto& rec : doc) {
      ++total;
      if (!rec.is_object() || !rec.contains("ts") || !rec["ts"].is_string()) {
        ++result.rejected;
        continue;
      }
      const std::string subtype = rec.value("subtype", "");
      const std::string text = rec.contains("text") && rec["text"].is_string() ? rec["text"].get<std::string>() : "";
      if (kSystemSubtypes.count(subtype) || (!subtype.empty() && trim(text).empty())) {
        ++result.dropped;
        continue;
      }
      if (!rec.contains("user") || !rec["user"].is_string()) {
        ++result.rejected;
        continue;
      }
      if (trim(text).empty()) {
        ++result.dropped;
        continue;
      }
      Message msg;
      const std::string ts = rec["ts"].get<std::string>();
      try {
        msg.timestamp = parse_timestamp(ts);
      } catch (const DataError&) {
        ++result.rejected;
        continue;
      }
      const std::string user = rec["user"].get<std::string>();
      auto name = user_names.find(user);
      msg.speaker = name != user_names.end() ? name->second : user;
      msg.text = normalize_slack_text(text, user_names);
      msg.dialogue_id = dialogue_id;

      // Ids derive from record content so input order never changes them.
      msg.id = rec.contains("client_msg_id") && rec["client_msg_id"].is_string()
                   ? rec["client_msg_id"].get<std::string>()
                   : dialogue_id + ":" + ts + ":" + user;
      messages.push_back(std::move(msg));
    }
  }

  // Colliding ids all take a text digest, then a counter for exact repeats.
  std::map<std::string, std::size_t> base_count;
  for (const auto& m : messages) ++base_count[m.id];
  for (auto& m : messages) {
    if (base_count[m.id] < 2) continue;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(m.text)));
    m.id += std::string(":") + buf;
  }
  std::set<std::string> used_ids;
  for (auto& m : messages) {
    const std::string base = m.id;
    for (int k = 2; used_ids.count(m.id); ++k) m.id = base + ":" + std::to_string(k);
    used_ids.insert(m.id);
  }

  if (total > 0 && result.rejected == total) {
    throw DataError("slack export: all " + std::to_string(total) + " records rejected (missing ts or user)");
  }
  result.dialogue = Dialogue::build(dialogue_id, std::move(messages));
  return result;
}

std::vector<AnnotationRecord> parse_annotations(std::string_view jsonl) {
  std::vector<AnnotationRecord> records;
  const auto lines = split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (trim(lines[i]).empty()) continue;
    try {
      const json rec = json::parse(lines[i]);
      if (!rec.is_object()) throw DataError("record must be a JSON object");
      AnnotationRecord r;
      r.sentence_id = rec.at("sentence_id").get<std::string>();
      r.label = rec.at("label").get<std::string>();
      r.annotator = rec.value("annotator", "");
      const bool has_start = rec.contains("char_start") && !rec["char_start"].is_null();
      const bool has_end = rec.contains("char_end") && !rec["char_end"].is_null();
      if (has_start != has_end) throw DataError("char_start and char_end must be given together");
      if (has_start) {
        r.char_start = rec["char_start"].get<std::size_t>();
        r.char_end = rec["char_end"].get<std::size_t>();
      }
      if (!rec.contains("created_at")) throw DataError("missing field 'created_at'");
      r.created_at = json_timestamp(rec["created_at"]);
      r.source = annotation_source_from_string(rec.value("source", "human"));
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const DataError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return records;
}

std::string serialize_annotation(const AnnotationRecord& r) {
  json rec = {{"sentence_id", r.sentence_id},
              {"label", r.label},
              {"annotator", r.annotator},
              {"created_at", format_rfc3339(r.created_at)},
              {"source", to_string(r.source)}};
  if (r.char_start) {
    rec["char_start"] = *r.char_start;
    rec["char_end"] = *r.char_end;
  }
  return rec.dump();
}

namespace {

struct Candidate {
  const AnnotationRecord* record;
  std::size_t order;  // position in the record log
  std::size_t start;
  std::size_t end;
};

// Later created_at wins; equal times fall back to log order.
bool newer(const Candidate& a, const Candidate& b) {
  return std::tie(a.record->created_at, a.order) > std::tie(b.record->created_at, b.order);
}

bool outranks(const Candidate& a, const Candidate& b) {
  const bool ac = a.record->source == AnnotationSource::kCorrected;
  const bool bc = b.record->source == AnnotationSource::kCorrected;
  if (ac != bc) return ac;
  return newer(a, b);
}

void resolve_sentence(Sentence& sentence, const std::vector<Candidate>& candidates) {
  sentence.gold_label.reset();
  sentence.gold_source.reset();
  sentence.predicted_label.reset();

  const Candidate* predicted = nullptr;
  std::map<std::pair<std::size_t, std::size_t>, const Candidate*> by_span;
  for (const auto& c : candidates) {
    if (c.record->source == AnnotationSource::kModel) {
      if (!predicted || newer(c, *predicted)) predicted = &c;
      continue;
    }
    auto& slot = by_span[{c.start, c.end}];
    if (!slot || outranks(c, *slot)) slot = &c;
  }
  if (predicted) sentence.predicted_label = predicted->record->label;

  const Candidate* gold = nullptr;
  for (const auto& [span, c] : by_span) {
    if (!gold) {
      gold = c;
      continue;
    }
    const std::size_t len = c->end - c->start;
    const std::size_t best = gold->end - gold->start;
    // Iteration is ordered by start, so ties on length keep the earliest span.
    if (len > best) gold = c;
  }
  if (gold) {
    sentence.gold_label = gold->record->label;
    sentence.gold_source = gold->record->source;
  }
}

}  // namespace

std::vector<Dialogue> attach_annotations(const std::vector<Dialogue>& dialogues,
                                         const std::vector<AnnotationRecord>& records) {
  std::vector<Dialogue> out = dialogues;
  // candidates[d][s]
  std::vector<std::vector<std::vector<Candidate>>> candidates(out.size());
  for (std::size_t d = 0; d < out.size(); ++d) candidates[d].resize(out[d].sentences().size());

  std::vector<std::string> dangling;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    bool resolved = false;
    for (std::size_t d = 0; d < out.size() && !resolved; ++d) {
      const auto& dialogue = out[d];
      if (auto s = dialogue.find_sentence(r.sentence_id)) {
        const auto len = code_point_length(dialogue.sentences()[*s].text);
        std::size_t start = 0, end = len;
        if (r.char_start) {
          start = *r.char_start;
          end = *r.char_end;
          if (!(start < end && end <= len)) {
            throw DataError("annotation span [" + std::to_string(start) + ", " + std::to_string(end) +
                            ") is outside sentence '" + r.sentence_id + "' of length " + std::to_string(len));
          }
        }
        candidates[d][*s].push_back({&r, i, start, end});
        resolved = true;
      } else if (auto m = dialogue.find_message(r.sentence_id)) {
        if (r.char_start) throw DataError("block annotation on message '" + r.sentence_id + "' cannot carry a span");
        const auto first = dialogue.first_sentence(*m);
        const auto count = dialogue.sentence_count(*m);
        for (std::size_t s = first; s < first + count; ++s) {
          candidates[d][s].push_back({&r, i, 0, code_point_length(dialogue.sentences()[s].text)});
        }
        resolved = true;
      }
    }
    if (!resolved) dangling.push_back(r.sentence_id);
  }
  if (!dangling.empty()) {
    std::sort(dangling.begin(), dangling.end());
    dangling.erase(std::unique(dangling.begin(), dangling.end()), dangling.end());
    throw DanglingReferenceError(std::move(dangling));
  }

  for (std::size_t d = 0; d < out.size(); ++d) {
    auto& sentences = out[d].mutable_sentences();
    for (std::size_t s = 0; s < sentences.size(); ++s) resolve_sentence(sentences[s], candidates[d][s]);
  }
  return out;
}

Dialogue attach_annotations(const Dialogue& dialogue, const std::vector<AnnotationRecord>& records) {
  return attach_annotations(std::vector<Dialogue>{dialogue}, records).front();
}

}  // namespace chatact
