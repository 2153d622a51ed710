#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chatact/timeutil.hpp"

namespace chatact {

class Taxonomy;

struct Message {
  std::string id;
  std::string speaker;
  Timestamp timestamp;
  std::string text;
  std::string dialogue_id;

  friend bool operator==(const Message&, const Message&) = default;
};

enum class AnnotationSource { kHuman, kModel, kCorrected };

std::string_view to_string(AnnotationSource source);
AnnotationSource annotation_source_from_string(std::string_view text);

struct Sentence {
  std::string id;
  std::string message_id;
  std::size_t index_in_message = 0;
  std::size_t index_in_dialogue = 0;
  std::string text;
  std::size_t char_offset = 0;  // byte offset of `text` inside the message text
  bool is_code_block = false;
  bool is_emoticon = false;
  std::optional<std::string> gold_label;
  std::optional<AnnotationSource> gold_source;
  std::optional<std::string> predicted_label;

  // corrected > human > predicted.
  const std::optional<std::string>& effective_label() const {
    return gold_label ? gold_label : predicted_label;
  }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

// One piece of a message produced by the rule-based splitter.
struct SentenceSpan {
  std::size_t offset = 0;  // bytes into the message text
  std::string text;
  bool is_code_block = false;
  bool is_emoticon = false;
};

// Splits on terminal punctuation followed by whitespace and on newlines.
// Fenced ``` blocks and runs of console/stack-trace lines become single code
// spans; whitespace-delimited emoticon tokens (":laughing:", ":)") become
// their own spans. Never drops or duplicates non-whitespace characters.
std::vector<SentenceSpan> split_sentences(std::string_view text);

// Slack shortcode (":laughing:") or a common ASCII emoticon.
bool is_emoticon_token(std::string_view token);

// An ordered, speaker-attributed sentence stream for one channel batch.
class Dialogue {
 public:
  Dialogue() = default;

  // Sorts messages by (timestamp, id), splits them into sentences and
  // assigns sentence ids `<message id>#<index>`. Throws DataError on empty
  // message text or duplicate message ids.
  static Dialogue build(std::string id, std::vector<Message> messages);

  const std::string& id() const { return id_; }
  const std::vector<Message>& messages() const { return messages_; }
  const std::vector<Sentence>& sentences() const { return sentences_; }
  std::vector<Sentence>& mutable_sentences() { return sentences_; }

  // True when input records were not already in (timestamp, id) order.
  bool reordered() const { return reordered_; }
  void set_reordered(bool value) { reordered_ = value; }

  bool empty() const { return messages_.empty(); }

  const Message& message_of(std::size_t sentence_index) const {
    return messages_[sentence_message_[sentence_index]];
  }
  std::size_t message_index_of(std::size_t sentence_index) const { return sentence_message_[sentence_index]; }
  // [first, last) sentence indices of a message.
  std::size_t first_sentence(std::size_t message_index) const { return message_first_[message_index]; }
  std::size_t sentence_count(std::size_t message_index) const {
    return message_first_[message_index + 1] - message_first_[message_index];
  }

  std::optional<std::size_t> find_sentence(std::string_view sentence_id) const;
  std::optional<std::size_t> find_message(std::string_view message_id) const;

  // Content equality; the reorder warning is not part of it.
  friend bool operator==(const Dialogue& a, const Dialogue& b) {
    return a.id_ == b.id_ && a.messages_ == b.messages_ && a.sentences_ == b.sentences_;
  }

 private:
  std::string id_;
  std::vector<Message> messages_;
  std::vector<Sentence> sentences_;
  std::vector<std::size_t> sentence_message_;
  std::vector<std::size_t> message_first_{0};
  std::unordered_map<std::string, std::size_t> sentence_index_;
  std::unordered_map<std::string, std::size_t> message_index_;
  bool reordered_ = false;
};

// Native JSON-lines transcript: one message per line with `ts`, `speaker`,
// `text` and optional `id` / `dialogue_id`. Records are grouped by
// dialogue_id (falling back to `default_dialogue_id`) in order of first
// appearance. Missing ids become `<dialogue_id>:<line number>`.
std::vector<Dialogue> parse_transcript(std::string_view jsonl, const std::string& default_dialogue_id);
// Re-parsing the output yields an identical dialogue.
std::string serialize_transcript(const Dialogue& dialogue);

struct SlackImport {
  Dialogue dialogue;
  std::size_t dropped = 0;   // subtype records without user text (joins, topic changes)
  std::size_t rejected = 0;  // records missing ts or user
};

// Slack user map: either a JSON object {"U123": "PG"} or a users.json array.
std::map<std::string, std::string> parse_slack_user_map(std::string_view json);

// One or more channel-day JSON arrays forming a single dialogue.
SlackImport parse_slack_export(const std::vector<std::string>& day_files,
                               const std::map<std::string, std::string>& user_names,
                               const std::string& dialogue_id);

struct AnnotationRecord {
  // A sentence id, or a message id for a block annotation covering every
  // sentence of that message.
  std::string sentence_id;
  std::string label;
  std::string annotator;
  // Code-point offsets into the sentence text.
  std::optional<std::size_t> char_start;
  std::optional<std::size_t> char_end;
  Timestamp created_at;
  AnnotationSource source = AnnotationSource::kHuman;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

std::vector<AnnotationRecord> parse_annotations(std::string_view jsonl);
std::string serialize_annotation(const AnnotationRecord& record);

// Returns annotated copies. Gold labels come from the latest human/corrected
// record (corrected beating human); where several spans are labeled the
// longest span wins. The predicted label is the latest model record.
// Throws DanglingReferenceError listing every unresolved id, and DataError
// for spans outside the sentence.
std::vector<Dialogue> attach_annotations(const std::vector<Dialogue>& dialogues,
                                         const std::vector<AnnotationRecord>& records);
Dialogue attach_annotations(const Dialogue& dialogue, const std::vector<AnnotationRecord>& records);

// Number of Unicode code points in a UTF-8 string.
std::size_t code_point_length(std::string_view utf8);

}  // namespace chatact
