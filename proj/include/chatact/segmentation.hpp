#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "chatact/corpus.hpp"

namespace chatact {

enum class Strategy { kMessage, kStatic, kTime, kSpeaker };

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view text);

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

struct SegmentOptions {
  Strategy strategy = Strategy::kStatic;
  std::size_t line_limit = 10;  // counted in sentences; windows close at message boundaries
  Microseconds gap_limit = std::chrono::hours(1);
  std::size_t speaker_limit = 2;

  friend bool operator==(const SegmentOptions&, const SegmentOptions&) = default;
};

// A contiguous run of whole messages, jointly decoded by the sequence model.
struct Window {
  std::string id;
  std::string dialogue_id;
  std::size_t begin = 0;  // sentence index range [begin, end) in the dialogue
  std::size_t end = 0;
  std::vector<std::string> sentence_ids;
  SegmentOptions params;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const Window&, const Window&) = default;
};

// One window per message.
std::vector<Window> segment_message(const Dialogue& dialogue);
// Greedy whole-message accumulation; a window closes after the message that
// brings its sentence count to at least `line_limit`.
std::vector<Window> segment_static(const Dialogue& dialogue, std::size_t line_limit);
// As segment_static, and a gap larger than `gap_limit` between consecutive
// messages starts a new window.
std::vector<Window> segment_time(const Dialogue& dialogue, std::size_t line_limit, Microseconds gap_limit);
// As segment_static, and a message whose speaker would push the window past
// `speaker_limit` distinct speakers starts a new window.
std::vector<Window> segment_speaker(const Dialogue& dialogue, std::size_t line_limit, std::size_t speaker_limit = 2);

std::vector<Window> segment(const Dialogue& dialogue, const SegmentOptions& options);

std::string serialize_windows(const std::vector<Window>& windows);
std::string window_to_json(const Window& window);
// Inverse of serialize_windows. Ranges are recovered from `dialogues`; a
// window must name a contiguous run of whole messages of one dialogue.
// Throws ParseError on malformed lines and DataError on anything else.
std::vector<Window> parse_windows(std::string_view jsonl, const std::vector<Dialogue>& dialogues);

}  // namespace chatact
