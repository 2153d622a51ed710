#include "chatact/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "chatact/error.hpp"

namespace chatact {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kMessage: return "message";
    case Strategy::kStatic: return "static";
    case Strategy::kTime: return "time";
    case Strategy::kSpeaker: return "speaker";
  }
  return "static";
}

Strategy strategy_from_string(std::string_view text) {
  if (text == "message") return Strategy::kMessage;
  if (text == "static") return Strategy::kStatic;
  if (text == "time") return Strategy::kTime;
  if (text == "speaker") return Strategy::kSpeaker;
  throw DataError("unknown segmentation strategy '" + std::string(text) + "'");
}

namespace {

std::vector<Window> accumulate(const Dialogue& d, const SegmentOptions& opt) {
  if (opt.line_limit == 0) throw DataError("line_limit must be at least 1");
  if (opt.strategy == Strategy::kTime && opt.gap_limit <= Microseconds::zero()) {
    throw DataError("gap_limit must be positive");
  }
  if (opt.strategy == Strategy::kSpeaker && opt.speaker_limit == 0) throw DataError("speaker_limit must be at least 1");

  std::vector<Window> windows;
  const auto& messages = d.messages();
  std::size_t begin_msg = 0;
  std::size_t count = 0;
  std::vector<std::string_view> speakers;

  auto close = [&](std::size_t end_msg) {
    if (end_msg == begin_msg) return;
    Window w;
    w.dialogue_id = d.id();
    w.begin = d.first_sentence(begin_msg);
    w.end = d.first_sentence(end_msg - 1) + d.sentence_count(end_msg - 1);
    w.id = d.id() + "/" + std::string(to_string(opt.strategy)) + "/" + std::to_string(windows.size());
    for (std::size_t s = w.begin; s < w.end; ++s) w.sentence_ids.push_back(d.sentences()[s].id);
    w.params = opt;
    if (w.size() > 0) windows.push_back(std::move(w));
    begin_msg = end_msg;
    count = 0;
    speakers.clear();
  };

  for (std::size_t m = 0; m < messages.size(); ++m) {
    if (m > begin_msg) {
      bool split = false;
      if (opt.strategy == Strategy::kTime) {
        split = messages[m].timestamp - messages[m - 1].timestamp > opt.gap_limit;
      } else if (opt.strategy == Strategy::kSpeaker) {
        const bool known = std::find(speakers.begin(), speakers.end(), messages[m].speaker) != speakers.end();
        split = !known && speakers.size() >= opt.speaker_limit;
      }
      if (split) close(m);
    }
    if (std::find(speakers.begin(), speakers.end(), messages[m].speaker) == speakers.end()) {
      speakers.push_back(messages[m].speaker);
    }
    count += d.sentence_count(m);
    if (count >= opt.line_limit) close(m + 1);
  }
  close(messages.size());
  return windows;
}

}  // namespace

std::vector<Window> segment_message(const Dialogue& dialogue) {
  SegmentOptions opt;
  opt.strategy = Strategy::kMessage;
  opt.line_limit = 1;
  return accumulate(dialogue, opt);
}

std::vector<Window> segment_static(const Dialogue& dialogue, std::size_t line_limit) {
  SegmentOptions opt;
  opt.strategy = Strategy::kStatic;
  opt.line_limit = line_limit;
  return accumulate(dialogue, opt);
}

std::vector<Window> segment_time(const Dialogue& dialogue, std::size_t line_limit, Microseconds gap_limit) {
  SegmentOptions opt;
  opt.strategy = Strategy::kTime;
  opt.line_limit = line_limit;
  opt.gap_limit = gap_limit;
  return accumulate(dialogue, opt);
}

std::vector<Window> segment_speaker(const Dialogue& dialogue, std::size_t line_limit, std::size_t speaker_limit) {
  SegmentOptions opt;
  opt.strategy = Strategy::kSpeaker;
  opt.line_limit = line_limit;
  opt.speaker_limit = speaker_limit;
  return accumulate(dialogue, opt);
}

std::vector<Window> segment(const Dialogue& dialogue, const SegmentOptions& options) {
  switch (options.strategy) {
    case Strategy::kMessage: return segment_message(dialogue);
    case Strategy::kStatic: return segment_static(dialogue, options.line_limit);
    case Strategy::kTime: return segment_time(dialogue, options.line_limit, options.gap_limit);
    case Strategy::kSpeaker: return segment_speaker(dialogue, options.line_limit, options.speaker_limit);
  }
  return {};
}

std::string window_to_json(const Window& w) {
  nlohmann::json params = {{"line_limit", w.params.line_limit == kUnlimited ? nlohmann::json(nullptr)
                                                                          : nlohmann::json(w.params.line_limit)}};
  if (w.params.strategy == Strategy::kTime) params["gap_limit_seconds"] = w.params.gap_limit.count() / 1e6;
  if (w.params.strategy == Strategy::kSpeaker) params["speaker_limit"] = w.params.speaker_limit;
  nlohmann::json rec = {{"id", w.id},
                        {"dialogue_id", w.dialogue_id},
                        {"strategy", to_string(w.params.strategy)},
                        {"params", params},
                        {"sentence_ids", w.sentence_ids}};
  return rec.dump();
}

std::string serialize_windows(const std::vector<Window>& windows) {
  std::string out;
  for (const auto& w : windows) {
    out += window_to_json(w);
    out += '\n';
  }
  return out;
}

std::vector<Window> parse_windows(std::string_view jsonl, const std::vector<Dialogue>& dialogues) {
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : dialogues) by_id[d.id()] = &d;
  std::vector<Window> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto nl = jsonl.find('\n', pos);
    const auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    Window w;
    try {
      const auto j = nlohmann::json::parse(line);
      w.id = j.at("id").get<std::string>();
      w.dialogue_id = j.at("dialogue_id").get<std::string>();
      w.params.strategy = strategy_from_string(j.at("strategy").get<std::string>());
      w.sentence_ids = j.at("sentence_ids").get<std::vector<std::string>>();
      const auto& params = j.value("params", nlohmann::json::object());
      const auto limit = params.value("line_limit", nlohmann::json(nullptr));
      w.params.line_limit = limit.is_null() ? kUnlimited : limit.get<std::size_t>();
      if (params.contains("gap_limit_seconds")) {
        w.params.gap_limit = Microseconds(std::llround(params["gap_limit_seconds"].get<double>() * 1e6));
      }
      if (params.contains("speaker_limit")) w.params.speaker_limit = params["speaker_limit"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    const auto it = by_id.find(w.dialogue_id);
    if (it == by_id.end()) throw DataError("window '" + w.id + "' names unknown dialogue '" + w.dialogue_id + "'");
    const Dialogue& d = *it->second;
    if (w.sentence_ids.empty()) throw DataError("window '" + w.id + "' is empty");
    const auto first = d.find_sentence(w.sentence_ids.front());
    if (!first) throw DataError("window '" + w.id + "' names unknown sentence '" + w.sentence_ids.front() + "'");
    w.begin = *first;
    w.end = w.begin + w.sentence_ids.size();
    for (std::size_t k = 0; k < w.sentence_ids.size(); ++k) {
      if (w.begin + k >= d.sentences().size() || d.sentences()[w.begin + k].id != w.sentence_ids[k]) {
        throw DataError("window '" + w.id + "' is not a contiguous sentence run");
      }
    }
    const bool starts_message = d.first_sentence(d.message_index_of(w.begin)) == w.begin;
    const std::size_t last_msg = d.message_index_of(w.end - 1);
    const bool ends_message = d.first_sentence(last_msg) + d.sentence_count(last_msg) == w.end;
    if (!starts_message || !ends_message) throw DataError("window '" + w.id + "' splits a message");
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace chatact
