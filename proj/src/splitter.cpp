#include <algorithm>
#include <array>
#include <cctype>

#include "chatact/corpus.hpp"
#include "chatact/util.hpp"

namespace chatact {
namespace {

constexpr std::string_view kFence = "```";

constexpr std::array<std::string_view, 11> kAbbreviations = {
    "e.g.", "i.e.", "etc.", "vs.", "mr.", "mrs.", "ms.", "dr.", "approx.", "cf.", "fig."};

constexpr std::array<std::string_view, 12> kAsciiEmoticons = {
    ":)", ":-)", ":(", ":-(", ":D", ":-D", ";)", ";-)", ":P", ":p", ":/", "<3"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool is_shortcode_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::islower(u) || std::isdigit(u) || c == '_' || c == '+' || c == '-' || c == '\'';
}

}  // namespace

bool is_emoticon_token(std::string_view token) {
  if (std::find(kAsciiEmoticons.begin(), kAsciiEmoticons.end(), token) != kAsciiEmoticons.end()) return true;
  if (token.size() < 3 || token.front() != ':' || token.back() != ':') return false;
  return std::all_of(token.begin() + 1, token.end() - 1, is_shortcode_char);
}

namespace {

// A line of console input, a stack frame or an exception header.
bool is_code_line(std::string_view line) {
  if (starts_with(line, "$ ") || starts_with(line, ">>> ") || starts_with(line, "sudo ")) return true;
  if (starts_with(line, "Traceback (most recent call last)")) return true;
  if (starts_with(line, "File \"")) return true;
  if (starts_with(line, "at ") && line.find('(') != std::string_view::npos && line.back() == ')') return true;
  if (line.size() > 1 && line[0] == '#' && std::isdigit(static_cast<unsigned char>(line[1]))) {
    std::size_t i = 1;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    while (i < line.size() && is_space(line[i])) ++i;
    if (line.substr(i, 2) == "0x") return true;
  }
  // Leading identifier ending in Error/Exception, followed by ':' or end of line.
  std::size_t i = 0;
  if (i < line.size() && (std::isalpha(static_cast<unsigned char>(line[i])) || line[i] == '_')) {
    while (i < line.size() &&
           (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_' || line[i] == '.' || line[i] == '$')) {
      ++i;
    }
    const auto ident = line.substr(0, i);
    const bool error_name = (ident.size() > 5 && ident.substr(ident.size() - 5) == "Error") ||
                            (ident.size() > 9 && ident.substr(ident.size() - 9) == "Exception");
    if (error_name && (i == line.size() || line[i] == ':')) return true;
  }
  return false;
}

class Splitter {
 public:
  explicit Splitter(std::string_view text) : text_(text) {}

  std::vector<SentenceSpan> run() {
    std::size_t pos = 0;
    while (pos < text_.size()) {
      const auto open = text_.find(kFence, pos);
      if (open == std::string_view::npos) {
        plain(pos, text_.size());
        break;
      }
      plain(pos, open);
      const auto close = text_.find(kFence, open + kFence.size());
      const std::size_t end = close == std::string_view::npos ? text_.size() : close + kFence.size();
      emit(open, end, /*code=*/true, /*emoticon=*/false);
      pos = end;
    }
    return std::move(spans_);
  }

 private:
  // Emits [b, e) with surrounding whitespace removed; empty spans vanish.
  void emit(std::size_t b, std::size_t e, bool code, bool emoticon) {
    while (b < e && is_space(text_[b])) ++b;
    while (e > b && is_space(text_[e - 1])) --e;
    if (b == e) return;
    spans_.push_back(SentenceSpan{b, std::string(text_.substr(b, e - b)), code, emoticon});
  }

  void plain(std::size_t b, std::size_t e) {
    bool in_code = false;
    std::size_t code_begin = 0, code_end = 0;
    auto flush_code = [&] {
      if (in_code) emit(code_begin, code_end, true, false);
      in_code = false;
    };

    std::size_t line_begin = b;
    while (line_begin <= e) {
      std::size_t line_end = text_.find('\n', line_begin);
      if (line_end == std::string_view::npos || line_end > e) line_end = e;
      const auto raw = text_.substr(line_begin, line_end - line_begin);
      const auto trimmed = trim(raw);
      if (trimmed.empty()) {
        flush_code();
      } else {
        const bool indented = is_space(raw.front());
        if (is_code_line(trimmed) || (in_code && indented)) {
          if (!in_code) code_begin = line_begin;
          in_code = true;
          code_end = line_end;
        } else {
          flush_code();
          line(line_begin, line_end);
        }
      }
      if (line_end >= e) break;
      line_begin = line_end + 1;
    }
    flush_code();
  }

  // Emoticon tokens split a line into segments, then punctuation splits
  // each segment.
  void line(std::size_t b, std::size_t e) {
    std::size_t segment_begin = b;
    std::size_t i = b;
    while (i < e) {
      while (i < e && is_space(text_[i])) ++i;
      std::size_t j = i;
      while (j < e && !is_space(text_[j])) ++j;
      if (j > i && is_emoticon_token(text_.substr(i, j - i))) {
        punctuation(segment_begin, i);
        emit(i, j, false, true);
        segment_begin = j;
      }
      i = j;
    }
    punctuation(segment_begin, e);
  }

  void punctuation(std::size_t b, std::size_t e) {
    std::size_t start = b;
    std::size_t i = b;
    while (i < e) {
      const char c = text_[i];
      if (c != '.' && c != '!' && c != '?') {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < e && (text_[j] == '.' || text_[j] == '!' || text_[j] == '?')) ++j;
      const std::size_t run_end = j;
      while (j < e && (text_[j] == '"' || text_[j] == '\'' || text_[j] == ')' || text_[j] == ']')) ++j;
      if (j < e && !is_space(text_[j])) {
        i = j;
        continue;
      }
      if (run_end - i == 1 && text_[i] == '.' && is_abbreviation(b, run_end)) {
        i = j;
        continue;
      }
      emit(start, j, false, false);
      start = j;
      i = j;
    }
    emit(start, e, false, false);
  }

  // Whether the word ending at `end` (exclusive, includes the '.') is a
  // known abbreviation.
  bool is_abbreviation(std::size_t lower_bound, std::size_t end) const {
    std::size_t w = end;
    while (w > lower_bound && !is_space(text_[w - 1])) --w;
    const auto word = to_lower_ascii(text_.substr(w, end - w));
    return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
  }

  std::string_view text_;
  std::vector<SentenceSpan> spans_;
};

}  // namespace

std::vector<SentenceSpan> split_sentences(std::string_view text) { return Splitter(text).run(); }

}  // namespace chatact
