#include "chatact/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "chatact/util.hpp"

namespace chatact {
namespace {

// Long pastes (logs, code) would otherwise dominate the feature budget.
constexpr std::size_t kMaxTextBytes = 2000;

bool strip_char(char c) {
  switch (c) {
    case ',': case '.': case ';': case '!': case '?': case '(': case ')':
    case '[': case ']': case '{': case '}': case '"':
      return true;
    default:
      return false;
  }
}

const char* gap_bucket(Microseconds gap) {
  using namespace std::chrono;
  if (gap < minutes(1)) return "gap:<1m";
  if (gap < minutes(10)) return "gap:<10m";
  if (gap < hours(1)) return "gap:<1h";
  return "gap:>=1h";
}

template <typename Fn>
void for_each_text_feature(std::string_view text, std::uint32_t char_min, std::uint32_t char_max, bool bigrams,
                           Fn&& fn) {
  const auto tokens = word_tokens(text.substr(0, kMaxTextBytes));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    fn("w:" + tokens[i]);
    if (bigrams && i + 1 < tokens.size()) fn("b:" + tokens[i] + " " + tokens[i + 1]);
    const std::string padded = "<" + tokens[i] + ">";
    for (std::uint32_t n = char_min; n <= char_max; ++n) {
      if (padded.size() < n) break;
      for (std::size_t k = 0; k + n <= padded.size(); ++k) fn("c:" + padded.substr(k, n));
    }
  }
}

}  // namespace

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && strip_char(text[b])) ++b;
    while (e > b && strip_char(text[e - 1])) --e;
    if (e > b) tokens.push_back(to_lower_ascii(text.substr(b, e - b)));
    i = j;
  }
  return tokens;
}

std::vector<std::uint32_t> text_feature_ids(std::string_view text, std::uint32_t buckets, std::uint64_t seed,
                                            std::uint32_t char_min, std::uint32_t char_max, bool bigrams) {
  std::vector<std::uint32_t> ids;
  for_each_text_feature(text, char_min, char_max, bigrams, [&](const std::string& f) {
    ids.push_back(static_cast<std::uint32_t>(fnv1a64(f, seed) % buckets));
  });
  return ids;
}

FeatureVector featurize(const Dialogue& dialogue, const Window& window, std::size_t position,
                        const FeatureConfig& config) {
  const std::uint32_t dim = config.dimension();
  const std::size_t index = window.begin + position;
  const Sentence& sentence = dialogue.sentences()[index];
  const Message& message = dialogue.message_of(index);

  std::map<std::uint32_t, double> text_features;
  for_each_text_feature(sentence.text, config.char_ngram_min, config.char_ngram_max, config.word_bigrams,
                        [&](const std::string& f) {
                          text_features[static_cast<std::uint32_t>(fnv1a64(f, config.hash_seed) % dim)] += 1.0;
                        });
  double norm = 0.0;
  for (const auto& [id, v] : text_features) norm += v * v;
  norm = std::sqrt(norm);

  std::map<std::uint32_t, double> merged;
  if (norm > 0) {
    for (const auto& [id, v] : text_features) merged[id] += v / norm;
  }

  auto indicator = [&](std::string_view name) {
    merged[static_cast<std::uint32_t>(fnv1a64(std::string("i:") + std::string(name), config.hash_seed) % dim)] += 1.0;
  };
  indicator("bias");
  if (sentence.is_code_block) indicator("code_block");
  if (sentence.is_emoticon) indicator("emoticon");
  if (position == 0) {
    indicator("first_in_window");
  } else {
    const Message& prev = dialogue.message_of(index - 1);
    if (prev.speaker != message.speaker) indicator("speaker_changed");
    indicator(gap_bucket(message.timestamp - prev.timestamp));
  }
  if (sentence.index_in_message == 0) indicator("message_initial");
  if (sentence.text.find('?') != std::string::npos) indicator("question_mark");
  const auto tokens = word_tokens(sentence.text);
  if (std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) { return t.size() > 1 && t[0] == '@'; })) {
    indicator("mentions_user");
  }

  FeatureVector fv;
  fv.dimension = dim;
  for (const auto& [id, v] : merged) {
    if (v == 0.0) continue;
    fv.indices.push_back(id);
    fv.values.push_back(v);
  }
  return fv;
}

std::vector<FeatureVector> featurize_window(const Dialogue& dialogue, const Window& window,
                                            const FeatureConfig& config) {
  std::vector<FeatureVector> out;
  out.reserve(window.size());
  for (std::size_t p = 0; p < window.size(); ++p) out.push_back(featurize(dialogue, window, p, config));
  return out;
}

}  // namespace chatact
