#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "chatact/corpus.hpp"
#include "chatact/segmentation.hpp"

namespace chatact {

// Fixed seed for feature hashing so model files are reproducible.
inline constexpr std::uint64_t kFeatureHashSeed = 0x6368617461637431ULL;  // "chatact1"

struct FeatureConfig {
  std::uint32_t dimension_bits = 18;
  std::uint64_t hash_seed = kFeatureHashSeed;
  std::uint32_t char_ngram_min = 3;
  std::uint32_t char_ngram_max = 5;
  bool word_bigrams = true;

  std::uint32_t dimension() const { return 1u << dimension_bits; }
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Sparse vector: strictly increasing indices, no stored zeros.
struct FeatureVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::uint32_t dimension = 0;

  std::size_t size() const { return indices.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Lowercased whitespace tokens with surrounding punctuation stripped.
std::vector<std::string> word_tokens(std::string_view text);

// Hashed features of a sentence in its window:
//   word unigrams/bigrams and character 3-5-grams (together L2-normalised),
//   plus unit indicators: bias, code block, emoticon, first in window,
//   speaker change, time-gap bucket, message initial, question mark,
//   @-mention.
FeatureVector featurize(const Dialogue& dialogue, const Window& window, std::size_t position,
                        const FeatureConfig& config);

std::vector<FeatureVector> featurize_window(const Dialogue& dialogue, const Window& window,
                                            const FeatureConfig& config);

// Hashed ids used by the no-context baseline: word unigrams, bigrams and
// per-word character n-grams, with repetitions kept.
std::vector<std::uint32_t> text_feature_ids(std::string_view text, std::uint32_t buckets, std::uint64_t seed,
                                            std::uint32_t char_min, std::uint32_t char_max, bool bigrams);

}  // namespace chatact
