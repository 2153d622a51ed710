#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "chatact/corpus.hpp"
#include "chatact/segmentation.hpp"

namespace chatact {

class Taxonomy;

struct SplitRatios {
  double train = 0.80;
  double dev = 0.05;
  double test = 0.15;
};

// Half-open run [first, last) of window positions.
using Run = std::pair<std::size_t, std::size_t>;

// Partition of an ordered window list. dev is one contiguous run; test is two
// contiguous runs (one when it holds a single window); train is the rest.
struct CorpusSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
  std::vector<std::string> train_ids;
  std::vector<std::string> dev_ids;
  std::vector<std::string> test_ids;
  std::vector<Run> dev_runs;
  std::vector<Run> test_runs;
  SplitRatios ratios;
};

// Sizes are the rounded targets, so each partition is within one window of
// its ratio. Run placement is drawn from `seed`. Throws DataError for fewer
// than 4 windows or ratios that do not sum to 1.
CorpusSplit split_corpus(const std::vector<Window>& windows, const SplitRatios& ratios, std::uint64_t seed);

struct LabelProportions {
  // Reduced-set labels in taxonomy order, with counts and proportions of
  // labeled sentences. Unlabeled sentences are counted apart.
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;
  std::vector<double> proportions;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
};

// Collapses gold labels to the reduced set. Throws DataError on labels the
// taxonomy does not know.
LabelProportions label_proportions(const std::vector<const Sentence*>& sentences, const Taxonomy& taxonomy);

struct CorpusStats {
  LabelProportions all;
  LabelProportions train;
  LabelProportions dev;
  LabelProportions test;
};

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues, const std::vector<Window>& windows,
                         const CorpusSplit& split, const Taxonomy& taxonomy);

// Sentences of a window, resolved against the dialogue list by dialogue id.
std::vector<const Sentence*> window_sentences(const std::vector<Dialogue>& dialogues, const Window& window);

}  // namespace chatact
