#include "chatact/split.hpp"

#include <algorithm>
#include <cmath>

#include "chatact/error.hpp"
#include "chatact/taxonomy.hpp"
#include "chatact/util.hpp"

namespace chatact {
namespace {

enum class Block { kDev, kTest };

// k sorted distinct values from [0, n), uniformly (selection sampling).
std::vector<std::size_t> sample_sorted(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < n && out.size() < k; ++i) {
    const std::size_t remaining = n - i;
    const std::size_t needed = k - out.size();
    if (rng.below(remaining) < needed) out.push_back(i);
  }
  return out;
}

}  // namespace

CorpusSplit split_corpus(const std::vector<Window>& windows, const SplitRatios& ratios, std::uint64_t seed) {
  const std::size_t n = windows.size();
  if (n < 4) throw DataError("split_corpus needs at least 4 windows, got " + std::to_string(n));
  if (ratios.train < 0 || ratios.dev < 0 || ratios.test < 0) throw DataError("split ratios must be non-negative");
  if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");

  const auto n_dev = static_cast<std::size_t>(std::llround(ratios.dev * static_cast<double>(n)));
  auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));
  n_test = std::min(n_test, n - n_dev);
  const std::size_t n_train = n - n_dev - n_test;

  std::vector<std::pair<Block, std::size_t>> blocks;
  if (n_dev > 0) blocks.emplace_back(Block::kDev, n_dev);
  if (n_test >= 2) {
    blocks.emplace_back(Block::kTest, (n_test + 1) / 2);
    blocks.emplace_back(Block::kTest, n_test / 2);
  } else if (n_test == 1) {
    blocks.emplace_back(Block::kTest, 1);
  }

  Rng rng(seed);
  rng.shuffle(blocks);

  // Gaps of train windows before, between and after the blocks. Two test
  // blocks in a row need a train window between them to stay two runs.
  const std::size_t k = blocks.size();
  std::vector<bool> separator(k + 1, false);
  std::size_t reserved = 0;
  for (std::size_t b = 1; b < k; ++b) {
    if (blocks[b - 1].first == Block::kTest && blocks[b].first == Block::kTest && reserved < n_train) {
      separator[b] = true;
      ++reserved;
    }
  }
  // Stars and bars: the remaining train windows fall into k + 1 gaps, with
  // the k bar positions drawn uniformly among free + k slots.
  const std::size_t free = n_train - reserved;
  const auto bars = sample_sorted(free + k, k, rng);
  std::vector<std::size_t> gaps(k + 1, 0);
  if (k == 0) {
    gaps[0] = free;
  } else {
    gaps[0] = bars[0];
    for (std::size_t b = 1; b < k; ++b) gaps[b] = bars[b] - bars[b - 1] - 1;
    gaps[k] = free + k - 1 - bars[k - 1];
  }
  for (std::size_t b = 0; b <= k; ++b) {
    if (separator[b]) ++gaps[b];
  }

  CorpusSplit split;
  split.ratios = ratios;
  std::size_t pos = 0;
  auto take_train = [&](std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) split.train.push_back(pos++);
  };
  for (std::size_t b = 0; b < k; ++b) {
    take_train(gaps[b]);
    const auto [kind, size] = blocks[b];
    auto& target = kind == Block::kDev ? split.dev : split.test;
    auto& runs = kind == Block::kDev ? split.dev_runs : split.test_runs;
    runs.emplace_back(pos, pos + size);
    for (std::size_t i = 0; i < size; ++i) target.push_back(pos++);
  }
  take_train(gaps[k]);

  std::sort(split.test.begin(), split.test.end());
  std::sort(split.test_runs.begin(), split.test_runs.end());
  for (auto i : split.train) split.train_ids.push_back(windows[i].id);
  for (auto i : split.dev) split.dev_ids.push_back(windows[i].id);
  for (auto i : split.test) split.test_ids.push_back(windows[i].id);
  return split;
}

LabelProportions label_proportions(const std::vector<const Sentence*>& sentences, const Taxonomy& taxonomy) {
  LabelProportions p;
  p.labels = taxonomy.reduced_set();
  p.counts.assign(p.labels.size(), 0);
  p.proportions.assign(p.labels.size(), 0.0);
  for (const auto* s : sentences) {
    if (!s->gold_label) {
      ++p.unlabeled;
      continue;
    }
    const auto& collapsed = taxonomy.collapse(*s->gold_label);
    const auto it = std::find(p.labels.begin(), p.labels.end(), collapsed);
    ++p.counts[static_cast<std::size_t>(it - p.labels.begin())];
    ++p.labeled;
  }
  if (p.labeled > 0) {
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      p.proportions[i] = static_cast<double>(p.counts[i]) / static_cast<double>(p.labeled);
    }
  }
  return p;
}

std::vector<const Sentence*> window_sentences(const std::vector<Dialogue>& dialogues, const Window& window) {
  for (const auto& d : dialogues) {
    if (d.id() != window.dialogue_id) continue;
    if (window.end > d.sentences().size()) throw DataError("window '" + window.id + "' exceeds its dialogue");
    std::vector<const Sentence*> out;
    for (std::size_t s = window.begin; s < window.end; ++s) out.push_back(&d.sentences()[s]);
    return out;
  }
  throw DataError("window '" + window.id + "' references unknown dialogue '" + window.dialogue_id + "'");
}

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues, const std::vector<Window>& windows,
                         const CorpusSplit& split, const Taxonomy& taxonomy) {
  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<const Sentence*> out;
    for (auto i : idx) {
      auto part = window_sentences(dialogues, windows[i]);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  };
  std::vector<const Sentence*> all;
  for (const auto& d : dialogues) {
    for (const auto& s : d.sentences()) all.push_back(&s);
  }
  CorpusStats stats;
  stats.all = label_proportions(all, taxonomy);
  stats.train = label_proportions(gather(split.train), taxonomy);
  stats.dev = label_proportions(gather(split.dev), taxonomy);
  stats.test = label_proportions(gather(split.test), taxonomy);
  return stats;
}

}  // namespace chatact
