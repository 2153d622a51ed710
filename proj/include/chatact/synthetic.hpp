#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "chatact/corpus.hpp"

namespace chatact {

class Taxonomy;

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t sentences = 4000;
  std::size_t dialogue_sentences = 200;  // target length of each dialogue
  // Chance that a sentence is drawn from a phrase pool shared with other
  // labels, leaving only context to tell them apart.
  double ambiguity = 0.6;
  // Chance that a non-response sentence continues the current message.
  double same_message = 0.2;
};

// A transition-structured corpus over the reduced label set. Gold labels are
// fine-grained labels that collapse onto the chain's states.
struct SyntheticCorpus {
  std::vector<Dialogue> dialogues;
  std::vector<std::string> states;                 // reduced labels, chain order
  std::vector<std::vector<double>> transitions;    // row-stochastic, states x states
  std::vector<double> initial;                     // stationary distribution of `transitions`
};

// Throws DataError if the taxonomy lacks a label the generator emits.
SyntheticCorpus generate_corpus(const SyntheticConfig& config, const Taxonomy& taxonomy);

// Transcript and human annotation records for the corpus, as JSON lines.
std::string corpus_transcript(const SyntheticCorpus& corpus);
std::string corpus_annotations(const SyntheticCorpus& corpus);

// Sentences whose vocabulary is clustered by top-level class: each shares a
// word pool with its class and has a few words of its own. One entry per
// sentence, `per_label` sentences for every non-synthesized label.
std::vector<std::pair<std::string, std::string>> generate_clustered(std::uint64_t seed, const Taxonomy& taxonomy,
                                                                    std::size_t per_label = 40);

}  // namespace chatact
