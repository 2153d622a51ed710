#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chatact/corpus.hpp"
#include "chatact/crf.hpp"
#include "chatact/features.hpp"
#include "chatact/segmentation.hpp"

namespace chatact {

class Taxonomy;

// Sentence id -> one score per model label, in model label order.
using ImportedEmissions = std::unordered_map<std::string, std::vector<double>>;

// Linear-chain CRF over hashed sentence features, bound to the reduced label
// set of one taxonomy.
class SequenceModel {
 public:
  SequenceModel() = default;
  SequenceModel(std::vector<std::string> label_set, FeatureConfig features, std::string taxonomy_hash);

  const std::vector<std::string>& label_set() const { return labels_; }
  std::size_t num_labels() const { return labels_.size(); }
  const FeatureConfig& feature_config() const { return features_; }
  const std::string& taxonomy_hash() const { return taxonomy_hash_; }
  std::uint32_t dimension() const { return features_.dimension(); }

  // Emission weights stored feature-major: weight(f, y) at [f * L + y].
  std::vector<double>& emission_weights() { return emission_; }
  const std::vector<double>& emission_weights() const { return emission_; }
  double& emission_weight(std::size_t label, std::uint32_t feature) { return emission_[feature * labels_.size() + label]; }
  double emission_weight(std::size_t label, std::uint32_t feature) const {
    return emission_[feature * labels_.size() + label];
  }
  crf::ChainParams& chain() { return chain_; }
  const crf::ChainParams& chain() const { return chain_; }

  double l2() const { return l2_; }
  void set_l2(double value) { l2_ = value; }
  // Segmentation the model was trained with; used as the default at decode time.
  const SegmentOptions& segmentation() const { return segmentation_; }
  void set_segmentation(const SegmentOptions& options) { segmentation_ = options; }

  std::optional<std::size_t> label_index(std::string_view label) const;

  // Sum of squared parameters (emissions, transitions, boundaries).
  double squared_norm() const;
  bool all_finite() const;

  crf::Emissions emissions(const std::vector<FeatureVector>& features,
                           const std::vector<const std::vector<double>*>& imported = {}) const;

  void save(const std::string& path) const;
  static SequenceModel load(const std::string& path);
  std::string serialize() const;
  static SequenceModel deserialize(std::string_view bytes);

 private:
  std::vector<std::string> labels_;
  FeatureConfig features_;
  std::string taxonomy_hash_;
  double l2_ = 0.0;
  SegmentOptions segmentation_;
  std::vector<double> emission_;
  crf::ChainParams chain_;
};

// A window prepared for training or decoding. gold[i] < 0 marks an
// unlabeled sentence, kept as context and summed over in the likelihood.
struct LabeledWindow {
  std::vector<std::string> sentence_ids;
  std::vector<FeatureVector> features;
  std::vector<int> gold;
  std::vector<std::vector<double>> imported;  // empty, or one row per sentence
};

// Featurizes windows and maps gold labels through taxonomy.collapse onto the
// label set. Throws DataError when a collapsed label is not in `label_set`.
std::vector<LabeledWindow> prepare_windows(const std::vector<Dialogue>& dialogues, const std::vector<Window>& windows,
                                           const Taxonomy& taxonomy, const std::vector<std::string>& label_set,
                                           const FeatureConfig& features,
                                           const ImportedEmissions* imported = nullptr);

struct TrainConfig {
  std::optional<std::uint64_t> seed;  // required
  double step = 0.1;                  // AdaGrad base step
  double l2 = 1e-4;
  std::size_t patience = 5;
  std::size_t max_epochs = 100;
  std::size_t batch_size = 16;
  std::size_t workers = 1;
  FeatureConfig features;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;  // negative penalised log-likelihood over the training set
  std::optional<double> dev_accuracy;
};

struct TrainResult {
  SequenceModel model;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  std::optional<double> best_dev_accuracy;
};

// Maximises sum log-likelihood - l2 * ||theta||^2 with AdaGrad over shuffled
// mini-batches; keeps the parameters of the best dev epoch. Deterministic
// for a fixed seed and worker count.
TrainResult train_crf(const std::vector<LabeledWindow>& train, const std::vector<LabeledWindow>& dev,
                      const Taxonomy& taxonomy, const TrainConfig& config);

// Same, with the label set given explicitly (the taxonomy is only used for
// its hash).
TrainResult train_crf(const std::vector<LabeledWindow>& train, const std::vector<LabeledWindow>& dev,
                      const std::vector<std::string>& label_set, const std::string& taxonomy_hash,
                      const TrainConfig& config);

// Penalised log-likelihood of `windows` and, when `gradient` is given, its
// full dense gradient laid out like the model (emissions, then transitions,
// start, end).
struct ModelGradient {
  std::vector<double> emission;
  crf::ChainParams chain;
};
double objective(const SequenceModel& model, const std::vector<LabeledWindow>& windows, double l2,
                 ModelGradient* gradient = nullptr);

std::vector<std::size_t> decode(const SequenceModel& model, const LabeledWindow& window);

// Imported emission file: a header line {"taxonomy_hash", "labels"} then one
// {"sentence_id", "scores"} line per sentence. Rejects a mismatched hash or
// label order, wrong vector lengths and (when `known_sentences` is given)
// unknown sentence ids.
ImportedEmissions parse_emissions(std::string_view jsonl, const SequenceModel& model,
                                  const std::function<bool(const std::string&)>& known_sentence = {});

// Sets predicted_label on every sentence covered by `windows`.
void label_dialogues(const SequenceModel& model, std::vector<Dialogue>& dialogues, const std::vector<Window>& windows,
                     const ImportedEmissions* imported = nullptr);

struct Evaluation {
  std::vector<std::string> labels;
  std::size_t labeled = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<double> precision;  // NaN where nothing was predicted
  std::vector<double> recall;     // NaN where there is no support
  std::vector<std::size_t> support;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
};

// Accuracy over labeled positions (gold >= 0). Throws DataError when there
// are none.
Evaluation evaluate_predictions(const std::vector<std::string>& labels, const std::vector<int>& gold,
                                const std::vector<int>& predicted);
Evaluation evaluate(const SequenceModel& model, const std::vector<LabeledWindow>& windows);

}  // namespace chatact
