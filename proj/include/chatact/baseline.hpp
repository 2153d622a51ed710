#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chatact {

struct BaselineConfig {
  std::optional<std::uint64_t> seed;  // required
  std::uint32_t bucket_bits = 16;
  std::uint32_t dim = 64;
  std::uint32_t char_ngram_min = 3;
  std::uint32_t char_ngram_max = 5;
  bool word_bigrams = true;
  std::size_t epochs = 10;
  double learning_rate = 0.5;
  std::size_t batch_size = 8;
};

struct BaselineExample {
  std::string text;
  std::size_t label = 0;  // index into the model's label list
};

// Averaged hashed n-gram embeddings followed by a linear softmax layer,
// trained from seeded uniform noise with no pretrained vectors.
class BaselineModel {
 public:
  BaselineModel() = default;
  BaselineModel(std::vector<std::string> labels, const BaselineConfig& config);

  const std::vector<std::string>& labels() const { return labels_; }
  const BaselineConfig& config() const { return config_; }
  std::uint32_t dim() const { return config_.dim; }
  std::uint32_t buckets() const { return 1u << config_.bucket_bits; }
  bool trained() const { return epochs_run_ > 0; }
  std::size_t epochs_run() const { return epochs_run_; }

  // Hashed ids of a text; always contains the end-of-text id, so no
  // sentence has an empty representation.
  std::vector<std::uint32_t> feature_ids(std::string_view text) const;
  // Mean of the embedding rows of feature_ids(text).
  std::vector<double> sentence_vector(std::string_view text) const;
  std::vector<double> scores(std::string_view text) const;
  std::size_t predict(std::string_view text) const;
  const std::string& predict_label(std::string_view text) const { return labels_[predict(text)]; }

  const std::vector<double>& embeddings() const { return embeddings_; }  // buckets x dim
  const std::vector<double>& output() const { return output_; }          // labels x dim
  std::vector<double> output_row(std::size_t label) const;
  std::vector<double> embedding_row(std::uint32_t id) const;

  std::string serialize() const;
  static BaselineModel deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static BaselineModel load(const std::string& path);

  friend BaselineModel train_baseline(const std::vector<BaselineExample>&, std::vector<std::string>,
                                      const BaselineConfig&);

 private:
  std::vector<std::string> labels_;
  BaselineConfig config_;
  std::vector<double> embeddings_;
  std::vector<double> output_;
  std::size_t epochs_run_ = 0;
};

// Mini-batch gradient descent on softmax cross-entropy. Throws DataError on
// an empty training set, a missing seed or a label index out of range.
BaselineModel train_baseline(const std::vector<BaselineExample>& examples, std::vector<std::string> labels,
                             const BaselineConfig& config);

double baseline_accuracy(const BaselineModel& model, const std::vector<BaselineExample>& examples);

}  // namespace chatact
