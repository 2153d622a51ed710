#include "chatact/baseline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/features.hpp"
#include "chatact/util.hpp"

namespace chatact {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'H', 'A', 'T', 'A', 'C', 'T', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw DataError("baseline file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

void put_doubles(std::string& out, const std::vector<double>& values) {
  for (double d : values) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

void get_doubles(std::string_view in, std::size_t& pos, std::vector<double>& values) {
  if (pos + values.size() * 8 > in.size()) throw DataError("baseline file truncated");
  for (auto& d : values) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
    d = std::bit_cast<double>(bits);
    pos += 8;
  }
}

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

}  // namespace

BaselineModel::BaselineModel(std::vector<std::string> labels, const BaselineConfig& config)
    : labels_(std::move(labels)), config_(config) {
  if (labels_.empty()) throw DataError("baseline needs at least one label");
  if (config_.dim == 0 || config_.bucket_bits == 0 || config_.bucket_bits > 24) {
    throw DataError("invalid baseline dimensions");
  }
  embeddings_.assign(static_cast<std::size_t>(buckets()) * config_.dim, 0.0);
  output_.assign(labels_.size() * config_.dim, 0.0);
}

std::vector<std::uint32_t> BaselineModel::feature_ids(std::string_view text) const {
  auto ids = text_feature_ids(text, buckets(), kFeatureHashSeed, config_.char_ngram_min, config_.char_ngram_max,
                              config_.word_bigrams);
  ids.push_back(static_cast<std::uint32_t>(fnv1a64("</s>", kFeatureHashSeed) % buckets()));
  return ids;
}

std::vector<double> BaselineModel::sentence_vector(std::string_view text) const {
  const auto ids = feature_ids(text);
  std::vector<double> h(config_.dim, 0.0);
  for (auto id : ids) {
    const double* row = &embeddings_[static_cast<std::size_t>(id) * config_.dim];
    for (std::uint32_t k = 0; k < config_.dim; ++k) h[k] += row[k];
  }
  for (auto& v : h) v /= static_cast<double>(ids.size());
  return h;
}

std::vector<double> BaselineModel::scores(std::string_view text) const {
  const auto h = sentence_vector(text);
  std::vector<double> z(labels_.size(), 0.0);
  for (std::size_t y = 0; y < labels_.size(); ++y) {
    const double* w = &output_[y * config_.dim];
    for (std::uint32_t k = 0; k < config_.dim; ++k) z[y] += w[k] * h[k];
  }
  return z;
}

std::size_t BaselineModel::predict(std::string_view text) const {
  const auto z = scores(text);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<double> BaselineModel::output_row(std::size_t label) const {
  return {output_.begin() + static_cast<std::ptrdiff_t>(label * config_.dim),
          output_.begin() + static_cast<std::ptrdiff_t>((label + 1) * config_.dim)};
}

std::vector<double> BaselineModel::embedding_row(std::uint32_t id) const {
  return {embeddings_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(id) * config_.dim),
          embeddings_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(id + 1) * config_.dim)};
}

BaselineModel train_baseline(const std::vector<BaselineExample>& examples, std::vector<std::string> labels,
                             const BaselineConfig& config) {
  if (!config.seed) throw DataError("baseline training requires a seed");
  if (examples.empty()) throw DataError("empty training set");
  if (config.epochs == 0 || config.batch_size == 0 || config.learning_rate <= 0) {
    throw DataError("invalid baseline configuration");
  }
  BaselineModel model(std::move(labels), config);
  const std::size_t L = model.labels_.size();
  const std::uint32_t E = config.dim;
  for (const auto& ex : examples) {
    if (ex.label >= L) throw DataError("baseline example label out of range");
  }

  Rng init(*config.seed);
  const double bound = 1.0 / static_cast<double>(E);
  for (auto& v : model.embeddings_) v = init.uniform(-bound, bound);

  std::vector<std::vector<std::uint32_t>> ids;
  ids.reserve(examples.size());
  for (const auto& ex : examples) ids.push_back(model.feature_ids(ex.text));

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t steps_per_epoch = (examples.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch * config.epochs);
  std::size_t step = 0;

  std::vector<double> grad_out(L * E);
  std::unordered_map<std::uint32_t, std::vector<double>> grad_emb;
  std::vector<std::uint32_t> touched;
  std::vector<double> h(E), z(L), gh(E);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(*config.seed + epoch);
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += config.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      const double lr = config.learning_rate * std::max(0.0, 1.0 - static_cast<double>(step) / total_steps) /
                        static_cast<double>(end - b);
      std::fill(grad_out.begin(), grad_out.end(), 0.0);
      grad_emb.clear();
      touched.clear();
      for (std::size_t k = b; k < end; ++k) {
        const auto& x = ids[order[k]];
        const std::size_t gold = examples[order[k]].label;
        std::fill(h.begin(), h.end(), 0.0);
        for (auto id : x) {
          const double* row = &model.embeddings_[static_cast<std::size_t>(id) * E];
          for (std::uint32_t e = 0; e < E; ++e) h[e] += row[e];
        }
        const double inv = 1.0 / static_cast<double>(x.size());
        for (auto& v : h) v *= inv;
        for (std::size_t y = 0; y < L; ++y) {
          double s = 0.0;
          const double* w = &model.output_[y * E];
          for (std::uint32_t e = 0; e < E; ++e) s += w[e] * h[e];
          z[y] = s;
        }
        softmax_inplace(z);
        z[gold] -= 1.0;
        std::fill(gh.begin(), gh.end(), 0.0);
        for (std::size_t y = 0; y < L; ++y) {
          const double* w = &model.output_[y * E];
          double* g = &grad_out[y * E];
          for (std::uint32_t e = 0; e < E; ++e) {
            g[e] += z[y] * h[e];
            gh[e] += z[y] * w[e];
          }
        }
        for (auto id : x) {
          auto [it, inserted] = grad_emb.try_emplace(id);
          if (inserted) {
            it->second.assign(E, 0.0);
            touched.push_back(id);
          }
          for (std::uint32_t e = 0; e < E; ++e) it->second[e] += gh[e] * inv;
        }
      }
      for (std::size_t i = 0; i < grad_out.size(); ++i) model.output_[i] -= lr * grad_out[i];
      for (auto id : touched) {
        double* row = &model.embeddings_[static_cast<std::size_t>(id) * E];
        const auto& g = grad_emb[id];
        for (std::uint32_t e = 0; e < E; ++e) row[e] -= lr * g[e];
      }
    }
    model.epochs_run_ = epoch;
  }
  return model;
}

double baseline_accuracy(const BaselineModel& model, const std::vector<BaselineExample>& examples) {
  if (examples.empty()) throw DataError("no examples to evaluate");
  std::size_t correct = 0;
  for (const auto& ex : examples) correct += model.predict(ex.text) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

std::string BaselineModel::serialize() const {
  const json header = {{"labels", labels_},
                       {"bucket_bits", config_.bucket_bits},
                       {"dim", config_.dim},
                       {"char_ngram_min", config_.char_ngram_min},
                       {"char_ngram_max", config_.char_ngram_max},
                       {"word_bigrams", config_.word_bigrams},
                       {"epochs_run", epochs_run_},
                       {"blocks", {"embeddings", "output"}}};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  put_doubles(out, embeddings_);
  put_doubles(out, output_);
  return out;
}

BaselineModel BaselineModel::deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not a chatact baseline file");
  }
  std::size_t pos = sizeof kMagic;
  if (get_u32(bytes, pos) != kFormatVersion) throw DataError("unsupported baseline file version");
  const std::uint32_t len = get_u32(bytes, pos);
  if (pos + len > bytes.size()) throw DataError("baseline file truncated");
  BaselineModel m;
  try {
    const json h = json::parse(bytes.substr(pos, len));
    BaselineConfig c;
    c.bucket_bits = h.at("bucket_bits").get<std::uint32_t>();
    c.dim = h.at("dim").get<std::uint32_t>();
    c.char_ngram_min = h.at("char_ngram_min").get<std::uint32_t>();
    c.char_ngram_max = h.at("char_ngram_max").get<std::uint32_t>();
    c.word_bigrams = h.at("word_bigrams").get<bool>();
    m = BaselineModel(h.at("labels").get<std::vector<std::string>>(), c);
    m.epochs_run_ = h.at("epochs_run").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("baseline file header: ") + e.what());
  }
  pos += len;
  get_doubles(bytes, pos, m.embeddings_);
  get_doubles(bytes, pos, m.output_);
  if (pos != bytes.size()) throw DataError("baseline file has trailing bytes");
  return m;
}

void BaselineModel::save(const std::string& path) const { write_file(path, serialize()); }

BaselineModel BaselineModel::load(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace chatact
