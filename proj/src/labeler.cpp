#include "chatact/labeler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/taxonomy.hpp"
#include "chatact/util.hpp"

namespace chatact {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'H', 'A', 'T', 'A', 'C', 'T', 'M'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr double kAdaGradEpsilon = 1e-8;

// ---- binary helpers (little-endian on every host) ----

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw DataError("model file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

void put_doubles(std::string& out, const std::vector<double>& values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[start + i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
}

void get_doubles(std::string_view in, std::size_t& pos, std::vector<double>& values) {
  if (pos + values.size() * 8 > in.size()) throw DataError("model file truncated");
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i * 8 + b])) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
  pos += values.size() * 8;
}

json segmentation_to_json(const SegmentOptions& s) {
  auto limit = [](std::size_t v) { return v == kUnlimited ? json(nullptr) : json(v); };
  return {{"strategy", std::string(to_string(s.strategy))},
          {"line_limit", limit(s.line_limit)},
          {"gap_limit_us", s.gap_limit.count()},
          {"speaker_limit", limit(s.speaker_limit)}};
}

SegmentOptions segmentation_from_json(const json& j) {
  auto limit = [](const json& v) { return v.is_null() ? kUnlimited : v.get<std::size_t>(); };
  SegmentOptions s;
  s.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  s.line_limit = limit(j.at("line_limit"));
  s.gap_limit = Microseconds(j.at("gap_limit_us").get<std::int64_t>());
  s.speaker_limit = limit(j.at("speaker_limit"));
  return s;
}

json features_to_json(const FeatureConfig& f) {
  return {{"dimension_bits", f.dimension_bits},
          {"hash_seed", f.hash_seed},
          {"char_ngram_min", f.char_ngram_min},
          {"char_ngram_max", f.char_ngram_max},
          {"word_bigrams", f.word_bigrams}};
}

FeatureConfig features_from_json(const json& j) {
  FeatureConfig f;
  f.dimension_bits = j.at("dimension_bits").get<std::uint32_t>();
  f.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  f.char_ngram_min = j.at("char_ngram_min").get<std::uint32_t>();
  f.char_ngram_max = j.at("char_ngram_max").get<std::uint32_t>();
  f.word_bigrams = j.at("word_bigrams").get<bool>();
  if (f.dimension_bits == 0 || f.dimension_bits > 26) throw DataError("model file: bad feature dimension");
  return f;
}

// ---- training internals ----

// Loss and gradient contributions of one window. Emission gradients are kept
// per position (diff[i * L + y]) and spread over the position's features by
// the caller, so the reduction order is fixed.
struct WindowGradient {
  double loss = 0.0;
  std::vector<double> diff;
  crf::ChainParams chain;
};

WindowGradient window_gradient(const SequenceModel& model, const LabeledWindow& window) {
  const std::size_t L = model.num_labels();
  const std::size_t n = window.features.size();
  std::vector<const std::vector<double>*> imported;
  for (const auto& row : window.imported) imported.push_back(&row);
  const crf::Emissions em = model.emissions(window.features, imported);

  const crf::Posteriors free = crf::forward_backward(model.chain(), em);
  const crf::Posteriors clamped = crf::forward_backward(model.chain(), em, window.gold);

  WindowGradient g;
  g.loss = free.log_z - clamped.log_z;
  g.chain = crf::ChainParams(L);
  g.diff.resize(n * L);
  for (std::size_t k = 0; k < n * L; ++k) g.diff[k] = free.node[k] - clamped.node[k];
  for (std::size_t y = 0; y < L; ++y) {
    g.chain.start[y] = free.node[y] - clamped.node[y];
    g.chain.end[y] = free.node[(n - 1) * L + y] - clamped.node[(n - 1) * L + y];
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t k = 0; k < L * L; ++k) g.chain.transitions[k] += free.edge[i * L * L + k] - clamped.edge[i * L * L + k];
  }
  return g;
}

std::vector<WindowGradient> batch_gradients(const SequenceModel& model, const std::vector<LabeledWindow>& windows,
                                            const std::vector<std::size_t>& batch, std::size_t workers) {
  std::vector<WindowGradient> out(batch.size());
  if (workers <= 1 || batch.size() <= 1) {
    for (std::size_t k = 0; k < batch.size(); ++k) out[k] = window_gradient(model, windows[batch[k]]);
    return out;
  }
  std::vector<std::thread> threads;
  const std::size_t count = std::min(workers, batch.size());
  for (std::size_t t = 0; t < count; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t k = t; k < batch.size(); k += count) out[k] = window_gradient(model, windows[batch[k]]);
    });
  }
  for (auto& th : threads) th.join();
  return out;
}

double data_loss(const SequenceModel& model, const std::vector<LabeledWindow>& windows) {
  double loss = 0.0;
  for (const auto& w : windows) {
    std::vector<const std::vector<double>*> imported;
    for (const auto& row : w.imported) imported.push_back(&row);
    const crf::Emissions em = model.emissions(w.features, imported);
    loss += crf::log_partition(model.chain(), em) - crf::forward_backward(model.chain(), em, w.gold).log_z;
  }
  return loss;
}

std::vector<int> predict_window(const SequenceModel& model, const LabeledWindow& window) {
  const auto labels = decode(model, window);
  return std::vector<int>(labels.begin(), labels.end());
}

std::optional<double> accuracy_on(const SequenceModel& model, const std::vector<LabeledWindow>& windows) {
  std::size_t labeled = 0, correct = 0;
  for (const auto& w : windows) {
    if (std::none_of(w.gold.begin(), w.gold.end(), [](int g) { return g >= 0; })) continue;
    const auto predicted = predict_window(model, w);
    for (std::size_t i = 0; i < w.gold.size(); ++i) {
      if (w.gold[i] < 0) continue;
      ++labeled;
      if (predicted[i] == w.gold[i]) ++correct;
    }
  }
  if (labeled == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(labeled);
}

void check_window(const LabeledWindow& w, std::size_t num_labels) {
  if (w.features.empty()) throw DataError("empty window");
  if (w.gold.size() != w.features.size()) throw DataError("window gold/feature length mismatch");
  for (int g : w.gold) {
    if (g >= static_cast<int>(num_labels)) throw DataError("gold label outside the model label set");
  }
  if (!w.imported.empty() && w.imported.size() != w.features.size()) {
    throw DataError("window imported-emission length mismatch");
  }
}

}  // namespace

// ---- SequenceModel ----

SequenceModel::SequenceModel(std::vector<std::string> label_set, FeatureConfig features, std::string taxonomy_hash)
    : labels_(std::move(label_set)),
      features_(features),
      taxonomy_hash_(std::move(taxonomy_hash)),
      emission_(static_cast<std::size_t>(features_.dimension()) * labels_.size(), 0.0),
      chain_(labels_.size()) {
  if (labels_.empty()) throw DataError("model needs at least one label");
}

std::optional<std::size_t> SequenceModel::label_index(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

double SequenceModel::squared_norm() const {
  double s = 0.0;
  for (double v : emission_) s += v * v;
  for (double v : chain_.transitions) s += v * v;
  for (double v : chain_.start) s += v * v;
  for (double v : chain_.end) s += v * v;
  return s;
}

bool SequenceModel::all_finite() const {
  auto finite = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
  };
  return finite(emission_) && finite(chain_.transitions) && finite(chain_.start) && finite(chain_.end);
}

crf::Emissions SequenceModel::emissions(const std::vector<FeatureVector>& features,
                                        const std::vector<const std::vector<double>*>& imported) const {
  const std::size_t L = labels_.size();
  crf::Emissions em(features.size(), L);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureVector& fv = features[i];
    for (std::size_t k = 0; k < fv.size(); ++k) {
      if (fv.indices[k] >= dimension()) throw DataError("feature index outside model dimension");
      const double* row = &emission_[static_cast<std::size_t>(fv.indices[k]) * L];
      for (std::size_t y = 0; y < L; ++y) em(i, y) += fv.values[k] * row[y];
    }
    if (i < imported.size() && imported[i] != nullptr) {
      if (imported[i]->size() != L) throw DataError("imported emission row has wrong length");
      for (std::size_t y = 0; y < L; ++y) em(i, y) += (*imported[i])[y];
    }
  }
  return em;
}

std::string SequenceModel::serialize() const {
  const json header = {{"taxonomy_hash", taxonomy_hash_},
                       {"label_set", labels_},
                       {"feature_config", features_to_json(features_)},
                       {"l2", l2_},
                       {"segmentation", segmentation_to_json(segmentation_)},
                       {"blocks", {"emission", "transitions", "start", "end"}}};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  put_doubles(out, emission_);
  put_doubles(out, chain_.transitions);
  put_doubles(out, chain_.start);
  put_doubles(out, chain_.end);
  return out;
}

SequenceModel SequenceModel::deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not a chatact model file");
  }
  std::size_t pos = sizeof kMagic;
  const std::uint32_t version = get_u32(bytes, pos);
  if (version != kFormatVersion) throw DataError("unsupported model file version " + std::to_string(version));
  const std::uint32_t header_len = get_u32(bytes, pos);
  if (pos + header_len > bytes.size()) throw DataError("model file truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("model file header: ") + e.what());
  }
  pos += header_len;
  SequenceModel m;
  try {
    m = SequenceModel(header.at("label_set").get<std::vector<std::string>>(),
                      features_from_json(header.at("feature_config")), header.at("taxonomy_hash").get<std::string>());
    m.l2_ = header.at("l2").get<double>();
    m.segmentation_ = segmentation_from_json(header.at("segmentation"));
  } catch (const json::exception& e) {
    throw DataError(std::string("model file header: ") + e.what());
  }
  get_doubles(bytes, pos, m.emission_);
  get_doubles(bytes, pos, m.chain_.transitions);
  get_doubles(bytes, pos, m.chain_.start);
  get_doubles(bytes, pos, m.chain_.end);
  if (pos != bytes.size()) throw DataError("model file has trailing bytes");
  if (!m.all_finite()) throw DataError("model file contains non-finite weights");
  return m;
}

void SequenceModel::save(const std::string& path) const { write_file(path, serialize()); }

SequenceModel SequenceModel::load(const std::string& path) { return deserialize(read_file(path)); }

// ---- preparation ----

std::vector<LabeledWindow> prepare_windows(const std::vector<Dialogue>& dialogues, const std::vector<Window>& windows,
                                           const Taxonomy& taxonomy, const std::vector<std::string>& label_set,
                                           const FeatureConfig& features, const ImportedEmissions* imported) {
  std::unordered_map<std::string, const Dialogue*> by_id;
  for (const auto& d : dialogues) by_id[d.id()] = &d;
  std::unordered_map<std::string, int> label_index;
  for (std::size_t i = 0; i < label_set.size(); ++i) label_index[label_set[i]] = static_cast<int>(i);

  std::vector<LabeledWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    const auto it = by_id.find(w.dialogue_id);
    if (it == by_id.end()) throw DataError("window " + w.id + " refers to unknown dialogue " + w.dialogue_id);
    const Dialogue& d = *it->second;
    LabeledWindow lw;
    lw.features = featurize_window(d, w, features);
    for (std::size_t i = w.begin; i < w.end; ++i) {
      const Sentence& s = d.sentences()[i];
      lw.sentence_ids.push_back(s.id);
      int gold = -1;
      if (s.gold_label) {
        if (!taxonomy.contains(*s.gold_label)) throw DataError("unknown gold label " + *s.gold_label + " on " + s.id);
        const std::string& collapsed = taxonomy.collapse(*s.gold_label);
        const auto li = label_index.find(collapsed);
        if (li == label_index.end()) {
          throw DataError("gold label " + collapsed + " on " + s.id + " is outside the model label set");
        }
        gold = li->second;
      }
      lw.gold.push_back(gold);
    }
    if (imported != nullptr) {
      bool any = false;
      std::vector<std::vector<double>> rows;
      for (const auto& sid : lw.sentence_ids) {
        const auto e = imported->find(sid);
        if (e != imported->end()) {
          rows.push_back(e->second);
          any = true;
        } else {
          rows.emplace_back(label_set.size(), 0.0);
        }
      }
      if (any) lw.imported = std::move(rows);
    }
    out.push_back(std::move(lw));
  }
  return out;
}

// ---- objective ----

double objective(const SequenceModel& model, const std::vector<LabeledWindow>& windows, double l2,
                 ModelGradient* gradient) {
  const std::size_t L = model.num_labels();
  double loss = 0.0;
  if (gradient != nullptr) {
    gradient->emission.assign(model.emission_weights().size(), 0.0);
    gradient->chain = crf::ChainParams(L);
  }
  for (const auto& w : windows) {
    check_window(w, L);
    const WindowGradient g = window_gradient(model, w);
    loss += g.loss;
    if (gradient == nullptr) continue;
    for (std::size_t i = 0; i < w.features.size(); ++i) {
      const FeatureVector& fv = w.features[i];
      for (std::size_t k = 0; k < fv.size(); ++k) {
        for (std::size_t y = 0; y < L; ++y) {
          gradient->emission[static_cast<std::size_t>(fv.indices[k]) * L + y] += fv.values[k] * g.diff[i * L + y];
        }
      }
    }
    for (std::size_t k = 0; k < L * L; ++k) gradient->chain.transitions[k] += g.chain.transitions[k];
    for (std::size_t y = 0; y < L; ++y) {
      gradient->chain.start[y] += g.chain.start[y];
      gradient->chain.end[y] += g.chain.end[y];
    }
  }
  loss += l2 * model.squared_norm();
  if (gradient != nullptr) {
    for (std::size_t k = 0; k < gradient->emission.size(); ++k) {
      gradient->emission[k] += 2.0 * l2 * model.emission_weights()[k];
    }
    const auto& c = model.chain();
    for (std::size_t k = 0; k < L * L; ++k) gradient->chain.transitions[k] += 2.0 * l2 * c.transitions[k];
    for (std::size_t y = 0; y < L; ++y) {
      gradient->chain.start[y] += 2.0 * l2 * c.start[y];
      gradient->chain.end[y] += 2.0 * l2 * c.end[y];
    }
  }
  return loss;
}

// ---- training ----

TrainResult train_crf(const std::vector<LabeledWindow>& train, const std::vector<LabeledWindow>& dev,
                      const Taxonomy& taxonomy, const TrainConfig& config) {
  return train_crf(train, dev, taxonomy.reduced_set(), taxonomy.hash(), config);
}

TrainResult train_crf(const std::vector<LabeledWindow>& train, const std::vector<LabeledWindow>& dev,
                      const std::vector<std::string>& label_set, const std::string& taxonomy_hash,
                      const TrainConfig& config) {
  if (!config.seed) throw DataError("training requires a seed");
  if (train.empty()) throw DataError("empty training set");
  if (config.step <= 0 || config.l2 < 0 || config.batch_size == 0 || config.max_epochs == 0) {
    throw DataError("invalid training configuration");
  }
  const std::size_t L = label_set.size();
  bool any_gold = false;
  for (const auto& w : train) {
    check_window(w, L);
    if (w.features.front().dimension != 0 && w.features.front().dimension != config.features.dimension()) {
      throw DataError("window features were built with a different dimension");
    }
    any_gold = any_gold || std::any_of(w.gold.begin(), w.gold.end(), [](int g) { return g >= 0; });
  }
  if (!any_gold) throw DataError("training set has no labeled sentences");
  for (const auto& w : dev) check_window(w, L);

  TrainResult result;
  SequenceModel model(label_set, config.features, taxonomy_hash);
  model.set_l2(config.l2);

  std::vector<double> emission_acc(model.emission_weights().size(), 0.0);
  crf::ChainParams chain_acc(L);
  auto adagrad = [&](double& theta, double& acc, double g) {
    acc += g * g;
    theta -= config.step * g / (std::sqrt(acc) + kAdaGradEpsilon);
  };

  SequenceModel best = model;
  std::optional<double> best_dev;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double n_windows = static_cast<double>(train.size());

  // Scratch for the batch emission gradient: feature -> slot of L values.
  std::unordered_map<std::uint32_t, std::size_t> slot_of;
  std::vector<std::uint32_t> slot_feature;
  std::vector<double> slot_grad;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(*config.seed + epoch);
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::vector<std::size_t> batch(order.begin() + b, order.begin() + std::min(order.size(), b + config.batch_size));
      const auto grads = batch_gradients(model, train, batch, config.workers);

      slot_of.clear();
      slot_feature.clear();
      slot_grad.clear();
      crf::ChainParams chain_grad(L);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const LabeledWindow& w = train[batch[k]];
        const WindowGradient& g = grads[k];
        for (std::size_t i = 0; i < w.features.size(); ++i) {
          const FeatureVector& fv = w.features[i];
          for (std::size_t j = 0; j < fv.size(); ++j) {
            auto [it, inserted] = slot_of.emplace(fv.indices[j], slot_feature.size());
            if (inserted) {
              slot_feature.push_back(fv.indices[j]);
              slot_grad.resize(slot_grad.size() + L, 0.0);
            }
            double* row = &slot_grad[it->second * L];
            for (std::size_t y = 0; y < L; ++y) row[y] += fv.values[j] * g.diff[i * L + y];
          }
        }
        for (std::size_t q = 0; q < L * L; ++q) chain_grad.transitions[q] += g.chain.transitions[q];
        for (std::size_t y = 0; y < L; ++y) {
          chain_grad.start[y] += g.chain.start[y];
          chain_grad.end[y] += g.chain.end[y];
        }
      }

      // The batch carries its share of the penalty, applied only to the
      // coordinates it touches.
      const double penalty = 2.0 * config.l2 * static_cast<double>(batch.size()) / n_windows;
      auto& theta = model.emission_weights();
      for (std::size_t s = 0; s < slot_feature.size(); ++s) {
        const std::size_t base = static_cast<std::size_t>(slot_feature[s]) * L;
        for (std::size_t y = 0; y < L; ++y) {
          adagrad(theta[base + y], emission_acc[base + y], slot_grad[s * L + y] + penalty * theta[base + y]);
        }
      }
      auto& chain = model.chain();
      for (std::size_t q = 0; q < L * L; ++q) {
        adagrad(chain.transitions[q], chain_acc.transitions[q], chain_grad.transitions[q] + penalty * chain.transitions[q]);
      }
      for (std::size_t y = 0; y < L; ++y) {
        adagrad(chain.start[y], chain_acc.start[y], chain_grad.start[y] + penalty * chain.start[y]);
        adagrad(chain.end[y], chain_acc.end[y], chain_grad.end[y] + penalty * chain.end[y]);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = data_loss(model, train) + config.l2 * model.squared_norm();
    stats.dev_accuracy = accuracy_on(model, dev);
    result.history.push_back(stats);

    bool improved = false;
    if (stats.dev_accuracy) {
      improved = !best_dev || *stats.dev_accuracy > *best_dev;
      if (improved) best_dev = stats.dev_accuracy;
    } else {
      improved = stats.loss < best_loss;
    }
    best_loss = std::min(best_loss, stats.loss);
    if (improved) {
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  result.model = std::move(best);
  result.best_dev_accuracy = best_dev;
  return result;
}

std::vector<std::size_t> decode(const SequenceModel& model, const LabeledWindow& window) {
  std::vector<const std::vector<double>*> imported;
  for (const auto& row : window.imported) imported.push_back(&row);
  return crf::viterbi(model.chain(), model.emissions(window.features, imported)).labels;
}

// ---- emission import ----

ImportedEmissions parse_emissions(std::string_view jsonl, const SequenceModel& model,
                                  const std::function<bool(const std::string&)>& known_sentence) {
  ImportedEmissions out;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    const std::string line = trim(jsonl.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    if (!rec.is_object()) throw ParseError(line_no, "expected an object");
    if (!header_seen) {
      if (!rec.contains("taxonomy_hash") || !rec.contains("labels")) {
        throw ParseError(line_no, "first line must carry taxonomy_hash and labels");
      }
      if (rec["taxonomy_hash"] != model.taxonomy_hash()) {
        throw ConflictError("emission file is bound to a different taxonomy");
      }
      if (rec["labels"] != json(model.label_set())) throw ConflictError("emission file label order differs from the model");
      header_seen = true;
      continue;
    }
    if (!rec.contains("sentence_id") || !rec["sentence_id"].is_string() || !rec.contains("scores") ||
        !rec["scores"].is_array()) {
      throw ParseError(line_no, "expected {sentence_id, scores}");
    }
    const std::string sid = rec["sentence_id"].get<std::string>();
    std::vector<double> scores;
    for (const auto& v : rec["scores"]) {
      if (!v.is_number()) throw ParseError(line_no, "scores must be numbers");
      scores.push_back(v.get<double>());
    }
    if (scores.size() != model.num_labels()) {
      throw ParseError(line_no, "expected " + std::to_string(model.num_labels()) + " scores, got " +
                                    std::to_string(scores.size()));
    }
    if (!std::all_of(scores.begin(), scores.end(), [](double v) { return std::isfinite(v); })) {
      throw ParseError(line_no, "scores must be finite");
    }
    if (known_sentence && !known_sentence(sid)) throw ParseError(line_no, "unknown sentence id " + sid);
    if (!out.emplace(sid, std::move(scores)).second) throw ParseError(line_no, "duplicate sentence id " + sid);
  }
  if (!header_seen) throw DataError("emission file has no header line");
  return out;
}

void label_dialogues(const SequenceModel& model, std::vector<Dialogue>& dialogues, const std::vector<Window>& windows,
                     const ImportedEmissions* imported) {
  std::unordered_map<std::string, Dialogue*> by_id;
  for (auto& d : dialogues) by_id[d.id()] = &d;
  for (const auto& w : windows) {
    const auto it = by_id.find(w.dialogue_id);
    if (it == by_id.end()) throw DataError("window " + w.id + " refers to unknown dialogue " + w.dialogue_id);
    Dialogue& d = *it->second;
    LabeledWindow lw;
    lw.features = featurize_window(d, w, model.feature_config());
    lw.gold.assign(lw.features.size(), -1);
    if (imported != nullptr) {
      for (std::size_t i = w.begin; i < w.end; ++i) {
        const auto e = imported->find(d.sentences()[i].id);
        lw.imported.push_back(e != imported->end() ? e->second : std::vector<double>(model.num_labels(), 0.0));
      }
    }
    const auto labels = decode(model, lw);
    auto& sentences = d.mutable_sentences();
    for (std::size_t i = 0; i < labels.size(); ++i) sentences[w.begin + i].predicted_label = model.label_set()[labels[i]];
  }
}

// ---- evaluation ----

Evaluation evaluate_predictions(const std::vector<std::string>& labels, const std::vector<int>& gold,
                                const std::vector<int>& predicted) {
  if (gold.size() != predicted.size()) throw DataError("gold and predicted lengths differ");
  const std::size_t L = labels.size();
  Evaluation ev;
  ev.labels = labels;
  ev.confusion.assign(L, std::vector<std::size_t>(L, 0));
  ev.support.assign(L, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0) continue;
    if (static_cast<std::size_t>(gold[i]) >= L || predicted[i] < 0 || static_cast<std::size_t>(predicted[i]) >= L) {
      throw DataError("label index out of range");
    }
    ++ev.labeled;
    ++ev.support[gold[i]];
    ++ev.confusion[gold[i]][predicted[i]];
    if (gold[i] == predicted[i]) ++ev.correct;
  }
  if (ev.labeled == 0) throw DataError("no labeled sentences to evaluate");
  ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(ev.labeled);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t y = 0; y < L; ++y) {
    std::size_t predicted_y = 0;
    for (std::size_t g = 0; g < L; ++g) predicted_y += ev.confusion[g][y];
    ev.precision.push_back(predicted_y ? static_cast<double>(ev.confusion[y][y]) / predicted_y : nan);
    ev.recall.push_back(ev.support[y] ? static_cast<double>(ev.confusion[y][y]) / ev.support[y] : nan);
  }
  return ev;
}

Evaluation evaluate(const SequenceModel& model, const std::vector<LabeledWindow>& windows) {
  std::vector<int> gold, predicted;
  for (const auto& w : windows) {
    check_window(w, model.num_labels());
    const auto p = predict_window(model, w);
    gold.insert(gold.end(), w.gold.begin(), w.gold.end());
    predicted.insert(predicted.end(), p.begin(), p.end());
  }
  return evaluate_predictions(model.label_set(), gold, predicted);
}

}  // namespace chatact
