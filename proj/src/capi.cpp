#include "chatact/chatact.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <set>

#include <json.hpp>

#include "chatact/baseline.hpp"
#include "chatact/error.hpp"
#include "chatact/labeler.hpp"
#include "chatact/metrics.hpp"
#include "chatact/segmentation.hpp"
#include "chatact/service.hpp"
#include "chatact/split.hpp"
#include "chatact/store.hpp"
#include "chatact/synthetic.hpp"
#include "chatact/taxonomy.hpp"
#include "chatact/timeutil.hpp"
#include "chatact/util.hpp"
#include "chatact/validation.hpp"

#ifndef CHATACT_VERSION
#define CHATACT_VERSION "0.0.0"
#endif

using nlohmann::json;
using namespace chatact;

struct chatact_taxonomy {
  Taxonomy value;
};

// Dialogues as ingested plus every record attached since; the annotated view
// is always the fold of `records` over `base`.
struct chatact_corpus {
  std::vector<Dialogue> base;
  std::vector<AnnotationRecord> records;
  std::vector<Dialogue> current;
};

struct chatact_model {
  SequenceModel value;
};

struct chatact_baseline {
  BaselineModel value;
};

struct chatact_store {
  std::shared_ptr<ProjectStore> value;
};

struct chatact_server {
  std::unique_ptr<HttpService> service;
};

namespace {

thread_local std::string g_last_error;

class InvalidArgument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Fn>
chatact_status guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return CHATACT_OK;
  } catch (const InvalidArgument& e) {
    g_last_error = e.what();
    return CHATACT_E_INVALID_ARGUMENT;
  } catch (const DanglingReferenceError& e) {
    g_last_error = e.what();
    return CHATACT_E_DANGLING;
  } catch (const ParseError& e) {
    g_last_error = e.what();
    return CHATACT_E_PARSE;
  } catch (const TaxonomyError& e) {
    g_last_error = e.what();
    return CHATACT_E_TAXONOMY;
  } catch (const DataError& e) {
    g_last_error = e.what();
    return CHATACT_E_DATA;
  } catch (const NotFoundError& e) {
    g_last_error = e.what();
    return CHATACT_E_NOT_FOUND;
  } catch (const ConflictError& e) {
    g_last_error = e.what();
    return CHATACT_E_CONFLICT;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return CHATACT_E_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CHATACT_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CHATACT_E_INTERNAL;
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " must not be NULL");
}

void put_string(char** out, const std::string& s) {
  if (!out) return;
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  *out = p;
}

// Option object that rejects keys nobody asked for.
class Options {
 public:
  explicit Options(const char* text) {
    if (!text || !*text) return;
    try {
      j_ = json::parse(text);
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("options are not JSON: ") + e.what());
    }
    if (!j_.is_object()) throw InvalidArgument("options must be a JSON object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_[key].is_null();
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_[key].get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("option '" + key + "' has the wrong type");
    }
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_[key];
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw InvalidArgument("unknown option '" + key + "'");
    }
  }

 private:
  json j_ = json::object();
  std::set<std::string> used_;
};

SegmentOptions segment_options(Options& o, SegmentOptions s = {}) {
  if (o.has("strategy")) s.strategy = strategy_from_string(o.get<std::string>("strategy", ""));
  if (o.has("line_limit")) s.line_limit = o.get<std::size_t>("line_limit", s.line_limit);
  if (o.has("gap_limit")) {
    const json& g = o.raw("gap_limit");
    if (g.is_number()) {
      s.gap_limit = Microseconds(std::llround(g.get<double>() * 1e6));
    } else if (g.is_string()) {
      s.gap_limit = parse_duration(g.get<std::string>());
    } else {
      throw InvalidArgument("option 'gap_limit' must be seconds or a duration string");
    }
  }
  if (o.has("speaker_limit")) s.speaker_limit = o.get<std::size_t>("speaker_limit", s.speaker_limit);
  if (s.strategy == Strategy::kMessage) s.line_limit = 1;
  return s;
}

SplitRatios split_ratios(Options& o) {
  SplitRatios r;
  r.train = o.get<double>("train", r.train);
  r.dev = o.get<double>("dev", r.dev);
  r.test = o.get<double>("test", r.test);
  return r;
}

std::vector<Window> corpus_windows(const chatact_corpus& c, const char* windows_jsonl, const SegmentOptions& opts) {
  if (windows_jsonl) return parse_windows(windows_jsonl, c.current);
  std::vector<Window> out;
  for (const auto& d : c.current) {
    auto w = segment(d, opts);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

void refold(chatact_corpus& c, std::vector<AnnotationRecord> records) {
  auto folded = attach_annotations(c.base, records);
  c.records = std::move(records);
  c.current = std::move(folded);
}

void check_labels(const Taxonomy& t, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) {
    if (!t.contains(r.label)) throw DataError("unknown label '" + r.label + "' for sentence '" + r.sentence_id + "'");
  }
}

void check_binding(const SequenceModel& m, const Taxonomy& t) {
  if (m.taxonomy_hash() != t.hash()) {
    throw ConflictError("model is bound to taxonomy " + m.taxonomy_hash() + ", not " + t.hash());
  }
}

json nan_to_null(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isnan(x) ? json(nullptr) : json(x));
  return out;
}

json evaluation_json(const Evaluation& e) {
  return {{"labels", e.labels},       {"labeled", e.labeled},       {"correct", e.correct},
          {"accuracy", e.accuracy},   {"precision", nan_to_null(e.precision)},
          {"recall", nan_to_null(e.recall)}, {"support", e.support}, {"confusion", e.confusion}};
}

json proportions_json(const LabelProportions& p) {
  return {{"labels", p.labels},
          {"counts", p.counts},
          {"proportions", p.proportions},
          {"labeled", p.labeled},
          {"unlabeled", p.unlabeled}};
}

json segmentation_json(const SegmentOptions& s) {
  return {{"strategy", to_string(s.strategy)},
          {"line_limit", s.line_limit == kUnlimited ? json(nullptr) : json(s.line_limit)},
          {"gap_limit_seconds", s.gap_limit.count() / 1e6},
          {"speaker_limit", s.speaker_limit}};
}

std::vector<Window> pick(const std::vector<Window>& windows, const std::vector<std::size_t>& idx) {
  std::vector<Window> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(windows[i]);
  return out;
}

std::optional<ImportedEmissions> load_emissions(const char* jsonl, const SequenceModel& m, const chatact_corpus& c) {
  if (!jsonl) return std::nullopt;
  return parse_emissions(jsonl, m, [&](const std::string& id) {
    for (const auto& d : c.current) {
      if (d.find_sentence(id)) return true;
    }
    return false;
  });
}

}  // namespace

extern "C" {

const char* chatact_version(void) { return CHATACT_VERSION; }

const char* chatact_last_error(void) { return g_last_error.c_str(); }

const char* chatact_status_name(chatact_status status) {
  switch (status) {
    case CHATACT_OK: return "ok";
    case CHATACT_E_INVALID_ARGUMENT: return "invalid argument";
    case CHATACT_E_DATA: return "data error";
    case CHATACT_E_PARSE: return "parse error";
    case CHATACT_E_TAXONOMY: return "taxonomy error";
    case CHATACT_E_DANGLING: return "dangling reference";
    case CHATACT_E_CONFLICT: return "conflict";
    case CHATACT_E_NOT_FOUND: return "not found";
    case CHATACT_E_IO: return "i/o error";
    case CHATACT_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void chatact_free_string(char* s) { std::free(s); }

// ---- taxonomy

chatact_status chatact_taxonomy_builtin(chatact_taxonomy** out) {
  return guard([&] {
    require(out, "out");
    *out = new chatact_taxonomy{Taxonomy::builtin()};
  });
}

chatact_status chatact_taxonomy_parse(const char* toml, chatact_taxonomy** out) {
  return guard([&] {
    require(toml, "toml");
    require(out, "out");
    *out = new chatact_taxonomy{Taxonomy::parse(toml)};
  });
}

chatact_status chatact_taxonomy_load(const char* path, chatact_taxonomy** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new chatact_taxonomy{Taxonomy::load_file(path)};
  });
}

void chatact_taxonomy_free(chatact_taxonomy* t) { delete t; }

chatact_status chatact_taxonomy_hash(const chatact_taxonomy* t, char** out) {
  return guard([&] {
    require(t, "taxonomy");
    put_string(out, t->value.hash());
  });
}

chatact_status chatact_taxonomy_describe(const chatact_taxonomy* t, char** out_json) {
  return guard([&] {
    require(t, "taxonomy");
    json labels = json::array();
    for (const auto& l : t->value.labels()) {
      labels.push_back({{"id", l.id},
                        {"parent", l.parent ? json(*l.parent) : json(nullptr)},
                        {"synthesized", l.synthesized},
                        {"reduced", t->value.in_reduced_set(l.id)},
                        {"collapses_to", t->value.collapse(l.id)}});
    }
    put_string(out_json, json({{"name", t->value.name()},
                               {"hash", t->value.hash()},
                               {"labels", labels},
                               {"reduced_set", t->value.reduced_set()}})
                             .dump());
  });
}

// ---- corpus

chatact_status chatact_corpus_new(chatact_corpus** out) {
  return guard([&] {
    require(out, "out");
    *out = new chatact_corpus{};
  });
}

void chatact_corpus_free(chatact_corpus* c) { delete c; }

namespace {
void add_dialogues(chatact_corpus& c, std::vector<Dialogue> incoming) {
  std::set<std::string> ids;
  for (const auto& d : c.base) ids.insert(d.id());
  for (const auto& d : incoming) {
    if (!ids.insert(d.id()).second) throw DataError("dialogue '" + d.id() + "' is already in the corpus");
  }
  auto base = c.base;
  base.insert(base.end(), incoming.begin(), incoming.end());
  auto folded = attach_annotations(base, c.records);
  c.base = std::move(base);
  c.current = std::move(folded);
}
}  // namespace

chatact_status chatact_corpus_add_transcript(chatact_corpus* c, const char* jsonl, const char* default_dialogue_id) {
  return guard([&] {
    require(c, "corpus");
    require(jsonl, "jsonl");
    add_dialogues(*c, parse_transcript(jsonl, default_dialogue_id ? default_dialogue_id : "dialogue"));
  });
}

chatact_status chatact_corpus_add_slack(chatact_corpus* c, const char* const* day_files, size_t count,
                                        const char* users_json, const char* dialogue_id, char** out_json) {
  return guard([&] {
    require(c, "corpus");
    require(dialogue_id, "dialogue_id");
    if (count > 0) require(day_files, "day_files");
    std::vector<std::string> days;
    for (size_t i = 0; i < count; ++i) {
      require(day_files[i], "day file");
      days.emplace_back(day_files[i]);
    }
    const auto users = users_json ? parse_slack_user_map(users_json) : std::map<std::string, std::string>{};
    auto imported = parse_slack_export(days, users, dialogue_id);
    add_dialogues(*c, {imported.dialogue});
    put_string(out_json, json({{"dropped", imported.dropped}, {"rejected", imported.rejected}}).dump());
  });
}

chatact_status chatact_corpus_attach(chatact_corpus* c, const chatact_taxonomy* t, const char* annotations_jsonl) {
  return guard([&] {
    require(c, "corpus");
    require(t, "taxonomy");
    require(annotations_jsonl, "annotations_jsonl");
    auto incoming = parse_annotations(annotations_jsonl);
    check_labels(t->value, incoming);
    auto records = c->records;
    records.insert(records.end(), incoming.begin(), incoming.end());
    refold(*c, std::move(records));
  });
}

chatact_status chatact_corpus_transcript(const chatact_corpus* c, char** out_jsonl) {
  return guard([&] {
    require(c, "corpus");
    std::string out;
    for (const auto& d : c->base) out += serialize_transcript(d);
    put_string(out_jsonl, out);
  });
}

chatact_status chatact_corpus_annotations(const chatact_corpus* c, char** out_jsonl) {
  return guard([&] {
    require(c, "corpus");
    std::string out;
    for (const auto& r : c->records) {
      out += serialize_annotation(r);
      out += '\n';
    }
    put_string(out_jsonl, out);
  });
}

chatact_status chatact_corpus_labeled(const chatact_corpus* c, char** out_jsonl) {
  return guard([&] {
    require(c, "corpus");
    put_string(out_jsonl, serialize_labeled(c->current));
  });
}

chatact_status chatact_corpus_summary(const chatact_corpus* c, char** out_json) {
  return guard([&] {
    require(c, "corpus");
    std::size_t messages = 0, sentences = 0, gold = 0, predicted = 0;
    json reordered = json::array();
    for (const auto& d : c->current) {
      messages += d.messages().size();
      sentences += d.sentences().size();
      for (const auto& s : d.sentences()) {
        gold += s.gold_label.has_value();
        predicted += s.predicted_label.has_value();
      }
      if (d.reordered()) reordered.push_back(d.id());
    }
    put_string(out_json, json({{"dialogues", c->current.size()},
                               {"messages", messages},
                               {"sentences", sentences},
                               {"gold_labeled", gold},
                               {"predicted", predicted},
                               {"annotation_records", c->records.size()},
                               {"reordered", reordered}})
                             .dump());
  });
}

chatact_status chatact_corpus_segment(const chatact_corpus* c, const char* options_json, char** out_windows_jsonl) {
  return guard([&] {
    require(c, "corpus");
    Options o(options_json);
    const auto opts = segment_options(o);
    o.finish();
    put_string(out_windows_jsonl, serialize_windows(corpus_windows(*c, nullptr, opts)));
  });
}

chatact_status chatact_corpus_stats(const chatact_corpus* c, const chatact_taxonomy* t, const char* windows_jsonl,
                                    const char* options_json, char** out_json) {
  return guard([&] {
    require(c, "corpus");
    require(t, "taxonomy");
    Options o(options_json);
    const auto seg = segment_options(o);
    const auto ratios = split_ratios(o);
    const auto seed = o.get<std::uint64_t>("seed", 1);
    o.finish();
    const auto windows = corpus_windows(*c, windows_jsonl, seg);
    const auto split = split_corpus(windows, ratios, seed);
    const auto stats = corpus_stats(c->current, windows, split, t->value);
    put_string(out_json, json({{"windows", windows.size()},
                               {"seed", seed},
                               {"all", proportions_json(stats.all)},
                               {"train", proportions_json(stats.train)},
                               {"dev", proportions_json(stats.dev)},
                               {"test", proportions_json(stats.test)}})
                             .dump());
  });
}

chatact_status chatact_synthesize(const chatact_taxonomy* t, const char* options_json, chatact_corpus** out) {
  return guard([&] {
    require(t, "taxonomy");
    require(out, "out");
    Options o(options_json);
    SyntheticConfig cfg;
    cfg.seed = o.get<std::uint64_t>("seed", cfg.seed);
    cfg.sentences = o.get<std::size_t>("sentences", cfg.sentences);
    cfg.dialogue_sentences = o.get<std::size_t>("dialogue_sentences", cfg.dialogue_sentences);
    cfg.ambiguity = o.get<double>("ambiguity", cfg.ambiguity);
    cfg.same_message = o.get<double>("same_message", cfg.same_message);
    o.finish();
    const auto synth = generate_corpus(cfg, t->value);
    auto c = std::make_unique<chatact_corpus>();
    c->base = parse_transcript(corpus_transcript(synth), "synth");
    refold(*c, parse_annotations(corpus_annotations(synth)));
    *out = c.release();
  });
}

// ---- sequence model

chatact_status chatact_model_train(const chatact_corpus* c, const chatact_taxonomy* t, const char* windows_jsonl,
                                   const char* options_json, chatact_model** out, char** out_report) {
  return guard([&] {
    require(c, "corpus");
    require(t, "taxonomy");
    require(out, "out");
    Options o(options_json);
    const auto seg = segment_options(o);
    const auto ratios = split_ratios(o);
    const auto split_seed = o.get<std::uint64_t>("split_seed", 1);
    TrainConfig cfg;
    if (o.has("seed")) cfg.seed = o.get<std::uint64_t>("seed", 0);
    cfg.step = o.get<double>("step", cfg.step);
    cfg.l2 = o.get<double>("l2", cfg.l2);
    cfg.patience = o.get<std::size_t>("patience", cfg.patience);
    cfg.max_epochs = o.get<std::size_t>("max_epochs", cfg.max_epochs);
    cfg.batch_size = o.get<std::size_t>("batch_size", cfg.batch_size);
    cfg.workers = o.get<std::size_t>("workers", cfg.workers);
    cfg.features.dimension_bits = o.get<std::uint32_t>("dimension_bits", cfg.features.dimension_bits);
    o.finish();
    if (!cfg.seed) throw InvalidArgument("option 'seed' is required for training");

    const auto windows = corpus_windows(*c, windows_jsonl, seg);
    const auto split = split_corpus(windows, ratios, split_seed);
    const auto& labels = t->value.reduced_set();
    auto prep = [&](const std::vector<std::size_t>& idx) {
      return prepare_windows(c->current, pick(windows, idx), t->value, labels, cfg.features);
    };
    const auto train = prep(split.train), dev = prep(split.dev), test = prep(split.test);
    auto result = train_crf(train, dev, t->value, cfg);
    result.model.set_segmentation(windows_jsonl && !windows.empty() ? windows.front().params : seg);

    json history = json::array();
    for (const auto& h : result.history) {
      history.push_back({{"epoch", h.epoch},
                         {"loss", h.loss},
                         {"dev_accuracy", h.dev_accuracy ? json(*h.dev_accuracy) : json(nullptr)}});
    }
    auto accuracy = [&](const std::vector<LabeledWindow>& w) -> json {
      try {
        return evaluate(result.model, w).accuracy;
      } catch (const DataError&) {
        return nullptr;  // nothing labeled in this partition
      }
    };
    const json report = {{"windows", {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}}},
                         {"split_seed", split_seed},
                         {"seed", *cfg.seed},
                         {"best_epoch", result.best_epoch},
                         {"history", history},
                         {"accuracy", {{"train", accuracy(train)}, {"dev", accuracy(dev)}, {"test", accuracy(test)}}}};
    put_string(out_report, report.dump());
    *out = new chatact_model{std::move(result.model)};
  });
}

chatact_status chatact_model_load(const char* path, chatact_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new chatact_model{SequenceModel::load(path)};
  });
}

chatact_status chatact_model_save(const chatact_model* m, const char* path) {
  return guard([&] {
    require(m, "model");
    require(path, "path");
    m->value.save(path);
  });
}

void chatact_model_free(chatact_model* m) { delete m; }

chatact_status chatact_model_describe(const chatact_model* m, char** out_json) {
  return guard([&] {
    require(m, "model");
    put_string(out_json, json({{"labels", m->value.label_set()},
                               {"taxonomy_hash", m->value.taxonomy_hash()},
                               {"dimension_bits", m->value.feature_config().dimension_bits},
                               {"l2", m->value.l2()},
                               {"segmentation", segmentation_json(m->value.segmentation())}})
                             .dump());
  });
}

chatact_status chatact_model_label(const chatact_model* m, chatact_corpus* c, const chatact_taxonomy* t,
                                   const char* windows_jsonl, const char* emissions_jsonl) {
  return guard([&] {
    require(m, "model");
    require(c, "corpus");
    require(t, "taxonomy");
    check_binding(m->value, t->value);
    const auto windows = corpus_windows(*c, windows_jsonl, m->value.segmentation());
    const auto imported = load_emissions(emissions_jsonl, m->value, *c);
    auto labeled = c->current;
    label_dialogues(m->value, labeled, windows, imported ? &*imported : nullptr);

    // Predictions become model records so later attaches keep them.
    const auto stamp = std::chrono::time_point_cast<Microseconds>(std::chrono::system_clock::now());
    const std::string who = "model:" + sha256_hex(m->value.serialize()).substr(0, 12);
    auto records = c->records;
    for (const auto& d : labeled) {
      for (const auto& s : d.sentences()) {
        if (s.predicted_label) {
          records.push_back({s.id, *s.predicted_label, who, std::nullopt, std::nullopt, stamp, AnnotationSource::kModel});
        }
      }
    }
    refold(*c, std::move(records));
  });
}

chatact_status chatact_model_evaluate(const chatact_model* m, const chatact_corpus* c, const chatact_taxonomy* t,
                                      const char* windows_jsonl, const char* emissions_jsonl, const char* options_json,
                                      char** out_json) {
  return guard([&] {
    require(m, "model");
    require(c, "corpus");
    require(t, "taxonomy");
    Options o(options_json);
    const auto partition = o.get<std::string>("partition", "all");
    const auto ratios = split_ratios(o);
    const auto split_seed = o.get<std::uint64_t>("split_seed", 1);
    o.finish();
    check_binding(m->value, t->value);
    auto windows = corpus_windows(*c, windows_jsonl, m->value.segmentation());
    if (partition != "all") {
      const auto split = split_corpus(windows, ratios, split_seed);
      if (partition == "train") {
        windows = pick(windows, split.train);
      } else if (partition == "dev") {
        windows = pick(windows, split.dev);
      } else if (partition == "test") {
        windows = pick(windows, split.test);
      } else {
        throw InvalidArgument("option 'partition' must be all, train, dev or test");
      }
    }
    const auto imported = load_emissions(emissions_jsonl, m->value, *c);
    const auto prepared = prepare_windows(c->current, windows, t->value, m->value.label_set(),
                                          m->value.feature_config(), imported ? &*imported : nullptr);
    json out = evaluation_json(evaluate(m->value, prepared));
    out["partition"] = partition;
    put_string(out_json, out.dump());
  });
}

// ---- baseline and validation

chatact_status chatact_baseline_train(const chatact_corpus* c, const chatact_taxonomy* t, const char* options_json,
                                      chatact_baseline** out) {
  return guard([&] {
    require(c, "corpus");
    require(t, "taxonomy");
    require(out, "out");
    Options o(options_json);
    BaselineConfig cfg;
    if (o.has("seed")) cfg.seed = o.get<std::uint64_t>("seed", 0);
    cfg.epochs = o.get<std::size_t>("epochs", cfg.epochs);
    cfg.dim = o.get<std::uint32_t>("dim", cfg.dim);
    cfg.bucket_bits = o.get<std::uint32_t>("bucket_bits", cfg.bucket_bits);
    cfg.learning_rate = o.get<double>("learning_rate", cfg.learning_rate);
    o.finish();
    if (!cfg.seed) throw InvalidArgument("option 'seed' is required for training");

    std::vector<std::string> labels;
    std::map<std::string, std::size_t> index;
    for (const auto& l : t->value.labels()) {
      index[l.id] = labels.size();
      labels.push_back(l.id);
    }
    std::vector<BaselineExample> examples;
    for (const auto& [text, label] : labeled_sentences(c->current)) {
      const auto it = index.find(label);
      if (it == index.end()) throw DataError("gold label '" + label + "' is not in the taxonomy");
      examples.push_back({text, it->second});
    }
    *out = new chatact_baseline{train_baseline(examples, labels, cfg)};
  });
}

chatact_status chatact_baseline_load(const char* path, chatact_baseline** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new chatact_baseline{BaselineModel::load(path)};
  });
}

chatact_status chatact_baseline_save(const chatact_baseline* b, const char* path) {
  return guard([&] {
    require(b, "baseline");
    require(path, "path");
    b->value.save(path);
  });
}

void chatact_baseline_free(chatact_baseline* b) { delete b; }

chatact_status chatact_validate_taxonomy(const chatact_baseline* b, const chatact_corpus* c, const chatact_taxonomy* t,
                                         const char* mode, char** out_json, char** out_text) {
  return guard([&] {
    require(b, "baseline");
    require(c, "corpus");
    require(t, "taxonomy");
    const CentroidMode m = mode ? centroid_mode_from_string(mode) : CentroidMode::kSentenceMean;
    const auto set = compute_centroids(b->value, labeled_sentences(c->current), m);
    const auto report = hierarchy_consistency_report(set.centroids, t->value);
    std::optional<CentroidPair> closest;
    if (set.centroids.size() >= 2) closest = most_similar_pair(set.centroids);
    put_string(out_json, hierarchy_report_json(report, set, closest, m));
    put_string(out_text, hierarchy_report_text(report, closest));
  });
}

// ---- metrics

chatact_status chatact_metrics_report(const char* labeled_jsonl, const chatact_taxonomy* t, const char* config_json,
                                      char** out_json, char** out_text) {
  return guard([&] {
    require(labeled_jsonl, "labeled_jsonl");
    require(t, "taxonomy");
    const MetricsConfig cfg = config_json ? MetricsConfig::from_json(config_json) : MetricsConfig{};
    const auto report = build_report(parse_labeled(labeled_jsonl), t->value, cfg);
    put_string(out_json, report_json(report));
    put_string(out_text, report_text(report));
  });
}

// ---- store and service

chatact_status chatact_store_open(const char* root, const chatact_taxonomy* t, chatact_store** out) {
  return guard([&] {
    require(root, "root");
    require(out, "out");
    *out = new chatact_store{ProjectStore::open(root, t ? &t->value : nullptr)};
  });
}

void chatact_store_free(chatact_store* s) { delete s; }

chatact_status chatact_store_add_corpus(chatact_store* s, const chatact_corpus* c) {
  return guard([&] {
    require(s, "store");
    require(c, "corpus");
    check_labels(s->value->taxonomy(), c->records);
    s->value->put_dialogues(c->base);
    for (const auto& d : c->base) {
      std::vector<AnnotationRecord> mine;
      for (const auto& r : c->records) {
        if (d.find_sentence(r.sentence_id) || d.find_message(r.sentence_id)) mine.push_back(r);
      }
      if (!mine.empty()) s->value->append_annotations(d.id(), mine);
    }
  });
}

chatact_status chatact_store_add_model(chatact_store* s, const chatact_model* m, const chatact_taxonomy* model_taxonomy,
                                       char** out_id) {
  return guard([&] {
    require(s, "store");
    require(m, "model");
    put_string(out_id, s->value->put_model(m->value, model_taxonomy ? &model_taxonomy->value : nullptr));
  });
}

chatact_status chatact_server_start(chatact_store* s, const char* bind, chatact_server** out, int* out_port) {
  return guard([&] {
    require(s, "store");
    require(bind, "bind");
    require(out, "out");
    const auto [host, port] = parse_bind(bind);
    auto server = std::make_unique<chatact_server>();
    server->service = std::make_unique<HttpService>(s->value);
    const int bound = server->service->start(host, port);
    if (out_port) *out_port = bound;
    *out = server.release();
  });
}

void chatact_server_stop(chatact_server* server) {
  if (!server) return;
  server->service->stop();
  delete server;
}

chatact_status chatact_serve(chatact_store* s, const char* bind) {
  return guard([&] {
    require(s, "store");
    require(bind, "bind");
    const auto [host, port] = parse_bind(bind);
    HttpService service(s->value);
    service.run(host, port);
  });
}

}  // extern "C"
