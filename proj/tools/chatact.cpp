// chatact command-line front end. Uses only the C API.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chatact/chatact.h"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Carries a C API failure up to main.
struct Failure {
  chatact_status status;
  std::string message;
};

void check(chatact_status s) {
  if (s != CHATACT_OK) throw Failure{s, chatact_last_error()};
}

struct FreeString {
  void operator()(char* p) const { chatact_free_string(p); }
};
using OwnedString = std::unique_ptr<char, FreeString>;

std::string take(char* p) {
  OwnedString owned(p);
  return p ? std::string(p) : std::string();
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T* get() const { return p; }
  T** out() { return &p; }
};
using Taxonomy = Handle<chatact_taxonomy, chatact_taxonomy_free>;
using Corpus = Handle<chatact_corpus, chatact_corpus_free>;
using Model = Handle<chatact_model, chatact_model_free>;
using Baseline = Handle<chatact_baseline, chatact_baseline_free>;
using Store = Handle<chatact_store, chatact_store_free>;

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{CHATACT_E_IO, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{CHATACT_E_IO, "cannot write " + path};
  out << text;
  if (!out) throw Failure{CHATACT_E_IO, "short write to " + path};
}

void load_taxonomy(const std::string& path, Taxonomy& t) {
  if (path.empty()) {
    check(chatact_taxonomy_builtin(t.out()));
  } else {
    check(chatact_taxonomy_load(path.c_str(), t.out()));
  }
}

void load_corpus(const std::vector<std::string>& transcripts, const std::vector<std::string>& annotations,
                 const chatact_taxonomy* t, Corpus& c) {
  check(chatact_corpus_new(c.out()));
  for (const auto& path : transcripts) check(chatact_corpus_add_transcript(c.get(), read_text(path).c_str(), "dialogue"));
  for (const auto& path : annotations) check(chatact_corpus_attach(c.get(), t, read_text(path).c_str()));
}

std::optional<std::string> maybe_read(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_text(path);
}

const char* c_str_or_null(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

// Segmentation flags shared by several subcommands; only flags given on the
// command line reach the options object.
struct SegmentFlags {
  std::optional<std::string> strategy;
  std::optional<std::size_t> line_limit;
  std::optional<std::string> gap_limit;
  std::optional<std::size_t> speaker_limit;

  void add(CLI::App* app) {
    app->add_option("--strategy", strategy, "Windowing: message, static, time or speaker")
        ->check(CLI::IsMember({"message", "static", "time", "speaker"}));
    app->add_option("--line-limit", line_limit, "Sentences per window (default 10)");
    app->add_option("--gap-limit", gap_limit, "Largest time gap inside a window, e.g. 30m or 1h");
    app->add_option("--speaker-limit", speaker_limit, "Distinct speakers per window (default 2)");
  }

  void into(json& o) const {
    if (strategy) o["strategy"] = *strategy;
    if (line_limit) o["line_limit"] = *line_limit;
    if (gap_limit) o["gap_limit"] = *gap_limit;
    if (speaker_limit) o["speaker_limit"] = *speaker_limit;
  }
};

struct CorpusFlags {
  std::vector<std::string> transcripts;
  std::vector<std::string> annotations;
  std::string taxonomy;

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--corpus", transcripts, "Native JSON-lines transcript(s)");
    if (required) opt->required();
    app->add_option("--annotations", annotations, "Annotation record file(s)");
    app->add_option("--taxonomy", taxonomy, "Taxonomy TOML (default: builtin)");
  }
};

std::string format_accuracy(const json& acc) {
  if (acc.is_null()) return "n/a";
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  ss << acc.get<double>();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue-act labeling and team-communication metrics for chat transcripts"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(chatact_version()));

  // ---- synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
  std::uint64_t synth_seed = 1;
  std::size_t synth_sentences = 4000;
  std::optional<double> synth_ambiguity;
  std::string synth_transcript, synth_annotations, synth_taxonomy;
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--sentences", synth_sentences, "Corpus size in sentences");
  synth->add_option("--ambiguity", synth_ambiguity, "Chance a sentence uses a shared phrase pool");
  synth->add_option("--transcript-out", synth_transcript, "Transcript output")->required();
  synth->add_option("--annotations-out", synth_annotations, "Gold annotation output")->required();
  synth->add_option("--taxonomy", synth_taxonomy, "Taxonomy TOML (default: builtin)");

  // ---- ingest
  auto* ingest = app.add_subcommand("ingest", "Parse transcripts and annotations into canonical files");
  std::vector<std::string> ingest_in, ingest_annotations;
  std::string ingest_format = "native", ingest_users, ingest_dialogue, ingest_out, ingest_ann_out, ingest_labeled_out,
              ingest_taxonomy;
  ingest->add_option("--in", ingest_in, "Input file(s); Slack input takes one file per channel day")->required();
  ingest->add_option("--format", ingest_format, "native or slack")->check(CLI::IsMember({"native", "slack"}));
  ingest->add_option("--users", ingest_users, "Slack user map (users.json or id->name object)");
  ingest->add_option("--dialogue-id", ingest_dialogue, "Dialogue id (default for native, required for slack)");
  ingest->add_option("--annotations", ingest_annotations, "Annotation record file(s) to validate and attach");
  ingest->add_option("--taxonomy", ingest_taxonomy, "Taxonomy TOML (default: builtin)");
  ingest->add_option("--out", ingest_out, "Canonical transcript output")->required();
  ingest->add_option("--annotations-out", ingest_ann_out, "Validated annotation output");
  ingest->add_option("--labeled-out", ingest_labeled_out, "Labeled sentence stream output");

  // ---- segment
  auto* seg = app.add_subcommand("segment", "Cut dialogues into context windows");
  CorpusFlags seg_corpus;
  SegmentFlags seg_flags;
  std::string seg_out;
  seg_corpus.add(seg);
  seg_flags.add(seg);
  seg->add_option("--out", seg_out, "Window records output (default stdout)");

  // ---- train
  auto* train = app.add_subcommand("train", "Train the sequence labeler");
  CorpusFlags train_corpus;
  SegmentFlags train_seg;
  std::optional<std::uint64_t> train_seed;
  std::uint64_t train_split_seed = 1;
  std::optional<std::size_t> train_epochs, train_patience, train_batch, train_workers;
  std::optional<std::uint32_t> train_bits;
  std::optional<double> train_l2, train_step;
  std::string train_windows, train_out, train_report;
  train_corpus.add(train);
  train_seg.add(train);
  train->add_option("--windows", train_windows, "Window records from `segment` (default: segment here)");
  train->add_option("--seed", train_seed, "Training seed")->required();
  train->add_option("--split-seed", train_split_seed, "Seed for the train/dev/test split");
  train->add_option("--epochs", train_epochs, "Maximum epochs");
  train->add_option("--patience", train_patience, "Epochs without dev improvement before stopping");
  train->add_option("--batch-size", train_batch, "Mini-batch size in windows");
  train->add_option("--workers", train_workers, "Gradient worker threads");
  train->add_option("--dimension-bits", train_bits, "log2 of the hashed feature space");
  train->add_option("--l2", train_l2, "L2 penalty");
  train->add_option("--step", train_step, "AdaGrad base step");
  train->add_option("--out", train_out, "Model output")->required();
  train->add_option("--report", train_report, "Training report JSON output");

  // ---- label
  auto* label = app.add_subcommand("label", "Predict dialogue acts with a trained model");
  CorpusFlags label_corpus;
  std::string label_model, label_windows, label_emissions, label_out, label_ann_out;
  label_corpus.add(label);
  label->add_option("--model", label_model, "Model file")->required();
  label->add_option("--windows", label_windows, "Window records (default: the model's segmentation)");
  label->add_option("--emissions", label_emissions, "Imported per-sentence emission scores");
  label->add_option("--out", label_out, "Labeled sentence stream output (default stdout)");
  label->add_option("--annotations-out", label_ann_out, "All records including predictions");

  // ---- evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a model against gold labels");
  CorpusFlags eval_corpus;
  std::string eval_model, eval_windows, eval_emissions, eval_partition = "all", eval_out;
  std::uint64_t eval_split_seed = 1;
  bool eval_json = false;
  eval_corpus.add(eval);
  eval->add_option("--model", eval_model, "Model file")->required();
  eval->add_option("--windows", eval_windows, "Window records (default: the model's segmentation)");
  eval->add_option("--emissions", eval_emissions, "Imported per-sentence emission scores");
  eval->add_option("--partition", eval_partition, "all, train, dev or test")
      ->check(CLI::IsMember({"all", "train", "dev", "test"}));
  eval->add_option("--split-seed", eval_split_seed, "Seed of the split the partition refers to");
  eval->add_flag("--json", eval_json, "Print the full evaluation as JSON");
  eval->add_option("--out", eval_out, "Also write the evaluation JSON here");

  // ---- validate-taxonomy
  auto* vt = app.add_subcommand("validate-taxonomy", "Check that labels cluster by top-level class");
  CorpusFlags vt_corpus;
  std::uint64_t vt_seed = 1;
  std::optional<std::size_t> vt_epochs;
  std::string vt_mode = "sentence-mean", vt_out, vt_baseline, vt_baseline_out;
  vt_corpus.add(vt);
  vt->add_option("--seed", vt_seed, "Baseline training seed");
  vt->add_option("--epochs", vt_epochs, "Baseline epochs");
  vt->add_option("--mode", vt_mode, "Centroid: sentence-mean, token-mean or output-row");
  vt->add_option("--baseline", vt_baseline, "Use this trained baseline instead of training one");
  vt->add_option("--baseline-out", vt_baseline_out, "Save the trained baseline");
  vt->add_option("--out", vt_out, "Report JSON output");

  // ---- metrics
  auto* metrics = app.add_subcommand("metrics", "Team-communication metrics from a labeled stream");
  std::string metrics_in, metrics_out, metrics_format = "json", metrics_config, metrics_taxonomy;
  metrics->add_option("--in", metrics_in, "Labeled sentence stream")->required();
  metrics->add_option("--out", metrics_out, "Report output (default stdout)");
  metrics->add_option("--format", metrics_format, "json or text")->check(CLI::IsMember({"json", "text"}));
  metrics->add_option("--config", metrics_config, "Metrics configuration JSON");
  metrics->add_option("--taxonomy", metrics_taxonomy, "Taxonomy TOML (default: builtin)");

  // ---- stats
  auto* stats = app.add_subcommand("stats", "Label proportions overall and per split partition");
  CorpusFlags stats_corpus;
  SegmentFlags stats_seg;
  std::string stats_windows, stats_out;
  std::uint64_t stats_seed = 1;
  bool stats_json = false;
  stats_corpus.add(stats);
  stats_seg.add(stats);
  stats->add_option("--windows", stats_windows, "Window records (default: segment here)");
  stats->add_option("--seed", stats_seed, "Split seed");
  stats->add_flag("--json", stats_json, "Print JSON instead of a table");
  stats->add_option("--out", stats_out, "Also write the JSON here");

  // ---- serve
  auto* serve = app.add_subcommand("serve", "Serve a project store over HTTP");
  std::string serve_store, serve_bind = "127.0.0.1:8080", serve_taxonomy;
  std::vector<std::string> serve_corpus, serve_annotations, serve_models;
  serve->add_option("--store", serve_store, "Project store directory")->envname("CHATACT_STORE")->required();
  serve->add_option("--bind", serve_bind, "host:port to listen on")->envname("CHATACT_BIND");
  serve->add_option("--taxonomy", serve_taxonomy, "Taxonomy for a new store (default: builtin)");
  serve->add_option("--corpus", serve_corpus, "Transcript(s) to import before serving");
  serve->add_option("--annotations", serve_annotations, "Annotation files to import with the corpus");
  serve->add_option("--model", serve_models, "Model file(s) to register before serving");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) {
      Taxonomy t;
      load_taxonomy(synth_taxonomy, t);
      json o = {{"seed", synth_seed}, {"sentences", synth_sentences}};
      if (synth_ambiguity) o["ambiguity"] = *synth_ambiguity;
      Corpus c;
      check(chatact_synthesize(t.get(), o.dump().c_str(), c.out()));
      char* transcript = nullptr;
      char* annotations = nullptr;
      char* summary = nullptr;
      check(chatact_corpus_transcript(c.get(), &transcript));
      const std::string tr = take(transcript);
      check(chatact_corpus_annotations(c.get(), &annotations));
      const std::string an = take(annotations);
      check(chatact_corpus_summary(c.get(), &summary));
      write_text(synth_transcript, tr);
      write_text(synth_annotations, an);
      std::cerr << take(summary) << '\n';
    } else if (*ingest) {
      Taxonomy t;
      load_taxonomy(ingest_taxonomy, t);
      Corpus c;
      check(chatact_corpus_new(c.out()));
      json extra = json::object();
      if (ingest_format == "slack") {
        if (ingest_dialogue.empty()) throw Failure{CHATACT_E_INVALID_ARGUMENT, "--dialogue-id is required for slack"};
        std::vector<std::string> days;
        for (const auto& p : ingest_in) days.push_back(read_text(p));
        std::vector<const char*> ptrs;
        for (const auto& d : days) ptrs.push_back(d.c_str());
        const auto users = maybe_read(ingest_users);
        char* info = nullptr;
        check(chatact_corpus_add_slack(c.get(), ptrs.data(), ptrs.size(), c_str_or_null(users),
                                       ingest_dialogue.c_str(), &info));
        extra = json::parse(take(info));
      } else {
        const std::string fallback = ingest_dialogue.empty() ? "dialogue" : ingest_dialogue;
        for (const auto& p : ingest_in) {
          check(chatact_corpus_add_transcript(c.get(), read_text(p).c_str(), fallback.c_str()));
        }
      }
      for (const auto& p : ingest_annotations) check(chatact_corpus_attach(c.get(), t.get(), read_text(p).c_str()));
      char* out = nullptr;
      check(chatact_corpus_transcript(c.get(), &out));
      write_text(ingest_out, take(out));
      if (!ingest_ann_out.empty()) {
        check(chatact_corpus_annotations(c.get(), &out));
        write_text(ingest_ann_out, take(out));
      }
      if (!ingest_labeled_out.empty()) {
        check(chatact_corpus_labeled(c.get(), &out));
        write_text(ingest_labeled_out, take(out));
      }
      check(chatact_corpus_summary(c.get(), &out));
      json summary = json::parse(take(out));
      summary.update(extra);
      for (const auto& id : summary["reordered"]) {
        std::cerr << "warning: dialogue " << id.get<std::string>() << " was not in timestamp order; sorted\n";
      }
      std::cout << summary.dump() << '\n';
    } else if (*seg) {
      Taxonomy t;
      load_taxonomy(seg_corpus.taxonomy, t);
      Corpus c;
      load_corpus(seg_corpus.transcripts, seg_corpus.annotations, t.get(), c);
      json o = json::object();
      seg_flags.into(o);
      char* out = nullptr;
      check(chatact_corpus_segment(c.get(), o.dump().c_str(), &out));
      write_text(seg_out, take(out));
    } else if (*train) {
      Taxonomy t;
      load_taxonomy(train_corpus.taxonomy, t);
      Corpus c;
      load_corpus(train_corpus.transcripts, train_corpus.annotations, t.get(), c);
      json o = {{"seed", *train_seed}, {"split_seed", train_split_seed}};
      train_seg.into(o);
      if (train_epochs) o["max_epochs"] = *train_epochs;
      if (train_patience) o["patience"] = *train_patience;
      if (train_batch) o["batch_size"] = *train_batch;
      if (train_workers) o["workers"] = *train_workers;
      if (train_bits) o["dimension_bits"] = *train_bits;
      if (train_l2) o["l2"] = *train_l2;
      if (train_step) o["step"] = *train_step;
      const auto windows = maybe_read(train_windows);
      Model m;
      char* report = nullptr;
      check(chatact_model_train(c.get(), t.get(), c_str_or_null(windows), o.dump().c_str(), m.out(), &report));
      const json r = json::parse(take(report));
      check(chatact_model_save(m.get(), train_out.c_str()));
      if (!train_report.empty()) write_text(train_report, r.dump(2) + "\n");
      std::cout << "best epoch " << r["best_epoch"] << "; accuracy train " << format_accuracy(r["accuracy"]["train"])
                << ", dev " << format_accuracy(r["accuracy"]["dev"]) << ", test "
                << format_accuracy(r["accuracy"]["test"]) << '\n';
    } else if (*label) {
      Taxonomy t;
      load_taxonomy(label_corpus.taxonomy, t);
      Corpus c;
      load_corpus(label_corpus.transcripts, label_corpus.annotations, t.get(), c);
      Model m;
      check(chatact_model_load(label_model.c_str(), m.out()));
      const auto windows = maybe_read(label_windows);
      const auto emissions = maybe_read(label_emissions);
      check(chatact_model_label(m.get(), c.get(), t.get(), c_str_or_null(windows), c_str_or_null(emissions)));
      char* out = nullptr;
      check(chatact_corpus_labeled(c.get(), &out));
      write_text(label_out, take(out));
      if (!label_ann_out.empty()) {
        check(chatact_corpus_annotations(c.get(), &out));
        write_text(label_ann_out, take(out));
      }
    } else if (*eval) {
      Taxonomy t;
      load_taxonomy(eval_corpus.taxonomy, t);
      Corpus c;
      load_corpus(eval_corpus.transcripts, eval_corpus.annotations, t.get(), c);
      Model m;
      check(chatact_model_load(eval_model.c_str(), m.out()));
      const auto windows = maybe_read(eval_windows);
      const auto emissions = maybe_read(eval_emissions);
      const json o = {{"partition", eval_partition}, {"split_seed", eval_split_seed}};
      char* out = nullptr;
      check(chatact_model_evaluate(m.get(), c.get(), t.get(), c_str_or_null(windows), c_str_or_null(emissions),
                                   o.dump().c_str(), &out));
      const json e = json::parse(take(out));
      if (!eval_out.empty()) write_text(eval_out, e.dump(2) + "\n");
      if (eval_json) {
        std::cout << e.dump(2) << '\n';
      } else {
        std::cout << "accuracy " << format_accuracy(e["accuracy"]) << " (" << e["correct"] << "/" << e["labeled"]
                  << ")\n";
        std::printf("%-28s %9s %9s %8s\n", "label", "precision", "recall", "support");
        for (std::size_t i = 0; i < e["labels"].size(); ++i) {
          std::printf("%-28s %9s %9s %8zu\n", e["labels"][i].get<std::string>().c_str(),
                      format_accuracy(e["precision"][i]).c_str(), format_accuracy(e["recall"][i]).c_str(),
                      e["support"][i].get<std::size_t>());
        }
      }
    } else if (*vt) {
      Taxonomy t;
      load_taxonomy(vt_corpus.taxonomy, t);
      Corpus c;
      load_corpus(vt_corpus.transcripts, vt_corpus.annotations, t.get(), c);
      Baseline b;
      if (!vt_baseline.empty()) {
        check(chatact_baseline_load(vt_baseline.c_str(), b.out()));
      } else {
        json o = {{"seed", vt_seed}};
        if (vt_epochs) o["epochs"] = *vt_epochs;
        check(chatact_baseline_train(c.get(), t.get(), o.dump().c_str(), b.out()));
      }
      if (!vt_baseline_out.empty()) check(chatact_baseline_save(b.get(), vt_baseline_out.c_str()));
      char* js = nullptr;
      char* text = nullptr;
      check(chatact_validate_taxonomy(b.get(), c.get(), t.get(), vt_mode.c_str(), &js, &text));
      const std::string j = take(js);
      std::cout << take(text);
      if (!vt_out.empty()) write_text(vt_out, j);
    } else if (*metrics) {
      Taxonomy t;
      load_taxonomy(metrics_taxonomy, t);
      const std::string labeled = read_text(metrics_in);
      const auto config = maybe_read(metrics_config);
      char* js = nullptr;
      char* text = nullptr;
      check(chatact_metrics_report(labeled.c_str(), t.get(), c_str_or_null(config), &js, &text));
      const std::string j = take(js), tx = take(text);
      write_text(metrics_out, metrics_format == "json" ? j : tx);
    } else if (*stats) {
      Taxonomy t;
      load_taxonomy(stats_corpus.taxonomy, t);
      Corpus c;
      load_corpus(stats_corpus.transcripts, stats_corpus.annotations, t.get(), c);
      json o = {{"seed", stats_seed}};
      stats_seg.into(o);
      const auto windows = maybe_read(stats_windows);
      char* out = nullptr;
      check(chatact_corpus_stats(c.get(), t.get(), c_str_or_null(windows), o.dump().c_str(), &out));
      const json s = json::parse(take(out));
      if (!stats_out.empty()) write_text(stats_out, s.dump(2) + "\n");
      if (stats_json) {
        std::cout << s.dump(2) << '\n';
      } else {
        std::printf("%-28s %8s %8s %8s %8s\n", "label", "all", "train", "dev", "test");
        const auto& labels = s["all"]["labels"];
        for (std::size_t i = 0; i < labels.size(); ++i) {
          std::printf("%-28s", labels[i].get<std::string>().c_str());
          for (const char* part : {"all", "train", "dev", "test"}) {
            std::printf(" %7.2f%%", 100.0 * s[part]["proportions"][i].get<double>());
          }
          std::printf("\n");
        }
        std::printf("%-28s", "labeled sentences");
        for (const char* part : {"all", "train", "dev", "test"}) std::printf(" %8zu", s[part]["labeled"].get<std::size_t>());
        std::printf("\n");
      }
    } else if (*serve) {
      Taxonomy t;
      load_taxonomy(serve_taxonomy, t);
      Store s;
      check(chatact_store_open(serve_store.c_str(), t.get(), s.out()));
      if (!serve_corpus.empty()) {
        Corpus c;
        load_corpus(serve_corpus, serve_annotations, t.get(), c);
        check(chatact_store_add_corpus(s.get(), c.get()));
      }
      for (const auto& path : serve_models) {
        Model m;
        check(chatact_model_load(path.c_str(), m.out()));
        char* id = nullptr;
        check(chatact_store_add_model(s.get(), m.get(), nullptr, &id));
        std::cerr << "model " << take(id) << '\n';
      }
      std::cerr << "serving " << serve_store << " on " << serve_bind << '\n';
      check(chatact_serve(s.get(), serve_bind.c_str()));
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << chatact_status_name(f.status) << ": " << f.message << '\n';
    return f.status == CHATACT_E_INVALID_ARGUMENT ? kExitUsage : kExitData;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
