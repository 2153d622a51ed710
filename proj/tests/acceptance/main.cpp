// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "chatact/baseline.hpp"
#include "chatact/corpus.hpp"
#include "chatact/crf.hpp"
#include "chatact/labeler.hpp"
#include "chatact/metrics.hpp"
#include "chatact/segmentation.hpp"
#include "chatact/split.hpp"
#include "chatact/synthetic.hpp"
#include "chatact/taxonomy.hpp"
#include "chatact/util.hpp"
#include "chatact/validation.hpp"

using namespace chatact;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  ss << v;
  return ss.str();
}

// ---- CRF exactness -------------------------------------------------------

void random_chain(Rng& rng, crf::ChainParams& p, crf::Emissions& e) {
  for (auto& v : p.transitions) v = rng.uniform(-2, 2);
  for (auto& v : p.start) v = rng.uniform(-2, 2);
  for (auto& v : p.end) v = rng.uniform(-2, 2);
  for (auto& v : e.scores) v = rng.uniform(-3, 3);
}

// Every label sequence, smallest first in left-to-right lexicographic order.
void enumerate(std::size_t n, std::size_t L, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> seq(n, 0);
  while (true) {
    visit(seq);
    std::size_t i = n;
    while (i > 0 && ++seq[i - 1] == L) seq[--i] = 0;
    if (i == 0) return;
  }
}

double brute_score(const crf::ChainParams& p, const crf::Emissions& e, const std::vector<std::size_t>& y) {
  double s = p.start[y.front()] + p.end[y.back()];
  for (std::size_t i = 0; i < y.size(); ++i) {
    s += e(i, y[i]);
    if (i > 0) s += p.transitions[y[i - 1] * p.num_labels + y[i]];
  }
  return s;
}

Outcome crf_correctness() {
  Outcome o;
  Rng rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(5);
    const std::size_t L = 1 + rng.below(6);
    crf::ChainParams p(L);
    crf::Emissions e(n, L);
    random_chain(rng, p, e);

    std::vector<double> scores;
    std::vector<std::size_t> best;
    double best_score = -INFINITY;
    enumerate(n, L, [&](const std::vector<std::size_t>& y) {
      const double s = brute_score(p, e, y);
      scores.push_back(s);
      if (s > best_score) {  // strict: the earliest (smallest) sequence keeps ties
        best_score = s;
        best = y;
      }
    });
    const double mx = *std::max_element(scores.begin(), scores.end());
    double acc = 0.0;
    for (double s : scores) acc += std::exp(s - mx);
    const double log_z = mx + std::log(acc);

    const auto decoded = crf::viterbi(p, e);
    if (decoded.labels != best) o.fail("viterbi differs from enumeration on trial " + std::to_string(trial));
    const double diff = std::abs(crf::log_partition(p, e) - log_z);
    worst = std::max(worst, diff);
    if (diff > 1e-9) o.fail("log partition off by " + std::to_string(diff) + " on trial " + std::to_string(trial));
  }
  if (o.pass) o.detail = "200 models, max |logZ diff| " + std::to_string(worst);
  return o;
}

// ---- gradient check ------------------------------------------------------

Outcome gradient_check() {
  Outcome o;
  Rng rng(77);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t L = 2 + rng.below(3);
    FeatureConfig f;
    f.dimension_bits = 3;
    std::vector<std::string> labels;
    for (std::size_t y = 0; y < L; ++y) labels.push_back("y" + std::to_string(y));
    SequenceModel model(labels, f, "tiny");
    for (auto& v : model.emission_weights()) v = rng.uniform(-1, 1);
    for (auto& v : model.chain().transitions) v = rng.uniform(-1, 1);
    for (auto& v : model.chain().start) v = rng.uniform(-1, 1);
    for (auto& v : model.chain().end) v = rng.uniform(-1, 1);

    std::vector<LabeledWindow> windows(1 + rng.below(3));
    for (auto& w : windows) {
      const std::size_t n = 1 + rng.below(4);
      for (std::size_t i = 0; i < n; ++i) {
        FeatureVector fv;
        fv.dimension = f.dimension();
        for (std::uint32_t k = 0; k < f.dimension(); ++k) {
          if (rng.below(2)) {
            fv.indices.push_back(k);
            fv.values.push_back(rng.uniform(-1, 1));
          }
        }
        w.features.push_back(fv);
        w.gold.push_back(rng.below(4) == 0 ? -1 : static_cast<int>(rng.below(L)));
        w.sentence_ids.push_back("s" + std::to_string(i));
      }
    }
    const double l2 = rng.uniform(0.0, 0.1);
    ModelGradient g;
    objective(model, windows, l2, &g);
    const double eps = 1e-5;
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + eps;
      const double up = objective(model, windows, l2);
      param = saved - eps;
      const double down = objective(model, windows, l2);
      param = saved;
      const double numeric = (up - down) / (2 * eps);
      const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, rel);
      ++checked;
      if (rel > 1e-4) o.fail("relative error " + std::to_string(rel) + " on instance " + std::to_string(inst));
    };
    for (std::size_t k = 0; k < model.emission_weights().size(); ++k) check(model.emission_weights()[k], g.emission[k]);
    for (std::size_t k = 0; k < L * L; ++k) check(model.chain().transitions[k], g.chain.transitions[k]);
    for (std::size_t y = 0; y < L; ++y) {
      check(model.chain().start[y], g.chain.start[y]);
      check(model.chain().end[y], g.chain.end[y]);
    }
  }
  if (o.pass) o.detail = std::to_string(checked) + " partials, max rel err " + std::to_string(worst);
  return o;
}

// ---- marginals -----------------------------------------------------------

Outcome marginal_normalization() {
  Outcome o;
  Rng rng(31337);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const std::size_t L = 1 + rng.below(18);
    crf::ChainParams p(L);
    crf::Emissions e(n, L);
    random_chain(rng, p, e);
    if (trial % 7 == 0) {
      for (auto& v : e.scores) v *= 30;  // sharp distributions
    }
    std::vector<int> allowed;
    if (trial % 2) {
      for (std::size_t i = 0; i < n; ++i) allowed.push_back(rng.below(3) == 0 ? static_cast<int>(rng.below(L)) : -1);
    }
    const auto post = crf::forward_backward(p, e, allowed);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t y = 0; y < L; ++y) s += post.node[i * L + y];
      worst = std::max(worst, std::abs(s - 1.0));
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < L * L; ++k) s += post.edge[i * L * L + k];
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  if (worst > 1e-9) o.fail("marginal sum off by " + std::to_string(worst));
  o.detail = o.pass ? "2000 windows, max |sum - 1| " + std::to_string(worst) : o.detail;
  return o;
}

// ---- segmentation --------------------------------------------------------

Dialogue fuzz_dialogue(Rng& rng, int index) {
  std::vector<Message> ms;
  const std::size_t count = rng.below(40);
  const std::size_t speakers = 1 + rng.below(5);
  std::int64_t t = 1600000000;
  for (std::size_t i = 0; i < count; ++i) {
    std::string text;
    const std::size_t sentences = 1 + rng.below(4);
    for (std::size_t k = 0; k < sentences; ++k) text += "Line " + std::to_string(k) + ". ";
    t += static_cast<std::int64_t>(rng.below(3)) == 0 ? static_cast<std::int64_t>(rng.below(3 * 3600))
                                                     : static_cast<std::int64_t>(rng.below(300));
    ms.push_back(Message{"m" + std::to_string(i), "S" + std::to_string(rng.below(speakers)),
                         Timestamp(std::chrono::seconds(t)), text, "fz" + std::to_string(index)});
  }
  return Dialogue::build("fz" + std::to_string(index), ms);
}

std::string check_windows(const Dialogue& d, const std::vector<Window>& ws, const SegmentOptions& opt) {
  std::size_t next = 0;
  for (const auto& w : ws) {
    if (w.begin != next || w.end <= w.begin || w.end > d.sentences().size()) return "not a partition";
    if (w.sentence_ids.size() != w.size()) return "id list length";
    for (std::size_t s = w.begin; s < w.end; ++s) {
      if (w.sentence_ids[s - w.begin] != d.sentences()[s].id) return "id list order";
    }
    next = w.end;
    const std::size_t first_msg = d.message_index_of(w.begin);
    const std::size_t last_msg = d.message_index_of(w.end - 1);
    if (d.first_sentence(first_msg) != w.begin) return "window starts inside a message";
    if (d.first_sentence(last_msg) + d.sentence_count(last_msg) != w.end) return "window ends inside a message";
    // Closes no later than the message that reaches the line limit.
    if (opt.strategy != Strategy::kMessage && w.end - d.first_sentence(last_msg) < w.size() &&
        d.first_sentence(last_msg) - w.begin >= opt.line_limit) {
      return "window overran the line limit";
    }
    if (opt.strategy == Strategy::kMessage && first_msg != last_msg) return "message window spans messages";
    if (opt.strategy == Strategy::kTime) {
      for (std::size_t m = first_msg + 1; m <= last_msg; ++m) {
        if (d.messages()[m].timestamp - d.messages()[m - 1].timestamp > opt.gap_limit) return "gap limit exceeded";
      }
    }
    if (opt.strategy == Strategy::kSpeaker) {
      std::set<std::string> who;
      for (std::size_t m = first_msg; m <= last_msg; ++m) who.insert(d.messages()[m].speaker);
      if (who.size() > opt.speaker_limit) return "speaker limit exceeded";
    }
  }
  if (next != d.sentences().size()) return "sentences left uncovered";
  return "";
}

Outcome segmentation_suite() {
  Outcome o;
  Rng rng(4242);
  std::size_t windows = 0;
  for (int i = 0; i < 10000 && o.pass; ++i) {
    const Dialogue d = fuzz_dialogue(rng, i);
    const std::size_t limit = 1 + rng.below(15);
    const std::vector<SegmentOptions> configs = {
        {Strategy::kMessage, 1},
        {Strategy::kStatic, limit},
        {Strategy::kTime, limit, std::chrono::seconds(60 + rng.below(7200))},
        {Strategy::kSpeaker, limit, std::chrono::hours(1), 2},
    };
    for (const auto& opt : configs) {
      const auto ws = segment(d, opt);
      windows += ws.size();
      const std::string err = check_windows(d, ws, opt);
      if (!err.empty()) {
        o.fail(std::string(to_string(opt.strategy)) + " on dialogue " + std::to_string(i) + ": " + err);
        break;
      }
    }
  }
  const Dialogue fig = parse_transcript(read_file(std::string(CHATACT_FIXTURE_DIR) + "/figure2.jsonl"), "fig2").front();
  const auto sp = segment_speaker(fig, 10, 2);
  std::vector<std::vector<std::string>> groups;
  for (const auto& w : sp) {
    std::vector<std::string> who;
    for (std::size_t s = w.begin; s < w.end; ++s) {
      const auto& speaker = fig.message_of(s).speaker;
      if (std::find(who.begin(), who.end(), speaker) == who.end()) who.push_back(speaker);
    }
    groups.push_back(who);
  }
  if (groups != std::vector<std::vector<std::string>>{{"PG", "BR"}, {"ER"}}) o.fail("speaker split of the fixture");
  if (o.pass) o.detail = "10000 dialogues, " + std::to_string(windows) + " windows; fixture split [PG,BR],[ER]";
  return o;
}

// ---- synthetic learning --------------------------------------------------

struct SeedResult {
  double majority = 0, baseline = 0, one_line = 0, ten_line = 0;
};

SeedResult learning_run(std::uint64_t seed, const Taxonomy& tax) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  const auto corpus = generate_corpus(cfg, tax);
  const auto& dialogues = corpus.dialogues;

  std::vector<Window> ten, one;
  for (const auto& d : dialogues) {
    auto a = segment_static(d, 10);
    auto b = segment_message(d);
    ten.insert(ten.end(), a.begin(), a.end());
    one.insert(one.end(), b.begin(), b.end());
  }
  const auto split = split_corpus(ten, SplitRatios{}, seed);
  // Message windows follow the partition of the 10-line window holding them.
  enum Part { kTrain, kDev, kTest };
  std::map<std::pair<std::string, std::size_t>, Part> part_of;
  auto mark = [&](const std::vector<std::size_t>& idx, Part p) {
    for (auto i : idx) part_of[{ten[i].dialogue_id, ten[i].begin}] = p;
  };
  mark(split.train, kTrain);
  mark(split.dev, kDev);
  mark(split.test, kTest);
  auto part_of_sentence = [&](const Window& w) {
    auto it = part_of.upper_bound({w.dialogue_id, w.begin});
    --it;
    return it->second;
  };
  std::vector<Window> ten_train, ten_dev, one_train, one_dev;
  for (auto i : split.train) ten_train.push_back(ten[i]);
  for (auto i : split.dev) ten_dev.push_back(ten[i]);
  for (const auto& w : one) {
    const Part p = part_of_sentence(w);
    if (p == kTrain) one_train.push_back(w);
    if (p == kDev) one_dev.push_back(w);
  }

  TrainConfig tc;
  tc.seed = seed;
  const auto& labels = tax.reduced_set();
  auto run = [&](const std::vector<Window>& tr, const std::vector<Window>& dv) {
    const auto a = prepare_windows(dialogues, tr, tax, labels, tc.features);
    const auto b = prepare_windows(dialogues, dv, tax, labels, tc.features);
    const auto result = train_crf(a, b, tax, tc);
    return evaluate(result.model, b).accuracy;
  };

  SeedResult r;
  r.ten_line = run(ten_train, ten_dev);
  r.one_line = run(one_train, one_dev);

  // Majority class and the bag-of-n-grams baseline over the same sentences.
  std::map<std::string, std::size_t> index;
  for (std::size_t y = 0; y < labels.size(); ++y) index[labels[y]] = y;
  auto examples = [&](const std::vector<Window>& ws) {
    std::vector<BaselineExample> out;
    for (const auto& w : ws) {
      for (const Sentence* s : window_sentences(dialogues, w)) {
        if (s->gold_label) out.push_back({s->text, index.at(tax.collapse(*s->gold_label))});
      }
    }
    return out;
  };
  const auto train_ex = examples(ten_train);
  const auto dev_ex = examples(ten_dev);
  std::vector<std::size_t> counts(labels.size(), 0);
  for (const auto& e : train_ex) ++counts[e.label];
  const std::size_t majority = std::max_element(counts.begin(), counts.end()) - counts.begin();
  std::size_t hits = 0;
  for (const auto& e : dev_ex) hits += e.label == majority;
  r.majority = static_cast<double>(hits) / dev_ex.size();

  BaselineConfig bc;
  bc.seed = seed;
  r.baseline = baseline_accuracy(train_baseline(train_ex, labels, bc), dev_ex);
  return r;
}

Outcome synthetic_learning() {
  Outcome o;
  const Taxonomy& tax = Taxonomy::builtin();
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = learning_run(seed, tax);
    detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + " majority " + fmt(r.majority, 3) +
              " baseline " + fmt(r.baseline, 3) + " 1-line " + fmt(r.one_line, 3) + " 10-line " + fmt(r.ten_line, 3);
    if (!(r.baseline < r.one_line && r.one_line < r.ten_line)) o.fail("ordering broken for seed " + std::to_string(seed));
    if (r.ten_line < r.majority + 0.15) o.fail("10-line within 15 points of majority for seed " + std::to_string(seed));
  }
  o.detail = o.pass ? detail : o.detail + " [" + detail + "]";
  return o;
}

// ---- taxonomy validation -------------------------------------------------

Outcome taxonomy_validation() {
  Outcome o;
  const Taxonomy& tax = Taxonomy::builtin();
  const auto sentences = generate_clustered(1, tax);
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> index;
  for (const auto& [_, label] : sentences) {
    if (!index.count(label)) {
      index[label] = labels.size();
      labels.push_back(label);
    }
  }
  std::vector<BaselineExample> ex;
  for (const auto& [text, label] : sentences) ex.push_back({text, index[label]});
  BaselineConfig bc;
  bc.seed = 1;
  const auto model = train_baseline(ex, labels, bc);
  const auto set = compute_centroids(model, sentences, CentroidMode::kSentenceMean);
  const auto report = hierarchy_consistency_report(set.centroids, tax);
  if (!report.overall_mean) {
    o.fail("no overall mean");
    return o;
  }
  std::set<std::string> covered;
  for (const auto& c : report.classes) {
    covered.insert(c.top_level);
    if (!(c.mean_distance < *report.overall_mean)) {
      o.fail(c.top_level + " within-class mean " + fmt(c.mean_distance) + " >= overall " + fmt(*report.overall_mean));
    }
  }
  // Every top-level class with two or more labels must be in the report.
  std::map<std::string, std::size_t> members;
  for (const auto& c : set.centroids) ++members[tax.root(c.label)];
  for (const auto& [root, n] : members) {
    if (n >= 2 && !covered.count(root)) o.fail("class " + root + " missing from the report");
  }
  if (o.pass) {
    o.detail = std::to_string(report.classes.size()) + " classes below overall mean " + fmt(*report.overall_mean);
  }
  return o;
}

// ---- metrics -------------------------------------------------------------

std::optional<double> recompute(const MetricsReport& r, const Metric& m) {
  switch (m.unit) {
    case MetricUnit::kRatio:
      if (m.denominator_ids.empty()) return std::nullopt;
      return static_cast<double>(m.numerator_ids.size()) / m.denominator_ids.size();
    case MetricUnit::kPer100:
      if (r.frequencies.labeled == 0) return std::nullopt;
      return 100.0 * m.numerator_ids.size() / r.frequencies.labeled;
    case MetricUnit::kSeconds: {
      std::vector<double> lat;
      for (auto k : m.pairs) lat.push_back(r.pairs[k].latency->count() / 1e6);
      if (lat.empty()) return std::nullopt;
      std::sort(lat.begin(), lat.end());
      const std::size_t n = lat.size();
      return n % 2 ? lat[n / 2] : (lat[n / 2 - 1] + lat[n / 2]) / 2;
    }
  }
  return std::nullopt;
}

std::string consistency_error(const MetricsReport& r) {
  for (const auto& m : r.metrics) {
    const auto again = recompute(r, m);
    if (again.has_value() != m.value.has_value()) return r.scope + " " + m.name + " definedness";
    if (again && std::abs(*again - *m.value) > 1e-12) return r.scope + " " + m.name + " not recomputable";
  }
  return "";
}

Outcome metrics_fixture() {
  Outcome o;
  const auto golden = json::parse(read_file(std::string(CHATACT_FIXTURE_DIR) + "/metrics_golden.json"));
  const auto stream = parse_labeled(read_file(std::string(CHATACT_FIXTURE_DIR) + "/metrics_fixture.jsonl"));
  const auto r = build_report(stream, Taxonomy::builtin());

  if (r.frequencies.labeled != golden["labeled"].get<std::size_t>()) o.fail("labeled count");
  std::map<std::string, std::size_t> counts;
  for (const auto& [label, lc] : r.frequencies.labels) counts[label] = lc.count;
  if (counts != golden["label_counts"].get<std::map<std::string, std::size_t>>()) o.fail("label frequencies");

  if (r.pairs.size() != golden["pairs"].size()) o.fail("pair count");
  for (std::size_t k = 0; k < std::min(r.pairs.size(), golden["pairs"].size()); ++k) {
    const auto& g = golden["pairs"][k];
    const auto& p = r.pairs[k];
    const bool same = p.initiator_sentence_id == g["initiator"] && p.initiator_kind == g["kind"] &&
                      (g["responder"].is_null() ? !p.closed
                                                : p.closed && *p.responder_sentence_id == g["responder"] &&
                                                      p.latency->count() == g["latency"].get<std::int64_t>() * 1000000);
    if (!same) o.fail("pair " + std::to_string(k));
  }
  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  std::size_t compared = 0;
  for (const auto& [name, g] : golden["team"].items()) {
    const Metric& m = r.metric(name);
    ++compared;
    if (!m.value || *m.value != g["value"].get<double>()) o.fail(name + " value");
    if (m.low_signal != g["low_signal"].get<bool>()) o.fail(name + " low-signal flag");
    if (g.contains("numerator") && sorted(m.numerator_ids) != sorted(g["numerator"].get<std::vector<std::string>>())) {
      o.fail(name + " numerator evidence");
    }
    if (g.contains("denominator") &&
        sorted(m.denominator_ids) != sorted(g["denominator"].get<std::vector<std::string>>())) {
      o.fail(name + " denominator evidence");
    }
  }
  for (const auto& s : r.speakers) {
    const auto& g = golden["speakers"][s.scope.substr(std::string("speaker:").size())];
    for (const auto& [name, v] : g.items()) {
      if (name == "sentences" || name == "labeled") continue;
      const Metric& m = s.metric(name);
      if (v.is_null() ? m.value.has_value() : (!m.value || *m.value != v.get<double>())) o.fail(s.scope + " " + name);
    }
  }
  if (const auto err = consistency_error(r); !err.empty()) o.fail(err);
  for (const auto& s : r.speakers) {
    if (const auto err = consistency_error(s); !err.empty()) o.fail(err);
  }
  if (o.pass) o.detail = std::to_string(compared) + " team metrics, " + std::to_string(r.speakers.size()) +
                         " speakers, all recomputed from evidence";
  return o;
}

// ---- split protocol ------------------------------------------------------

std::vector<Run> runs_of(std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  std::vector<Run> out;
  for (auto i : idx) {
    if (!out.empty() && out.back().second == i) {
      ++out.back().second;
    } else {
      out.push_back({i, i + 1});
    }
  }
  return out;
}

Outcome split_protocol() {
  Outcome o;
  Rng rng(100);
  const SplitRatios ratios;
  for (std::uint64_t seed = 1; seed <= 100 && o.pass; ++seed) {
    const std::size_t n = 20 + rng.below(600);
    std::vector<Window> windows(n);
    for (std::size_t i = 0; i < n; ++i) windows[i].id = "w" + std::to_string(i);
    const auto s = split_corpus(windows, ratios, seed);
    const std::string tag = "seed " + std::to_string(seed) + " (" + std::to_string(n) + " windows): ";
    std::vector<int> owner(n, 0);
    for (const auto* part : {&s.train, &s.dev, &s.test}) {
      for (auto i : *part) {
        if (i >= n) {
          o.fail(tag + "index out of range");
        } else {
          ++owner[i];
        }
      }
    }
    if (std::any_of(owner.begin(), owner.end(), [](int c) { return c != 1; })) o.fail(tag + "not a partition");
    if (runs_of(s.dev).size() != 1) o.fail(tag + "dev is not one run");
    const auto test_runs = runs_of(s.test);
    // Two runs that happen to touch merge into one.
    if (test_runs.size() > 2 || s.test_runs.size() != 2 || test_runs.empty()) o.fail(tag + "test is not two runs");
    for (const auto& [part, ratio] : {std::pair{&s.train, ratios.train}, {&s.dev, ratios.dev}, {&s.test, ratios.test}}) {
      if (std::abs(static_cast<double>(part->size()) - ratio * n) > 1.0) o.fail(tag + "partition size off target");
    }
  }
  if (o.pass) o.detail = "100 seeds, 20-619 windows each";
  return o;
}

// ---- pipeline smoke ------------------------------------------------------

int sh(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome pipeline_smoke() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("chatact-accept-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const char* name) { return "'" + (dir / name).string() + "'"; };
  const std::string cli = std::string("'") + CHATACT_CLI_PATH + "'";
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"synth", cli + " synth --seed 1 --transcript-out " + p("raw.jsonl") + " --annotations-out " + p("raw_gold.jsonl")},
      {"ingest", cli + " ingest --in " + p("raw.jsonl") + " --annotations " + p("raw_gold.jsonl") + " --out " +
                     p("corpus.jsonl") + " --annotations-out " + p("gold.jsonl")},
      {"segment", cli + " segment --corpus " + p("corpus.jsonl") + " --line-limit 10 --out " + p("windows.jsonl")},
      {"train", cli + " train --corpus " + p("corpus.jsonl") + " --annotations " + p("gold.jsonl") + " --windows " +
                    p("windows.jsonl") + " --seed 1 --out " + p("model.bin") + " --report " + p("train.json")},
      {"label", cli + " label --model " + p("model.bin") + " --corpus " + p("corpus.jsonl") + " --out " +
                    p("labeled.jsonl")},
      {"metrics", cli + " metrics --in " + p("labeled.jsonl") + " --out " + p("report.json")},
  };
  for (const auto& [name, cmd] : steps) {
    if (const int code = sh(cmd); code != 0) {
      o.fail(name + " exited " + std::to_string(code));
      return o;
    }
  }
  try {
    const auto dialogues = parse_transcript(read_file((dir / "corpus.jsonl").string()), "x");
    const auto gold = parse_annotations(read_file((dir / "gold.jsonl").string()));
    const auto annotated = attach_annotations(dialogues, gold);
    const auto windows = parse_windows(read_file((dir / "windows.jsonl").string()), annotated);
    const auto model = SequenceModel::load((dir / "model.bin").string());
    const auto labeled = parse_labeled(read_file((dir / "labeled.jsonl").string()));
    const auto report = json::parse(read_file((dir / "report.json").string()));
    std::size_t sentences = 0;
    for (const auto& d : dialogues) sentences += d.sentences().size();
    if (labeled.size() != sentences) o.fail("labeled stream length");
    if (model.taxonomy_hash() != Taxonomy::builtin().hash()) o.fail("model taxonomy binding");
    if (report["metrics"].size() != 10) o.fail("metrics report shape");
    const auto train = json::parse(read_file((dir / "train.json").string()));
    if (o.pass) {
      o.detail = std::to_string(sentences) + " sentences, " + std::to_string(windows.size()) +
                 " windows, test accuracy " + fmt(train["accuracy"]["test"].get<double>(), 3);
    }
  } catch (const std::exception& e) {
    o.fail(std::string("artifact reload: ") + e.what());
  }
  fs::remove_all(dir);
  return o;
}

struct Criterion {
  const char* name;
  double budget_seconds;  // 0 when no runtime bound applies
  Outcome (*run)();
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"crf-correctness", 10, crf_correctness},
      {"gradient-check", 30, gradient_check},
      {"marginal-normalization", 0, marginal_normalization},
      {"segmentation-suite", 20, segmentation_suite},
      {"synthetic-learning", 300, synthetic_learning},
      {"taxonomy-validation", 0, taxonomy_validation},
      {"metrics-fixture", 0, metrics_fixture},
      {"split-protocol", 0, split_protocol},
      {"pipeline-smoke", 300, pipeline_smoke},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.fail("took " + fmt(secs, 1) + "s, budget " + fmt(c.budget_seconds, 0) + "s");
    }
    failures += !o.pass;
    std::printf("%s %s (%s; %.2fs)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
