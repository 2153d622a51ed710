#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "api_support.hpp"
#include "chatact/labeler.hpp"
#include "chatact/taxonomy.hpp"
#include "chatact/util.hpp"

using nlohmann::json;
using chatact::testing::run_cli;
using chatact::testing::TempDir;

namespace {

std::string q(const std::string& s) { return "'" + s + "'"; }

// Ten one-sentence messages with gold labels, a zero-weight model and an
// emission file that puts a +10 margin on the gold label for seven of them
// and on a wrong label for the other three.
struct EvaluateFixture {
  TempDir dir;
  std::string corpus = dir / "corpus.jsonl";
  std::string annotations = dir / "gold.jsonl";
  std::string model = dir / "zero.model";
  std::string emissions = dir / "emissions.jsonl";

  EvaluateFixture() {
    const chatact::Taxonomy& tax = chatact::Taxonomy::builtin();
    const std::vector<std::string> gold = {"Query",  "Inform", "Acknowledge", "Social", "Request",
                                           "Assign", "Propose", "Reject",     "Code",   "Inform-InResponse"};
    std::string tr, ann;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const std::string id = "m" + std::to_string(i);
      tr += json({{"dialogue_id", "fx"},
                  {"id", id},
                  {"speaker", i % 2 ? "B" : "A"},
                  {"ts", "2021-03-01T10:0" + std::to_string(i) + ":00Z"},
                  {"text", "sentence number " + std::to_string(i)}})
                .dump() +
            "\n";
      ann += json({{"sentence_id", id + "#0"},
                   {"label", gold[i]},
                   {"annotator", "fixture"},
                   {"created_at", "2021-03-02T00:00:00Z"},
                   {"source", "human"}})
                 .dump() +
             "\n";
    }
    chatact::FeatureConfig f;
    f.dimension_bits = 8;
    const chatact::SequenceModel m(tax.reduced_set(), f, tax.hash());
    m.save(model);

    std::string em = json({{"taxonomy_hash", tax.hash()}, {"labels", m.label_set()}}).dump() + "\n";
    for (std::size_t i = 0; i < gold.size(); ++i) {
      std::vector<double> scores(m.num_labels(), 0.0);
      const std::size_t right = *m.label_index(gold[i]);
      scores[i < 7 ? right : (right + 1) % m.num_labels()] = 10.0;
      em += json({{"sentence_id", "m" + std::to_string(i) + "#0"}, {"scores", scores}}).dump() + "\n";
    }
    chatact::write_file(corpus, tr);
    chatact::write_file(annotations, ann);
    chatact::write_file(emissions, em);
  }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
  auto r = run_cli("frobnicate");
  CHECK(r.code == 1);
  CHECK(r.out.find("Usage") != std::string::npos);
  r = run_cli("");
  CHECK(r.code == 1);
  r = run_cli("metrics");
  CHECK(r.code == 1);
  CHECK(r.out.find("--in") != std::string::npos);
  r = run_cli("metrics --in x --format yaml");
  CHECK(r.code == 1);
  r = run_cli("--help");
  CHECK(r.code == 0);
  for (const char* sub : {"ingest", "segment", "train", "label", "evaluate", "validate-taxonomy", "metrics", "stats",
                          "serve"}) {
    CHECK_MESSAGE(r.out.find(sub) != std::string::npos, sub);
  }
}

TEST_CASE("data errors exit 2") {
  TempDir dir;
  auto r = run_cli("metrics --in " + q(dir / "missing.jsonl"));
  CHECK(r.code == 2);
  chatact::write_file(dir / "tr.jsonl",
                      R"({"id":"m1","speaker":"A","ts":"2021-03-01T10:00:00Z","text":"Hello there."})"
                      "\n");
  chatact::write_file(dir / "bad.jsonl",
                      R"({"sentence_id":"m1#0","label":"NotALabel","annotator":"x","created_at":"2021-03-01T10:00:00Z"})"
                      "\n");
  r = run_cli("ingest --in " + q(dir / "tr.jsonl") + " --annotations " + q(dir / "bad.jsonl") + " --out " +
              q(dir / "out.jsonl"));
  CHECK(r.code == 2);
  CHECK(r.out.find("NotALabel") != std::string::npos);
  chatact::write_file(dir / "broken.jsonl", "{\"speaker\": \n");
  r = run_cli("ingest --in " + q(dir / "broken.jsonl") + " --out " + q(dir / "out.jsonl"));
  CHECK(r.code == 2);
}

TEST_CASE("evaluate reports 7 of 10 on the emission fixture") {
  EvaluateFixture fx;
  const auto r = run_cli("evaluate --model " + q(fx.model) + " --corpus " + q(fx.corpus) + " --annotations " +
                         q(fx.annotations) + " --emissions " + q(fx.emissions) + " --out " + q(fx.dir / "e.json"));
  CHECK(r.code == 0);
  CHECK(r.out.find("accuracy 0.7000 (7/10)") != std::string::npos);
  const json e = json::parse(chatact::read_file(fx.dir / "e.json"));
  CHECK(e["accuracy"] == 0.7);
  CHECK(e["correct"] == 7);
}

TEST_CASE("metrics subcommand reproduces the golden report") {
  TempDir dir;
  const std::string in = std::string(CHATACT_FIXTURE_DIR) + "/metrics_fixture.jsonl";
  auto r = run_cli("metrics --in " + q(in) + " --out " + q(dir / "report.json"));
  REQUIRE(r.code == 0);
  const json report = json::parse(chatact::read_file(dir / "report.json"));
  const json golden = json::parse(chatact::read_file(std::string(CHATACT_FIXTURE_DIR) + "/metrics_golden.json"));
  std::size_t seen = 0;
  for (const auto& m : report["metrics"]) {
    const auto& want = golden["team"][m["name"].get<std::string>()];
    CHECK_MESSAGE(m["value"].get<double>() == doctest::Approx(want["value"].get<double>()), m["name"]);
    ++seen;
  }
  CHECK(seen == 10);
  r = run_cli("metrics --in " + q(in) + " --format text");
  CHECK(r.code == 0);
  CHECK(r.out.find("loop_closure_rate") != std::string::npos);
}

TEST_CASE("pipeline artifacts reload and training is seed-deterministic") {
  TempDir dir;
  auto ok = [](const chatact::testing::RunResult& r) {
    INFO(r.out);
    REQUIRE(r.code == 0);
  };
  ok(run_cli("synth --seed 2 --sentences 600 --transcript-out " + q(dir / "tr.jsonl") + " --annotations-out " +
             q(dir / "gold.jsonl")));
  const std::string corpus = " --corpus " + q(dir / "tr.jsonl") + " --annotations " + q(dir / "gold.jsonl");
  ok(run_cli("segment" + corpus + " --strategy speaker --out " + q(dir / "w.jsonl")));
  for (const char* name : {"a.model", "b.model"}) {
    ok(run_cli("train" + corpus + " --windows " + q(dir / "w.jsonl") + " --seed 5 --epochs 4 --dimension-bits 14" +
               " --out " + q(dir / name)));
  }
  CHECK(chatact::read_file(dir / "a.model") == chatact::read_file(dir / "b.model"));
  const auto model = chatact::SequenceModel::load(dir / "a.model");
  CHECK(model.segmentation().strategy == chatact::Strategy::kSpeaker);

  ok(run_cli("label --model " + q(dir / "a.model") + " --corpus " + q(dir / "tr.jsonl") + " --out " +
             q(dir / "labeled.jsonl") + " --annotations-out " + q(dir / "pred.jsonl")));
  ok(run_cli("metrics --in " + q(dir / "labeled.jsonl") + " --out " + q(dir / "m.json")));
  CHECK(json::parse(chatact::read_file(dir / "m.json"))["metrics"].size() == 10);
  // The prediction records attach back onto the transcript.
  ok(run_cli("stats --corpus " + q(dir / "tr.jsonl") + " --annotations " + q(dir / "gold.jsonl") + " --json"));
  ok(run_cli("ingest --in " + q(dir / "tr.jsonl") + " --annotations " + q(dir / "pred.jsonl") + " --out " +
             q(dir / "again.jsonl")));
  CHECK(chatact::read_file(dir / "again.jsonl") == chatact::read_file(dir / "tr.jsonl"));

  const auto r = run_cli("validate-taxonomy" + corpus + " --seed 1 --epochs 2 --out " + q(dir / "v.json"));
  CHECK(r.code == 0);
  CHECK(json::parse(chatact::read_file(dir / "v.json")).contains("rows"));
}
