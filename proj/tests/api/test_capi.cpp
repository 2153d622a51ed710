#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "api_support.hpp"
#include "chatact/chatact.h"

using nlohmann::json;
using chatact::testing::TempDir;

namespace {

const char* kTranscript =
    R"({"dialogue_id":"t","id":"m1","speaker":"A","ts":"2021-03-01T10:00:00Z","text":"Can you review PR 12?"}
{"dialogue_id":"t","id":"m2","speaker":"B","ts":"2021-03-01T10:01:00Z","text":"Sure. On it now."}
{"dialogue_id":"t","id":"m3","speaker":"A","ts":"2021-03-01T10:02:00Z","text":"Thanks!"}
)";

std::string record(const std::string& sentence, const std::string& label) {
  return json({{"sentence_id", sentence},
               {"label", label},
               {"annotator", "t"},
               {"created_at", "2021-03-02T00:00:00Z"},
               {"source", "human"}})
             .dump() +
         "\n";
}

std::string take(char* p) {
  std::string s = p ? p : "";
  chatact_free_string(p);
  return s;
}

struct Fixture {
  chatact_taxonomy* tax = nullptr;
  chatact_corpus* corpus = nullptr;
  Fixture() {
    REQUIRE(chatact_taxonomy_builtin(&tax) == CHATACT_OK);
    REQUIRE(chatact_corpus_new(&corpus) == CHATACT_OK);
    REQUIRE(chatact_corpus_add_transcript(corpus, kTranscript, "t") == CHATACT_OK);
  }
  ~Fixture() {
    chatact_corpus_free(corpus);
    chatact_taxonomy_free(tax);
  }
  json summary() const {
    char* s = nullptr;
    REQUIRE(chatact_corpus_summary(corpus, &s) == CHATACT_OK);
    return json::parse(take(s));
  }
};

}  // namespace

TEST_CASE("status reporting") {
  CHECK(std::strlen(chatact_version()) > 0);
  CHECK(std::string(chatact_status_name(CHATACT_E_CONFLICT)) == "conflict");
  chatact_taxonomy* t = nullptr;
  CHECK(chatact_taxonomy_parse("[taxonomy]\nname = 1\n", &t) != CHATACT_OK);
  CHECK(t == nullptr);
  CHECK(std::strlen(chatact_last_error()) > 0);
  CHECK(chatact_taxonomy_builtin(nullptr) == CHATACT_E_INVALID_ARGUMENT);
  CHECK(std::string(chatact_last_error()).find("NULL") != std::string::npos);
  REQUIRE(chatact_taxonomy_builtin(&t) == CHATACT_OK);
  CHECK(std::string(chatact_last_error()).empty());
  chatact_taxonomy_free(t);
  chatact_taxonomy_free(nullptr);
  chatact_corpus_free(nullptr);
  chatact_server_stop(nullptr);
  CHECK(chatact_taxonomy_load("/nonexistent/tax.toml", &t) == CHATACT_E_IO);
}

TEST_CASE("taxonomy handle") {
  chatact_taxonomy* t = nullptr;
  REQUIRE(chatact_taxonomy_builtin(&t) == CHATACT_OK);
  char* hash = nullptr;
  char* desc = nullptr;
  REQUIRE(chatact_taxonomy_hash(t, &hash) == CHATACT_OK);
  REQUIRE(chatact_taxonomy_describe(t, &desc) == CHATACT_OK);
  const std::string h = take(hash);
  const json d = json::parse(take(desc));
  CHECK(h.size() == 64);
  CHECK(d["hash"] == h);
  CHECK(d["reduced_set"].size() == 18);
  chatact_taxonomy_free(t);
}

TEST_CASE("corpus ingest and annotation") {
  Fixture f;
  CHECK(f.summary()["sentences"] == 4);
  CHECK(chatact_corpus_add_transcript(f.corpus, kTranscript, "t") == CHATACT_E_DATA);

  SUBCASE("valid records fold in") {
    const std::string recs = record("m1#0", "Request-Attention") + record("m2", "Acknowledge-Accept");
    REQUIRE(chatact_corpus_attach(f.corpus, f.tax, recs.c_str()) == CHATACT_OK);
    CHECK(f.summary()["gold_labeled"] == 3);
    char* ann = nullptr;
    REQUIRE(chatact_corpus_annotations(f.corpus, &ann) == CHATACT_OK);
    CHECK(take(ann) == recs);
  }
  SUBCASE("failures leave the corpus unchanged") {
    const std::string good = record("m1#0", "Request-Attention");
    CHECK(chatact_corpus_attach(f.corpus, f.tax, (good + record("m2#0", "NotALabel")).c_str()) == CHATACT_E_DATA);
    CHECK(chatact_corpus_attach(f.corpus, f.tax, (good + record("ghost", "Query")).c_str()) == CHATACT_E_DANGLING);
    CHECK(chatact_corpus_attach(f.corpus, f.tax, "{broken\n") == CHATACT_E_PARSE);
    CHECK(f.summary()["gold_labeled"] == 0);
    CHECK(f.summary()["annotation_records"] == 0);
  }
  SUBCASE("transcript round trip") {
    char* tr = nullptr;
    REQUIRE(chatact_corpus_transcript(f.corpus, &tr) == CHATACT_OK);
    const std::string text = take(tr);
    chatact_corpus* again = nullptr;
    REQUIRE(chatact_corpus_new(&again) == CHATACT_OK);
    REQUIRE(chatact_corpus_add_transcript(again, text.c_str(), "x") == CHATACT_OK);
    REQUIRE(chatact_corpus_transcript(again, &tr) == CHATACT_OK);
    CHECK(take(tr) == text);
    chatact_corpus_free(again);
  }
}

TEST_CASE("slack import") {
  chatact_corpus* c = nullptr;
  REQUIRE(chatact_corpus_new(&c) == CHATACT_OK);
  const std::string day = R"([
    {"type":"message","user":"U1","text":"Deploy is done.","ts":"1614592800.000100"},
    {"type":"message","subtype":"channel_join","user":"U2","text":"joined","ts":"1614592801.000100"},
    {"type":"message","user":"U2","text":"Thanks!","ts":"1614592860.000200"}
  ])";
  const char* days[] = {day.c_str()};
  char* info = nullptr;
  REQUIRE(chatact_corpus_add_slack(c, days, 1, R"({"U1":"PG","U2":"BR"})", "general", &info) == CHATACT_OK);
  CHECK(json::parse(take(info))["dropped"] == 1);
  char* labeled = nullptr;
  REQUIRE(chatact_corpus_labeled(c, &labeled) == CHATACT_OK);
  const std::string l = take(labeled);
  CHECK(l.find("\"PG\"") != std::string::npos);
  CHECK(l.find("\"BR\"") != std::string::npos);
  chatact_corpus_free(c);
}

TEST_CASE("options are checked") {
  Fixture f;
  char* out = nullptr;
  CHECK(chatact_corpus_segment(f.corpus, R"({"strategy":"speaker","speaker_limit":1})", &out) == CHATACT_OK);
  const std::string windows = take(out);
  CHECK(std::count(windows.begin(), windows.end(), '\n') == 3);
  CHECK(chatact_corpus_segment(f.corpus, R"({"stratgey":"static"})", &out) == CHATACT_E_INVALID_ARGUMENT);
  CHECK(std::string(chatact_last_error()).find("stratgey") != std::string::npos);
  CHECK(chatact_corpus_segment(f.corpus, "[1]", &out) == CHATACT_E_INVALID_ARGUMENT);
  CHECK(chatact_corpus_segment(f.corpus, R"({"line_limit":"ten"})", &out) == CHATACT_E_INVALID_ARGUMENT);
  CHECK(chatact_corpus_segment(f.corpus, R"({"strategy":"weekly"})", &out) == CHATACT_E_DATA);
  chatact_model* m = nullptr;
  CHECK(chatact_model_train(f.corpus, f.tax, nullptr, "{}", &m, nullptr) == CHATACT_E_INVALID_ARGUMENT);
  CHECK(m == nullptr);
}

TEST_CASE("synthesize, train, label, evaluate") {
  chatact_taxonomy* t = nullptr;
  REQUIRE(chatact_taxonomy_builtin(&t) == CHATACT_OK);
  chatact_corpus* c = nullptr;
  REQUIRE(chatact_synthesize(t, R"({"seed":3,"sentences":600,"dialogue_sentences":100})", &c) == CHATACT_OK);
  char* s = nullptr;
  REQUIRE(chatact_corpus_summary(c, &s) == CHATACT_OK);
  const json summary = json::parse(take(s));
  CHECK(summary["sentences"] == 600);
  CHECK(summary["gold_labeled"] == 600);

  chatact_model* m = nullptr;
  char* report = nullptr;
  REQUIRE(chatact_model_train(c, t, nullptr, R"({"seed":1,"max_epochs":5,"dimension_bits":14})", &m, &report) ==
          CHATACT_OK);
  const json r = json::parse(take(report));
  CHECK(r["history"].size() <= 5);
  CHECK(r["accuracy"]["train"].get<double>() > 0.5);

  TempDir dir;
  REQUIRE(chatact_model_save(m, (dir / "m.bin").c_str()) == CHATACT_OK);
  chatact_model* loaded = nullptr;
  REQUIRE(chatact_model_load((dir / "m.bin").c_str(), &loaded) == CHATACT_OK);
  char* d1 = nullptr;
  char* d2 = nullptr;
  REQUIRE(chatact_model_describe(m, &d1) == CHATACT_OK);
  REQUIRE(chatact_model_describe(loaded, &d2) == CHATACT_OK);
  CHECK(take(d1) == take(d2));

  char* e1 = nullptr;
  REQUIRE(chatact_model_evaluate(loaded, c, t, nullptr, nullptr, R"({"partition":"dev"})", &e1) == CHATACT_OK);
  const json ev = json::parse(take(e1));
  CHECK(ev["partition"] == "dev");
  CHECK(ev["accuracy"].get<double>() == doctest::Approx(r["accuracy"]["dev"].get<double>()));

  REQUIRE(chatact_model_label(loaded, c, t, nullptr, nullptr) == CHATACT_OK);
  REQUIRE(chatact_corpus_summary(c, &s) == CHATACT_OK);
  CHECK(json::parse(take(s))["predicted"] == 600);

  char* labeled = nullptr;
  REQUIRE(chatact_corpus_labeled(c, &labeled) == CHATACT_OK);
  char* mj = nullptr;
  char* mt = nullptr;
  REQUIRE(chatact_metrics_report(take(labeled).c_str(), t, nullptr, &mj, &mt) == CHATACT_OK);
  CHECK(json::parse(take(mj))["metrics"].size() == 10);
  CHECK(take(mt).find("loop_closure_rate") != std::string::npos);

  SUBCASE("a model for another taxonomy is refused") {
    std::ifstream in(std::string(CHATACT_DATA_DIR) + "/taxonomy/default.toml");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string toml = ss.str();
    const std::string name = "name = \"software-team-chat\"";
    REQUIRE(toml.find(name) != std::string::npos);
    toml.replace(toml.find(name), name.size(), "name = \"renamed\"");
    chatact_taxonomy* other = nullptr;
    REQUIRE(chatact_taxonomy_parse(toml.c_str(), &other) == CHATACT_OK);
    CHECK(chatact_model_label(loaded, c, other, nullptr, nullptr) == CHATACT_E_CONFLICT);
    CHECK(chatact_model_evaluate(loaded, c, other, nullptr, nullptr, nullptr, &e1) == CHATACT_E_CONFLICT);
    chatact_taxonomy_free(other);
  }

  chatact_model_free(loaded);
  chatact_model_free(m);
  chatact_corpus_free(c);
  chatact_taxonomy_free(t);
}

TEST_CASE("baseline and taxonomy validation") {
  chatact_taxonomy* t = nullptr;
  REQUIRE(chatact_taxonomy_builtin(&t) == CHATACT_OK);
  chatact_corpus* c = nullptr;
  REQUIRE(chatact_synthesize(t, R"({"seed":2,"sentences":800})", &c) == CHATACT_OK);
  chatact_baseline* b = nullptr;
  CHECK(chatact_baseline_train(c, t, nullptr, &b) == CHATACT_E_INVALID_ARGUMENT);
  REQUIRE(chatact_baseline_train(c, t, R"({"seed":1,"epochs":2})", &b) == CHATACT_OK);
  char* js = nullptr;
  char* text = nullptr;
  REQUIRE(chatact_validate_taxonomy(b, c, t, "sentence-mean", &js, &text) == CHATACT_OK);
  const json report = json::parse(take(js));
  CHECK(report.contains("rows"));
  CHECK_FALSE(take(text).empty());
  CHECK(chatact_validate_taxonomy(b, c, t, "median", &js, nullptr) == CHATACT_E_DATA);

  TempDir dir;
  REQUIRE(chatact_baseline_save(b, (dir / "b.bin").c_str()) == CHATACT_OK);
  chatact_baseline* back = nullptr;
  REQUIRE(chatact_baseline_load((dir / "b.bin").c_str(), &back) == CHATACT_OK);
  chatact_baseline_free(back);
  chatact_baseline_free(b);
  chatact_corpus_free(c);
  chatact_taxonomy_free(t);
}

TEST_CASE("store and server") {
  Fixture f;
  REQUIRE(chatact_corpus_attach(f.corpus, f.tax, record("m1#0", "Request-Attention").c_str()) == CHATACT_OK);
  TempDir dir;
  chatact_store* store = nullptr;
  REQUIRE(chatact_store_open((dir / "store").c_str(), f.tax, &store) == CHATACT_OK);
  REQUIRE(chatact_store_add_corpus(store, f.corpus) == CHATACT_OK);

  chatact_server* server = nullptr;
  int port = 0;
  CHECK(chatact_server_start(store, "127.0.0.1:notaport", &server, &port) == CHATACT_E_DATA);
  REQUIRE(chatact_server_start(store, "127.0.0.1:0", &server, &port) == CHATACT_OK);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Get("/health");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(json::parse(r->body)["version"] == chatact_version());
  r = cli.Get("/dialogues/t");
  REQUIRE(r);
  CHECK(json::parse(r->body)["sentences"][0]["gold_label"] == "Request-Attention");
  chatact_server_stop(server);
  chatact_store_free(store);
}
