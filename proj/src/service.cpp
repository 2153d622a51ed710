#include "chatact/service.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/labeler.hpp"
#include "chatact/metrics.hpp"
#include "chatact/segmentation.hpp"

#ifndef CHATACT_VERSION
#define CHATACT_VERSION "0.0.0"
#endif

namespace chatact {
namespace {

using nlohmann::json;

Timestamp now() {
  return std::chrono::time_point_cast<Microseconds>(std::chrono::system_clock::now());
}

json optional_string(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json sentence_json(const Dialogue& d, std::size_t i) {
  const auto& s = d.sentences()[i];
  const auto& m = d.message_of(i);
  return {{"id", s.id},
          {"message_id", s.message_id},
          {"index_in_message", s.index_in_message},
          {"speaker", m.speaker},
          {"ts", format_rfc3339(m.timestamp)},
          {"text", s.text},
          {"is_code_block", s.is_code_block},
          {"gold_label", optional_string(s.gold_label)},
          {"gold_source", s.gold_source ? json(std::string(to_string(*s.gold_source))) : json(nullptr)},
          {"predicted_label", optional_string(s.predicted_label)},
          {"effective_label", optional_string(s.effective_label())}};
}

json taxonomy_json(const Taxonomy& t) {
  json labels = json::array();
  for (const auto& l : t.labels()) {
    labels.push_back({{"id", l.id},
                      {"parent", optional_string(l.parent)},
                      {"description", l.description},
                      {"example", optional_string(l.example)},
                      {"synthesized", l.synthesized},
                      {"reduced", t.in_reduced_set(l.id)},
                      {"collapses_to", t.collapse(l.id)}});
  }
  json rules = json::array();
  for (const auto& r : t.priority_rules()) {
    json rule = {{"prefer", r.prefer}, {"over", r.over}, {"note", r.note}, {"previous_any", r.previous_any}};
    rule["speaker_role"] = optional_string(r.speaker_role);
    rules.push_back(std::move(rule));
  }
  return {{"name", t.name()}, {"hash", t.hash()}, {"labels", labels}, {"reduced_set", t.reduced_set()},
          {"priority_rules", rules}};
}

// Records from a JSON object or array; missing created_at / source get
// defaults, then the shared parser validates the rest.
std::vector<AnnotationRecord> parse_body_records(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw DataError(std::string("request body is not JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("records")) j = j["records"];
  if (j.is_object()) j = json::array({j});
  if (!j.is_array() || j.empty()) throw DataError("expected an annotation record or a non-empty array of them");
  std::string lines;
  const std::string stamp = format_rfc3339(now());
  for (auto& rec : j) {
    if (!rec.is_object()) throw DataError("annotation records must be objects");
    if (!rec.contains("created_at")) rec["created_at"] = stamp;
    if (!rec.contains("annotator")) rec["annotator"] = "anonymous";
    lines += rec.dump();
    lines += '\n';
  }
  return parse_annotations(lines);
}

}  // namespace

std::pair<std::string, int> parse_bind(const std::string& text) {
  std::string host = "127.0.0.1";
  std::string port = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    if (colon > 0) host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw DataError("");
    return {host, p};
  } catch (const std::exception&) {
    throw DataError("invalid bind address '" + text + "'");
  }
}

struct HttpService::Impl {
  std::shared_ptr<ProjectStore> store;
  ServiceOptions options;
  httplib::Server server;
  std::thread thread;

  void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Maps core exceptions onto HTTP status codes.
  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const NotFoundError& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const DanglingReferenceError& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const ConflictError& e) {
      reply(res, 409, {{"error", e.what()}});
    } catch (const DataError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}, {"version", CHATACT_VERSION}, {"taxonomy", store->taxonomy_hash()}});
    });

    server.Get("/taxonomy", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, taxonomy_json(store->taxonomy()));
    });

    server.Get("/dialogues", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        json list = json::array();
        for (const auto& id : store->dialogue_ids()) {
          const Dialogue d = store->annotated(id);
          std::size_t gold = 0, predicted = 0;
          for (const auto& s : d.sentences()) {
            gold += s.gold_label.has_value();
            predicted += s.predicted_label.has_value();
          }
          list.push_back({{"id", id},
                          {"messages", d.messages().size()},
                          {"sentences", d.sentences().size()},
                          {"gold_labeled", gold},
                          {"predicted", predicted}});
        }
        reply(res, 200, {{"dialogues", list}});
      });
    });

    server.Get(R"(/dialogues/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Dialogue d = store->annotated(req.matches[1]);
        const std::string view = req.has_param("view") ? req.get_param_value("view") : "sentences";
        json sentences = json::array();
        for (std::size_t i = 0; i < d.sentences().size(); ++i) sentences.push_back(sentence_json(d, i));
        json out = {{"id", d.id()}, {"view", view}, {"sentences", sentences}};
        if (view == "windows") {
          SegmentOptions o;
          if (req.has_param("strategy")) o.strategy = strategy_from_string(req.get_param_value("strategy"));
          if (req.has_param("lines")) o.line_limit = std::stoul(req.get_param_value("lines"));
          json windows = json::array();
          for (const auto& w : segment(d, o)) windows.push_back(json::parse(window_to_json(w)));
          out["windows"] = windows;
        } else if (view != "sentences") {
          throw DataError("view must be 'sentences' or 'windows'");
        }
        reply(res, 200, out);
      });
    });

    server.Post(R"(/dialogues/([^/]+)/annotations)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        if (!store->has_dialogue(id)) throw NotFoundError("unknown dialogue '" + id + "'");
        const auto records = parse_body_records(req.body);
        store->append_annotations(id, records);
        reply(res, 201, {{"dialogue", id}, {"appended", records.size()}});
      });
    });

    server.Post(R"(/dialogues/([^/]+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        if (!req.has_param("model")) throw DataError("missing 'model' query parameter");
        const std::string model_id = req.get_param_value("model");
        std::vector<Dialogue> dialogues{store->dialogue(id)};
        const SequenceModel model = store->model(model_id);
        if (model.taxonomy_hash() != store->taxonomy_hash()) {
          throw ConflictError("model taxonomy " + model.taxonomy_hash() + " differs from store taxonomy " +
                              store->taxonomy_hash());
        }
        const auto windows = segment(dialogues.front(), model.segmentation());
        label_dialogues(model, dialogues, windows);
        std::vector<AnnotationRecord> records;
        const Timestamp stamp = now();
        for (const auto& s : dialogues.front().sentences()) {
          if (!s.predicted_label) continue;
          records.push_back({s.id, *s.predicted_label, "model:" + model_id.substr(0, 12), std::nullopt, std::nullopt,
                             stamp, AnnotationSource::kModel});
        }
        store->append_annotations(id, records);
        reply(res, 200, {{"dialogue", id}, {"model", model_id}, {"labeled", records.size()}});
      });
    });

    server.Get(R"(/dialogues/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Dialogue d = store->annotated(req.matches[1]);
        const auto report = build_report(labeled_stream({d}), store->taxonomy());
        res.status = 200;
        res.set_content(report_json(report), "application/json");
      });
    });
  }

  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int bound = server.bind_to_any_port(host);
      if (bound <= 0) throw IoError("cannot bind " + host);
      return bound;
    }
    if (!server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
  }
};

HttpService::HttpService(std::shared_ptr<ProjectStore> store, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  impl_->options = std::move(options);
  impl_->routes();
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  const int bound = impl_->bind(host, port);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::run(const std::string& host, int port) {
  impl_->bind(host, port);
  impl_->server.listen_after_bind();
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace chatact
