#pragma once

#include <memory>
#include <string>
#include <utility>

#include "chatact/store.hpp"

namespace chatact {

// "host:port", ":port" or "port". Throws DataError.
std::pair<std::string, int> parse_bind(const std::string& text);

struct ServiceOptions {
  std::string cors_origin = "*";
};

// JSON-over-HTTP front end of a ProjectStore.
//   GET  /health
//   GET  /taxonomy
//   GET  /dialogues
//   GET  /dialogues/{id}?view=sentences|windows
//   POST /dialogues/{id}/annotations
//   POST /dialogues/{id}/label?model={hash}
//   GET  /dialogues/{id}/metrics
// Errors are {"error": message} with 400 (bad label, span or body), 404
// (unknown id) or 409 (taxonomy mismatch).
class HttpService {
 public:
  explicit HttpService(std::shared_ptr<ProjectStore> store, ServiceOptions options = {});
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds (port 0 picks a free one) and serves on a background thread.
  // Returns the bound port. Throws IoError if binding fails.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace chatact
