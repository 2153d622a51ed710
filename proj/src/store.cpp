#include "chatact/store.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/labeler.hpp"
#include "chatact/util.hpp"

namespace chatact {
namespace fs = std::filesystem;
namespace {

using nlohmann::json;

std::string hex_id(const std::string& id) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : id) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

// Atomic replace: write a sibling temp file, then rename over the target.
void write_atomic(const fs::path& path, std::string_view contents) {
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp.string(), contents);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

ProjectStore::ProjectStore(fs::path root, std::unique_ptr<Taxonomy> taxonomy)
    : root_(std::move(root)), taxonomy_(std::move(taxonomy)) {}

std::shared_ptr<ProjectStore> ProjectStore::open(const fs::path& root, const Taxonomy* taxonomy) {
  std::error_code ec;
  fs::create_directories(root / "blobs", ec);
  fs::create_directories(root / "logs", ec);
  if (ec) throw IoError("cannot create store at " + root.string() + ": " + ec.message());

  const fs::path manifest = root / "store.json";
  if (!fs::exists(manifest)) {
    const Taxonomy& tax = taxonomy ? *taxonomy : Taxonomy::builtin();
    std::shared_ptr<ProjectStore> store(new ProjectStore(root, std::make_unique<Taxonomy>(tax)));
    store->put_blob(tax.serialize());
    std::lock_guard lock(store->manifest_mutex_);
    store->write_manifest_locked();
    return store;
  }

  json j;
  try {
    j = json::parse(read_file(manifest.string()));
  } catch (const json::exception& e) {
    throw DataError("corrupt store manifest: " + std::string(e.what()));
  }
  const std::string hash = j.at("taxonomy").get<std::string>();
  const std::string tax_path = (root / "blobs" / hash).string();
  if (!fs::exists(tax_path)) throw DataError("store taxonomy blob " + hash + " is missing");
  auto tax = std::make_unique<Taxonomy>(Taxonomy::parse(read_file(tax_path)));
  std::shared_ptr<ProjectStore> store(new ProjectStore(root, std::move(tax)));
  store->dialogues_ = j.value("dialogues", std::map<std::string, std::string>{});
  for (const auto& id : j.value("models", std::vector<std::string>{})) store->models_[id] = id;
  return store;
}

void ProjectStore::write_manifest_locked() {
  std::vector<std::string> models;
  for (const auto& [id, _] : models_) models.push_back(id);
  const json j = {{"version", 1}, {"taxonomy", taxonomy_->hash()}, {"dialogues", dialogues_}, {"models", models}};
  write_atomic(root_ / "store.json", j.dump(2));
}

std::string ProjectStore::put_blob(std::string_view bytes) {
  const std::string id = sha256_hex(bytes);
  const fs::path path = root_ / "blobs" / id;
  if (!fs::exists(path)) write_atomic(path, bytes);
  return id;
}

std::optional<std::string> ProjectStore::get_blob(const std::string& id) const {
  if (id.size() != 64 || id.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
  const fs::path path = root_ / "blobs" / id;
  if (!fs::exists(path)) return std::nullopt;
  return read_file(path.string());
}

void ProjectStore::put_dialogues(const std::vector<Dialogue>& dialogues) {
  std::vector<std::pair<std::string, std::string>> blobs;
  for (const auto& d : dialogues) blobs.emplace_back(d.id(), put_blob(serialize_transcript(d)));
  std::lock_guard lock(manifest_mutex_);
  for (const auto& [id, blob] : blobs) {
    const auto it = dialogues_.find(id);
    if (it != dialogues_.end() && it->second != blob) {
      throw ConflictError("dialogue '" + id + "' already exists with different content");
    }
  }
  for (const auto& [id, blob] : blobs) dialogues_[id] = blob;
  write_manifest_locked();
}

std::vector<std::string> ProjectStore::dialogue_ids() const {
  std::lock_guard lock(manifest_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : dialogues_) ids.push_back(id);
  return ids;
}

bool ProjectStore::has_dialogue(const std::string& id) const {
  std::lock_guard lock(manifest_mutex_);
  return dialogues_.count(id) > 0;
}

Dialogue ProjectStore::dialogue(const std::string& id) const {
  std::string blob;
  {
    std::lock_guard lock(manifest_mutex_);
    const auto it = dialogues_.find(id);
    if (it == dialogues_.end()) throw NotFoundError("unknown dialogue '" + id + "'");
    blob = it->second;
  }
  const auto text = get_blob(blob);
  if (!text) throw DataError("transcript blob " + blob + " is missing");
  auto parsed = parse_transcript(*text, id);
  if (parsed.size() != 1) throw DataError("stored transcript for '" + id + "' is not a single dialogue");
  return std::move(parsed.front());
}

fs::path ProjectStore::log_path(const std::string& dialogue_id) const {
  return root_ / "logs" / (hex_id(dialogue_id) + ".jsonl");
}

std::vector<AnnotationRecord> ProjectStore::annotation_log(const std::string& dialogue_id) const {
  const fs::path path = log_path(dialogue_id);
  if (!fs::exists(path)) return {};
  std::string text = read_file(path.string());
  // A concurrent append may be mid-write; only complete lines count.
  text.resize(text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1);
  return parse_annotations(text);
}

Dialogue ProjectStore::annotated(const std::string& id) const {
  return attach_annotations(dialogue(id), annotation_log(id));
}

std::mutex& ProjectStore::dialogue_lock(const std::string& dialogue_id) {
  std::lock_guard lock(locks_mutex_);
  auto& slot = locks_[dialogue_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void ProjectStore::append_annotations(const std::string& dialogue_id, const std::vector<AnnotationRecord>& records) {
  const Dialogue d = dialogue(dialogue_id);
  std::vector<std::string> missing;
  for (const auto& r : records) {
    if (!taxonomy_->contains(r.label)) throw DataError("unknown label '" + r.label + "'");
    if (!d.find_sentence(r.sentence_id) && !d.find_message(r.sentence_id)) missing.push_back(r.sentence_id);
  }
  if (!missing.empty()) throw NotFoundError("unknown sentence id '" + missing.front() + "'");
  // Span checks and everything else attach_annotations enforces.
  attach_annotations(d, records);

  std::string lines;
  for (const auto& r : records) {
    lines += serialize_annotation(r);
    lines += '\n';
  }
  std::lock_guard lock(dialogue_lock(dialogue_id));
  std::FILE* f = std::fopen(log_path(dialogue_id).c_str(), "ab");
  if (!f) throw IoError("cannot open annotation log for '" + dialogue_id + "'");
  const bool ok = std::fwrite(lines.data(), 1, lines.size(), f) == lines.size();
  const bool flushed = std::fflush(f) == 0;
  std::fclose(f);
  if (!ok || !flushed) throw IoError("short write to annotation log for '" + dialogue_id + "'");
}

std::string ProjectStore::put_model(const SequenceModel& model, const Taxonomy* model_taxonomy) {
  if (model.taxonomy_hash() != taxonomy_->hash()) {
    if (!model_taxonomy || model_taxonomy->hash() != model.taxonomy_hash()) {
      throw ConflictError("model taxonomy " + model.taxonomy_hash() + " is neither the store taxonomy nor supplied");
    }
    put_blob(model_taxonomy->serialize());
  }
  const std::string id = put_blob(model.serialize());
  std::lock_guard lock(manifest_mutex_);
  models_[id] = id;
  write_manifest_locked();
  return id;
}

SequenceModel ProjectStore::model(const std::string& id) const {
  {
    std::lock_guard lock(manifest_mutex_);
    if (!models_.count(id)) throw NotFoundError("unknown model '" + id + "'");
  }
  const auto bytes = get_blob(id);
  if (!bytes) throw NotFoundError("model blob " + id + " is missing");
  return SequenceModel::deserialize(*bytes);
}

}  // namespace chatact
