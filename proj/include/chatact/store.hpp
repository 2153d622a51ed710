#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chatact/corpus.hpp"
#include "chatact/taxonomy.hpp"

namespace chatact {

class SequenceModel;

// File-backed project directory:
//   store.json                 taxonomy hash and dialogue -> blob id map
//   blobs/<sha256>             content-addressed transcripts, taxonomies, models
//   logs/<hex dialogue id>.jsonl  append-only annotation log per dialogue
// Safe to share between threads of one process.
class ProjectStore {
 public:
  // Creates the layout if missing. A new store adopts `taxonomy` (the
  // builtin one when null); an existing store keeps its own.
  static std::shared_ptr<ProjectStore> open(const std::filesystem::path& root, const Taxonomy* taxonomy = nullptr);

  const std::filesystem::path& root() const { return root_; }
  const Taxonomy& taxonomy() const { return *taxonomy_; }
  const std::string& taxonomy_hash() const { return taxonomy_->hash(); }

  std::string put_blob(std::string_view bytes);
  std::optional<std::string> get_blob(const std::string& id) const;

  // Stores each dialogue's transcript; a dialogue id already present is
  // replaced only if its content is identical, else ConflictError.
  void put_dialogues(const std::vector<Dialogue>& dialogues);
  std::vector<std::string> dialogue_ids() const;
  bool has_dialogue(const std::string& id) const;
  // Transcript only, no labels. Throws NotFoundError.
  Dialogue dialogue(const std::string& id) const;
  // Dialogue with the fold of its annotation log applied.
  Dialogue annotated(const std::string& id) const;

  // Validates then appends under the dialogue's lock. Labels must be in the
  // taxonomy (DataError), sentence ids must exist (NotFoundError), spans
  // must fit (DataError). Nothing is written if any record fails.
  void append_annotations(const std::string& dialogue_id, const std::vector<AnnotationRecord>& records);
  std::vector<AnnotationRecord> annotation_log(const std::string& dialogue_id) const;

  // A model bound to another taxonomy needs that taxonomy passed in so the
  // store holds every taxonomy its models reference; otherwise ConflictError.
  std::string put_model(const SequenceModel& model, const Taxonomy* model_taxonomy = nullptr);
  SequenceModel model(const std::string& id) const;

 private:
  ProjectStore(std::filesystem::path root, std::unique_ptr<Taxonomy> taxonomy);

  std::filesystem::path log_path(const std::string& dialogue_id) const;
  std::mutex& dialogue_lock(const std::string& dialogue_id);
  void write_manifest_locked();

  std::filesystem::path root_;
  std::unique_ptr<Taxonomy> taxonomy_;
  mutable std::mutex manifest_mutex_;
  std::map<std::string, std::string> dialogues_;  // id -> transcript blob
  std::map<std::string, std::string> models_;     // blob ids of registered models
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace chatact
