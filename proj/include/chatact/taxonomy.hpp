#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chatact {

inline constexpr std::array<std::string_view, 9> kTopLevelActs = {
    "Inform", "Query", "Request", "Assign", "Propose", "Acknowledge", "Reject", "Code", "Social"};

struct ActLabel {
  std::string id;
  std::optional<std::string> parent;
  std::string description;
  std::optional<std::string> example;
  bool synthesized = false;

  friend bool operator==(const ActLabel&, const ActLabel&) = default;
};

// What a priority rule can condition on. Empty fields never match a rule
// that requires them.
struct PriorityContext {
  std::optional<std::string> previous_label;  // label of the preceding sentence
  std::optional<std::string> speaker_role;
};

struct PriorityRule {
  std::string prefer;
  std::string over;
  std::string note;
  // Rule applies only if the previous label descends from (or is) one of these.
  std::vector<std::string> previous_any;
  std::optional<std::string> speaker_role;

  friend bool operator==(const PriorityRule&, const PriorityRule&) = default;
};

// The validated label forest. Immutable after construction.
class Taxonomy {
 public:
  // Parses and validates the TOML form. Throws TaxonomyError.
  static Taxonomy parse(std::string_view toml_text);
  static Taxonomy load_file(const std::string& path);
  // The shipped 55-label taxonomy compiled into the library.
  static const Taxonomy& builtin();
  static std::string_view builtin_source();

  // Canonical TOML; parse(serialize()) == *this.
  std::string serialize() const;
  // sha256 of serialize().
  const std::string& hash() const { return hash_; }

  const std::string& name() const { return name_; }
  const std::vector<ActLabel>& labels() const { return labels_; }
  // Reduced-set ids in configuration order; this is the model label order.
  const std::vector<std::string>& reduced_set() const { return reduced_; }
  const std::vector<PriorityRule>& priority_rules() const { return rules_; }

  bool contains(std::string_view id) const;
  bool in_reduced_set(std::string_view id) const;
  const ActLabel& label(std::string_view id) const;

  // Root first, `id` last. Throws DataError for unknown labels.
  std::vector<std::string> ancestors(std::string_view id) const;
  const std::string& root(std::string_view id) const;
  bool is_ancestor_or_self(std::string_view ancestor, std::string_view id) const;
  // Deepest ancestor-or-self that is in the reduced set.
  const std::string& collapse(std::string_view id) const;

  // First rule whose pair is present and whose context matches picks its
  // preferred label; otherwise the first candidate wins.
  std::string apply_priority(const std::vector<std::string>& candidates,
                             const PriorityContext& context) const;

  friend bool operator==(const Taxonomy& a, const Taxonomy& b) {
    return a.name_ == b.name_ && a.version_ == b.version_ && a.labels_ == b.labels_ &&
           a.reduced_ == b.reduced_ && a.rules_ == b.rules_;
  }

 private:
  Taxonomy() = default;
  void validate_and_index();
  std::size_t index_of(std::string_view id) const;

  std::string name_;
  std::int64_t version_ = 1;
  std::vector<ActLabel> labels_;
  std::vector<std::string> reduced_;
  std::vector<PriorityRule> rules_;

  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> parent_index_;  // self index for roots
  std::vector<std::size_t> collapse_index_;
  std::vector<bool> reduced_flag_;
  std::string hash_;
};

}  // namespace chatact
