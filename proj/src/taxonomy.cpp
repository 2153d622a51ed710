#include "chatact/taxonomy.hpp"

#include <algorithm>
#include <sstream>

#include <toml.hpp>

#include "chatact/error.hpp"
#include "chatact/util.hpp"

namespace chatact {

// Generated from data/taxonomy/default.toml at configure time.
extern const char kBuiltinTaxonomySource[];

namespace {

using Kind = TaxonomyError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& offender, const std::string& what) {
  throw TaxonomyError(kind, offender, what);
}

std::optional<std::string> opt_string(const toml::table& t, std::string_view key) {
  if (auto v = t[key].value<std::string>()) return *v;
  return std::nullopt;
}

std::string req_string(const toml::table& t, std::string_view key, std::string_view where) {
  auto v = t[key].value<std::string>();
  if (!v) fail(Kind::kFormat, std::string(where), std::string(where) + ": missing string field '" + std::string(key) + "'");
  return *v;
}

std::vector<std::string> string_array(const toml::node_view<const toml::node>& node, std::string_view where) {
  std::vector<std::string> out;
  if (!node) return out;
  const auto* arr = node.as_array();
  if (!arr) fail(Kind::kFormat, std::string(where), std::string(where) + " must be an array of strings");
  for (const auto& el : *arr) {
    auto s = el.value<std::string>();
    if (!s) fail(Kind::kFormat, std::string(where), std::string(where) + " must contain only strings");
    out.push_back(*s);
  }
  return out;
}

}  // namespace

Taxonomy Taxonomy::parse(std::string_view toml_text) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "taxonomy: " << e.description() << " at line " << e.source().begin.line;
    fail(Kind::kFormat, "", msg.str());
  }

  Taxonomy tax;
  const auto& cdoc = std::as_const(doc);
  tax.name_ = cdoc["taxonomy"]["name"].value_or(std::string("unnamed"));
  tax.version_ = cdoc["taxonomy"]["version"].value_or(std::int64_t{1});

  const auto* labels = cdoc["label"].as_array();
  if (!labels || labels->empty()) fail(Kind::kFormat, "", "taxonomy: no [[label]] entries");
  for (const auto& node : *labels) {
    const auto* t = node.as_table();
    if (!t) fail(Kind::kFormat, "", "taxonomy: [[label]] entries must be tables");
    ActLabel label;
    label.id = req_string(*t, "id", "label");
    label.parent = opt_string(*t, "parent");
    label.description = (*t)["description"].value_or(std::string());
    label.example = opt_string(*t, "example");
    label.synthesized = (*t)["synthesized"].value_or(false);
    tax.labels_.push_back(std::move(label));
  }

  tax.reduced_ = string_array(cdoc["reduced_set"]["labels"], "reduced_set.labels");

  if (const auto* rules = cdoc["priority_rule"].as_array()) {
    for (const auto& node : *rules) {
      const auto* t = node.as_table();
      if (!t) fail(Kind::kFormat, "", "taxonomy: [[priority_rule]] entries must be tables");
      PriorityRule rule;
      rule.prefer = req_string(*t, "prefer", "priority_rule");
      rule.over = req_string(*t, "over", "priority_rule");
      rule.note = (*t)["note"].value_or(std::string());
      if (const auto* ctx = (*t)["context"].as_table()) {
        rule.previous_any = string_array((*ctx)["previous"], "priority_rule.context.previous");
        rule.speaker_role = opt_string(*ctx, "speaker_role");
      }
      tax.rules_.push_back(std::move(rule));
    }
  }

  tax.validate_and_index();
  return tax;
}

Taxonomy Taxonomy::load_file(const std::string& path) { return parse(read_file(path)); }

std::string_view Taxonomy::builtin_source() { return kBuiltinTaxonomySource; }

const Taxonomy& Taxonomy::builtin() {
  static const Taxonomy tax = parse(kBuiltinTaxonomySource);
  return tax;
}

void Taxonomy::validate_and_index() {
  const std::size_t n = labels_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = labels_[i].id;
    if (id.empty()) fail(Kind::kBadId, id, "taxonomy: empty label id");
    if (!index_.emplace(id, i).second) fail(Kind::kDuplicateId, id, "taxonomy: duplicate label id '" + id + "'");
  }

  parent_index_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = labels_[i];
    if (!label.parent) {
      parent_index_[i] = i;
      continue;
    }
    if (*label.parent == label.id) {
      fail(Kind::kCycle, label.id, "taxonomy: label '" + label.id + "' is its own parent");
    }
    auto it = index_.find(*label.parent);
    if (it == index_.end()) {
      fail(Kind::kDanglingParent, label.id,
           "taxonomy: label '" + label.id + "' has unknown parent '" + *label.parent + "'");
    }
    parent_index_[i] = it->second;
  }

  // Every chain must reach a root within n steps.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i;
    std::size_t steps = 0;
    while (parent_index_[cur] != cur) {
      cur = parent_index_[cur];
      if (++steps > n) fail(Kind::kCycle, labels_[i].id, "taxonomy: cycle through '" + labels_[i].id + "'");
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = labels_[i];
    if (!label.parent) {
      if (std::find(kTopLevelActs.begin(), kTopLevelActs.end(), label.id) == kTopLevelActs.end()) {
        fail(Kind::kBadId, label.id, "taxonomy: root '" + label.id + "' is not a top-level dialogue act");
      }
      continue;
    }
    const auto& parent = *label.parent;
    if (label.id.size() <= parent.size() + 1 || label.id.compare(0, parent.size(), parent) != 0 ||
        label.id[parent.size()] != '-') {
      fail(Kind::kBadId, label.id, "taxonomy: id '" + label.id + "' does not extend parent id '" + parent + "'");
    }
  }

  reduced_flag_.assign(n, false);
  for (const auto& id : reduced_) {
    auto it = index_.find(id);
    if (it == index_.end()) {
      fail(Kind::kMissingMember, id, "taxonomy: reduced-set member '" + id + "' is not a label");
    }
    if (reduced_flag_[it->second]) fail(Kind::kDuplicateId, id, "taxonomy: '" + id + "' listed twice in reduced set");
    reduced_flag_[it->second] = true;
  }

  collapse_index_.assign(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i;
    while (true) {
      if (reduced_flag_[cur]) {
        collapse_index_[i] = cur;
        break;
      }
      if (parent_index_[cur] == cur) break;
      cur = parent_index_[cur];
    }
    if (collapse_index_[i] == n) {
      fail(Kind::kMissingMember, labels_[i].id,
           "taxonomy: label '" + labels_[i].id + "' has no ancestor in the reduced set");
    }
  }

  for (const auto& rule : rules_) {
    for (const auto* id : {&rule.prefer, &rule.over}) {
      if (!index_.count(*id)) fail(Kind::kDanglingParent, *id, "taxonomy: priority rule references unknown label '" + *id + "'");
    }
    for (const auto& id : rule.previous_any) {
      if (!index_.count(id)) fail(Kind::kDanglingParent, id, "taxonomy: priority rule context references unknown label '" + id + "'");
    }
  }

  hash_ = sha256_hex(serialize());
}

std::string Taxonomy::serialize() const {
  toml::table doc;
  doc.insert("taxonomy", toml::table{{"name", name_}, {"version", version_}});

  toml::array labels;
  for (const auto& l : labels_) {
    toml::table t;
    t.insert("id", l.id);
    if (l.parent) t.insert("parent", *l.parent);
    t.insert("description", l.description);
    if (l.example) t.insert("example", *l.example);
    if (l.synthesized) t.insert("synthesized", true);
    labels.push_back(std::move(t));
  }
  doc.insert("label", std::move(labels));

  toml::array reduced;
  for (const auto& id : reduced_) reduced.push_back(id);
  doc.insert("reduced_set", toml::table{{"labels", std::move(reduced)}});

  if (!rules_.empty()) {
    toml::array rules;
    for (const auto& r : rules_) {
      toml::table t;
      t.insert("prefer", r.prefer);
      t.insert("over", r.over);
      if (!r.note.empty()) t.insert("note", r.note);
      toml::table ctx;
      if (!r.previous_any.empty()) {
        toml::array prev;
        for (const auto& p : r.previous_any) prev.push_back(p);
        ctx.insert("previous", std::move(prev));
      }
      if (r.speaker_role) ctx.insert("speaker_role", *r.speaker_role);
      t.insert("context", std::move(ctx));
      rules.push_back(std::move(t));
    }
    doc.insert("priority_rule", std::move(rules));
  }

  std::ostringstream out;
  out << doc << '\n';
  return out.str();
}

std::size_t Taxonomy::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw DataError("unknown label '" + std::string(id) + "'");
  return it->second;
}

bool Taxonomy::contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }

bool Taxonomy::in_reduced_set(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it != index_.end() && reduced_flag_[it->second];
}

const ActLabel& Taxonomy::label(std::string_view id) const { return labels_[index_of(id)]; }

std::vector<std::string> Taxonomy::ancestors(std::string_view id) const {
  std::size_t cur = index_of(id);
  std::vector<std::string> chain{labels_[cur].id};
  while (parent_index_[cur] != cur) {
    cur = parent_index_[cur];
    chain.push_back(labels_[cur].id);
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

const std::string& Taxonomy::root(std::string_view id) const {
  std::size_t cur = index_of(id);
  while (parent_index_[cur] != cur) cur = parent_index_[cur];
  return labels_[cur].id;
}

bool Taxonomy::is_ancestor_or_self(std::string_view ancestor, std::string_view id) const {
  auto target = index_.find(std::string(ancestor));
  if (target == index_.end()) return false;
  std::size_t cur = index_of(id);
  while (true) {
    if (cur == target->second) return true;
    if (parent_index_[cur] == cur) return false;
    cur = parent_index_[cur];
  }
}

const std::string& Taxonomy::collapse(std::string_view id) const { return labels_[collapse_index_[index_of(id)]].id; }

std::string Taxonomy::apply_priority(const std::vector<std::string>& candidates,
                                     const PriorityContext& context) const {
  if (candidates.empty()) throw DataError("apply_priority: no candidates");
  auto has = [&](const std::string& id) {
    return std::find(candidates.begin(), candidates.end(), id) != candidates.end();
  };
  for (const auto& rule : rules_) {
    if (!has(rule.prefer) || !has(rule.over)) continue;
    if (!rule.previous_any.empty()) {
      if (!context.previous_label || !contains(*context.previous_label)) continue;
      const bool hit = std::any_of(rule.previous_any.begin(), rule.previous_any.end(), [&](const std::string& p) {
        return is_ancestor_or_self(p, *context.previous_label);
      });
      if (!hit) continue;
    }
    if (rule.speaker_role && context.speaker_role != rule.speaker_role) continue;
    return rule.prefer;
  }
  return candidates.front();
}

}  // namespace chatact
