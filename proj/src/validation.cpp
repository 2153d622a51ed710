#include "chatact/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "chatact/error.hpp"
#include "chatact/taxonomy.hpp"

namespace chatact {

std::string_view to_string(CentroidMode mode) {
  switch (mode) {
    case CentroidMode::kSentenceMean: return "sentence-mean";
    case CentroidMode::kTokenMean: return "token-mean";
    case CentroidMode::kOutputRow: return "output-row";
  }
  return "sentence-mean";
}

CentroidMode centroid_mode_from_string(std::string_view text) {
  if (text == "sentence-mean") return CentroidMode::kSentenceMean;
  if (text == "token-mean") return CentroidMode::kTokenMean;
  if (text == "output-row") return CentroidMode::kOutputRow;
  throw DataError("unknown centroid mode '" + std::string(text) + "'");
}

std::vector<std::pair<std::string, std::string>> labeled_sentences(const std::vector<Dialogue>& dialogues) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& d : dialogues) {
    for (const auto& s : d.sentences()) {
      if (s.gold_label) out.emplace_back(s.text, *s.gold_label);
    }
  }
  return out;
}

CentroidSet compute_centroids(const BaselineModel& model,
                              const std::vector<std::pair<std::string, std::string>>& labeled, CentroidMode mode) {
  if (!model.trained()) throw DataError("baseline model is untrained");
  const auto& labels = model.labels();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
  const std::size_t E = model.dim();

  std::vector<std::vector<double>> sums(labels.size(), std::vector<double>(E, 0.0));
  std::vector<std::size_t> support(labels.size(), 0), weight(labels.size(), 0);
  for (const auto& [text, label] : labeled) {
    const auto it = index.find(label);
    if (it == index.end()) throw DataError("label '" + label + "' is not in the baseline model");
    const std::size_t y = it->second;
    ++support[y];
    if (mode == CentroidMode::kSentenceMean) {
      const auto v = model.sentence_vector(text);
      for (std::size_t k = 0; k < E; ++k) sums[y][k] += v[k];
      ++weight[y];
    } else if (mode == CentroidMode::kTokenMean) {
      for (auto id : model.feature_ids(text)) {
        const auto row = model.embedding_row(id);
        for (std::size_t k = 0; k < E; ++k) sums[y][k] += row[k];
        ++weight[y];
      }
    }
  }

  CentroidSet out;
  for (std::size_t y = 0; y < labels.size(); ++y) {
    if (support[y] == 0) {
      out.omitted.push_back(labels[y]);
      continue;
    }
    LabelCentroid c;
    c.label = labels[y];
    c.support = support[y];
    if (mode == CentroidMode::kOutputRow) {
      c.vector = model.output_row(y);
    } else {
      c.vector = sums[y];
      for (auto& v : c.vector) v /= static_cast<double>(weight[y]);
    }
    out.centroids.push_back(std::move(c));
  }
  return out;
}

double cosine_distance(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw DataError("cosine_distance: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw DataError("cosine_distance: zero vector");
  const double d = 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(d, 0.0, 2.0);
}

HierarchyReport hierarchy_consistency_report(const std::vector<LabelCentroid>& centroids, const Taxonomy& taxonomy) {
  HierarchyReport report;
  double total = 0.0;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      const double d = cosine_distance(centroids[i].vector, centroids[j].vector);
      report.all_pairs.push_back({centroids[i].label, centroids[j].label, d});
      total += d;
    }
  }
  if (!report.all_pairs.empty()) report.overall_mean = total / static_cast<double>(report.all_pairs.size());

  for (auto act : kTopLevelActs) {
    ClassConsistency cls;
    cls.top_level = std::string(act);
    for (const auto& c : centroids) {
      if (taxonomy.root(c.label) == act) cls.members.push_back(c.label);
    }
    if (cls.members.size() < 2) continue;
    double sum = 0.0;
    for (const auto& p : report.all_pairs) {
      if (taxonomy.root(p.a) == act && taxonomy.root(p.b) == act) {
        cls.pairs.push_back(p);
        sum += p.distance;
      }
    }
    cls.mean_distance = sum / static_cast<double>(cls.pairs.size());
    cls.violates = !(cls.mean_distance < *report.overall_mean);
    if (cls.violates) report.violations.push_back(cls.top_level);
    report.classes.push_back(std::move(cls));
  }
  return report;
}

CentroidPair most_similar_pair(const std::vector<LabelCentroid>& centroids) {
  if (centroids.size() < 2) throw DataError("most_similar_pair needs at least two centroids");
  std::optional<CentroidPair> best;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      CentroidPair p{centroids[i].label, centroids[j].label, cosine_distance(centroids[i].vector, centroids[j].vector)};
      if (p.b < p.a) std::swap(p.a, p.b);
      if (!best || p.distance < best->distance ||
          (p.distance == best->distance && std::tie(p.a, p.b) < std::tie(best->a, best->b))) {
        best = p;
      }
    }
  }
  return *best;
}

std::string hierarchy_report_json(const HierarchyReport& report, const CentroidSet& centroids,
                                  const std::optional<CentroidPair>& closest, CentroidMode mode) {
  using nlohmann::json;
  auto pair_json = [](const CentroidPair& p) { return json{{"a", p.a}, {"b", p.b}, {"distance", p.distance}}; };
  json rows = json::array();
  for (const auto& c : report.classes) {
    json pairs = json::array();
    for (const auto& p : c.pairs) pairs.push_back(pair_json(p));
    rows.push_back({{"class", c.top_level},
                    {"labels", c.members.size()},
                    {"within_mean_distance", c.mean_distance},
                    {"below_overall", !c.violates},
                    {"members", c.members},
                    {"pairs", pairs}});
  }
  json all = {{"class", "All"},
              {"labels", centroids.centroids.size()},
              {"pair_count", report.all_pairs.size()},
              {"mean_distance", report.overall_mean ? json(*report.overall_mean) : json(nullptr)}};
  json support = json::object();
  for (const auto& c : centroids.centroids) support[c.label] = c.support;
  json out = {{"mode", std::string(to_string(mode))},
              {"rows", rows},
              {"all", all},
              {"violations", report.violations},
              {"omitted_labels", centroids.omitted},
              {"support", support},
              {"most_similar_pair", closest ? pair_json(*closest) : json(nullptr)}};
  return out.dump(2);
}

std::string hierarchy_report_text(const HierarchyReport& report, const std::optional<CentroidPair>& closest) {
  std::string out = "class          labels  mean cosine distance\n";
  char line[160];
  for (const auto& c : report.classes) {
    std::snprintf(line, sizeof line, "%-14s %6zu  %.4f%s\n", c.top_level.c_str(), c.members.size(), c.mean_distance,
                  c.violates ? "  (not below All)" : "");
    out += line;
  }
  if (report.overall_mean) {
    std::snprintf(line, sizeof line, "%-14s %6s  %.4f\n", "All", "", *report.overall_mean);
    out += line;
  }
  if (closest) {
    std::snprintf(line, sizeof line, "closest pair: %s / %s at %.4f\n", closest->a.c_str(), closest->b.c_str(),
                  closest->distance);
    out += line;
  }
  return out;
}

}  // namespace chatact
