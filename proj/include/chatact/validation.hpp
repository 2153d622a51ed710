#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chatact/baseline.hpp"
#include "chatact/corpus.hpp"

namespace chatact {

class Taxonomy;

struct LabelCentroid {
  std::string label;
  std::vector<double> vector;
  std::size_t support = 0;
};

enum class CentroidMode {
  kSentenceMean,  // mean of per-sentence averaged embeddings
  kTokenMean,     // mean over every n-gram embedding of the label's sentences
  kOutputRow,     // the label's row of the output layer
};
std::string_view to_string(CentroidMode mode);
CentroidMode centroid_mode_from_string(std::string_view text);

struct CentroidSet {
  std::vector<LabelCentroid> centroids;  // in model label order
  std::vector<std::string> omitted;      // model labels with no supporting sentence
};

// `labeled` pairs sentence text with its (uncollapsed) gold label. Throws
// DataError for an untrained model or a label the model does not know.
CentroidSet compute_centroids(const BaselineModel& model,
                              const std::vector<std::pair<std::string, std::string>>& labeled,
                              CentroidMode mode = CentroidMode::kSentenceMean);

// Gold-labeled sentences of a corpus as (text, label) pairs.
std::vector<std::pair<std::string, std::string>> labeled_sentences(const std::vector<Dialogue>& dialogues);

// 1 - cos(u, v), clamped to [0, 2]. Throws DataError on a zero vector or a
// length mismatch.
double cosine_distance(const std::vector<double>& u, const std::vector<double>& v);

struct CentroidPair {
  std::string a;
  std::string b;
  double distance = 0.0;
};

struct ClassConsistency {
  std::string top_level;
  std::vector<std::string> members;
  std::vector<CentroidPair> pairs;
  double mean_distance = 0.0;
  bool violates = false;  // within-class mean not below the overall mean
};

struct HierarchyReport {
  std::vector<ClassConsistency> classes;  // classes with at least two centroids, in top-level act order
  std::vector<CentroidPair> all_pairs;    // every centroid pair, in centroid order
  std::optional<double> overall_mean;     // mean of all_pairs distances
  std::vector<std::string> violations;
};

HierarchyReport hierarchy_consistency_report(const std::vector<LabelCentroid>& centroids, const Taxonomy& taxonomy);

// Closest pair; ties go to the lexicographically smallest (a, b) with a < b.
// Throws DataError with fewer than two centroids.
CentroidPair most_similar_pair(const std::vector<LabelCentroid>& centroids);

std::string hierarchy_report_json(const HierarchyReport& report, const CentroidSet& centroids,
                                  const std::optional<CentroidPair>& closest, CentroidMode mode);
std::string hierarchy_report_text(const HierarchyReport& report, const std::optional<CentroidPair>& closest);

}  // namespace chatact
