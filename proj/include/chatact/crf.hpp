#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace chatact::crf {

// Label-pair and boundary scores of a linear-chain CRF over L labels.
struct ChainParams {
  std::size_t num_labels = 0;
  std::vector<double> transitions;  // [prev * L + next]
  std::vector<double> start;
  std::vector<double> end;

  explicit ChainParams(std::size_t labels = 0)
      : num_labels(labels), transitions(labels * labels, 0.0), start(labels, 0.0), end(labels, 0.0) {}

  double transition(std::size_t prev, std::size_t next) const { return transitions[prev * num_labels + next]; }
};

// Per-position emission scores, row-major n x L.
struct Emissions {
  std::size_t length = 0;
  std::size_t num_labels = 0;
  std::vector<double> scores;

  Emissions() = default;
  Emissions(std::size_t n, std::size_t labels) : length(n), num_labels(labels), scores(n * labels, 0.0) {}

  double operator()(std::size_t position, std::size_t label) const { return scores[position * num_labels + label]; }
  double& operator()(std::size_t position, std::size_t label) { return scores[position * num_labels + label]; }
};

// start(y1) + sum emit(yi) + sum trans(y(i-1), yi) + end(yn).
// Throws DataError when the sequence length differs from the emissions.
double sequence_score(const ChainParams& params, const Emissions& emissions, std::span<const std::size_t> labels);

// log of the sum over all L^n sequences of exp(sequence_score), by forward
// recursion in log space.
double log_partition(const ChainParams& params, const Emissions& emissions);

struct Posteriors {
  double log_z = 0.0;
  std::vector<double> node;  // n x L marginals
  std::vector<double> edge;  // (n-1) x L x L pairwise marginals
};

// Forward-backward. When `allowed` is non-empty, position i may only take
// label allowed[i] (a negative entry leaves the position free); this yields
// the constrained partition used for partially labeled windows.
Posteriors forward_backward(const ChainParams& params, const Emissions& emissions,
                            std::span<const int> allowed = {});

struct Decoded {
  std::vector<std::size_t> labels;
  double score = 0.0;
};

// Highest-scoring sequence. Among equal scores the sequence that is smallest
// label-by-label from the left wins.
Decoded viterbi(const ChainParams& params, const Emissions& emissions);

double log_sum_exp(std::span<const double> values);

}  // namespace chatact::crf
