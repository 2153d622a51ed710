#include "chatact/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chatact/error.hpp"

namespace chatact::crf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check(const ChainParams& params, const Emissions& emissions) {
  if (emissions.length == 0) throw DataError("crf: empty window");
  if (emissions.num_labels != params.num_labels) throw DataError("crf: label count mismatch");
}

bool permitted(std::span<const int> allowed, std::size_t position, std::size_t label) {
  return allowed.empty() || allowed[position] < 0 || static_cast<std::size_t>(allowed[position]) == label;
}

}  // namespace

double log_sum_exp(std::span<const double> values) {
  double m = kNegInf;
  for (double v : values) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

double sequence_score(const ChainParams& params, const Emissions& emissions, std::span<const std::size_t> labels) {
  check(params, emissions);
  if (labels.size() != emissions.length) {
    throw DataError("crf: label sequence has length " + std::to_string(labels.size()) + ", window has " +
                    std::to_string(emissions.length));
  }
  double score = params.start[labels[0]] + params.end[labels.back()];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    score += emissions(i, labels[i]);
    if (i > 0) score += params.transition(labels[i - 1], labels[i]);
  }
  return score;
}

double log_partition(const ChainParams& params, const Emissions& emissions) {
  check(params, emissions);
  const std::size_t n = emissions.length;
  const std::size_t L = params.num_labels;
  std::vector<double> alpha(L), next(L), terms(L);
  for (std::size_t y = 0; y < L; ++y) alpha[y] = params.start[y] + emissions(0, y);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t y = 0; y < L; ++y) {
      for (std::size_t p = 0; p < L; ++p) terms[p] = alpha[p] + params.transition(p, y);
      next[y] = log_sum_exp(terms) + emissions(i, y);
    }
    alpha.swap(next);
  }
  for (std::size_t y = 0; y < L; ++y) terms[y] = alpha[y] + params.end[y];
  return log_sum_exp(terms);
}

Posteriors forward_backward(const ChainParams& params, const Emissions& emissions, std::span<const int> allowed) {
  check(params, emissions);
  const std::size_t n = emissions.length;
  const std::size_t L = params.num_labels;
  if (!allowed.empty() && allowed.size() != n) throw DataError("crf: constraint length mismatch");

  auto emit = [&](std::size_t i, std::size_t y) { return permitted(allowed, i, y) ? emissions(i, y) : kNegInf; };

  std::vector<double> alpha(n * L, kNegInf), beta(n * L, kNegInf);
  for (std::size_t y = 0; y < L; ++y) alpha[y] = params.start[y] + emit(0, y);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t y = 0; y < L; ++y) {
      const double e = emit(i, y);
      if (e == kNegInf) continue;
      double acc = kNegInf;
      for (std::size_t p = 0; p < L; ++p) acc = lse2(acc, alpha[(i - 1) * L + p] + params.transition(p, y));
      alpha[i * L + y] = acc + e;
    }
  }
  for (std::size_t y = 0; y < L; ++y) beta[(n - 1) * L + y] = params.end[y];
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t y = 0; y < L; ++y) {
      double acc = kNegInf;
      for (std::size_t q = 0; q < L; ++q) {
        const double e = emit(i + 1, q);
        if (e == kNegInf) continue;
        acc = lse2(acc, params.transition(y, q) + e + beta[(i + 1) * L + q]);
      }
      beta[i * L + y] = acc;
    }
  }

  Posteriors post;
  double log_z = kNegInf;
  for (std::size_t y = 0; y < L; ++y) log_z = lse2(log_z, alpha[(n - 1) * L + y] + params.end[y]);
  post.log_z = log_z;
  if (log_z == kNegInf) throw DataError("crf: constraints admit no sequence");

  post.node.assign(n * L, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < L; ++y) {
      const double a = alpha[i * L + y];
      if (a == kNegInf) continue;
      post.node[i * L + y] = std::exp(a + beta[i * L + y] - log_z);
    }
  }
  if (n > 1) {
    post.edge.assign((n - 1) * L * L, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t p = 0; p < L; ++p) {
        const double a = alpha[i * L + p];
        if (a == kNegInf) continue;
        for (std::size_t q = 0; q < L; ++q) {
          const double e = emit(i + 1, q);
          if (e == kNegInf) continue;
          post.edge[(i * L + p) * L + q] =
              std::exp(a + params.transition(p, q) + e + beta[(i + 1) * L + q] - log_z);
        }
      }
    }
  }
  return post;
}

Decoded viterbi(const ChainParams& params, const Emissions& emissions) {
  check(params, emissions);
  const std::size_t n = emissions.length;
  const std::size_t L = params.num_labels;

  // best[i][y]: best score of positions i..n-1 given label y at i, excluding
  // the emission at i. Decoding then runs left to right, so the first
  // maximiser at each step gives the left-lexicographically smallest optimum.
  std::vector<double> best(n * L, 0.0);
  for (std::size_t y = 0; y < L; ++y) best[(n - 1) * L + y] = params.end[y];
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t y = 0; y < L; ++y) {
      double m = kNegInf;
      for (std::size_t q = 0; q < L; ++q) {
        m = std::max(m, params.transition(y, q) + emissions(i + 1, q) + best[(i + 1) * L + q]);
      }
      best[i * L + y] = m;
    }
  }

  Decoded out;
  out.labels.resize(n);
  double top = kNegInf;
  for (std::size_t y = 0; y < L; ++y) {
    const double v = params.start[y] + emissions(0, y) + best[y];
    if (v > top) {
      top = v;
      out.labels[0] = y;
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t prev = out.labels[i - 1];
    double m = kNegInf;
    for (std::size_t y = 0; y < L; ++y) {
      const double v = params.transition(prev, y) + emissions(i, y) + best[i * L + y];
      if (v > m) {
        m = v;
        out.labels[i] = y;
      }
    }
  }
  out.score = sequence_score(params, emissions, out.labels);
  return out;
}

}  // namespace chatact::crf
