#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "exf/matrix.hpp"
#include "exf/numcore.hpp"

#include "json.hpp"

namespace exf {

struct RetrievalReport {
  std::vector<std::size_t> k_values;
  std::vector<double> recall;  // aligned with k_values, nondecreasing
  std::size_t n_queries = 0;

  nlohmann::json to_json() const;
};

struct SpectralReport {
  double rho = 0.0;
  std::vector<double> spectrum;  // normalized singular values, sum 1, descending

  nlohmann::json to_json() const;
};

struct RankedPair {
  std::size_t i = 0, j = 0;  // i < j
  double w = 0.0;
  bool same_class = false;
};

struct PairRanking {
  std::vector<RankedPair> top;     // descending by w
  std::vector<RankedPair> bottom;  // the lowest-weight pairs, descending by w

  nlohmann::json to_json() const;
  std::string render_text() const;
};

// Fraction of queries with at least one same-class sample among their K
// nearest Euclidean neighbors (queries excluded from their own lists;
// distance ties broken by index). Requires every K < n.
RetrievalReport recall_at_k(const Matrix& embeddings,
                            const std::vector<std::size_t>& labels,
                            const std::vector<std::size_t>& k_values);

// Singular-value spectrum of the mean-centered embeddings, normalized to
// sum 1 and zero-padded to length d; rho is its KL divergence from the
// uniform distribution over d directions.
SpectralReport spectral_decay(const Matrix& embeddings);

// Top and bottom `top` unordered pairs by weight, annotated with class
// agreement; ties broken by (i, j) lexicographic order.
PairRanking rank_pairs_by_weight(const WeightMatrix& w,
                                 const std::vector<std::size_t>& labels,
                                 std::size_t top);

}  // namespace exf
