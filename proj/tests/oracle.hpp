// Test-side oracles, independent of the library implementation paths they
// verify: central finite differences, a naive full-sort retrieval oracle,
// and literal transcriptions of the loss formulas.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "exf/matrix.hpp"
#include "exf/model.hpp"
#include "exf/numcore.hpp"

namespace oracle {

constexpr double kFdStep = 1e-5;

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Max relative error between an analytic gradient and central differences
// of `value` over every entry of x.
template <typename ValueFn>
double grad_rel_err(exf::Matrix x, const exf::Matrix& analytic, ValueFn value) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    double keep = x.data[k];
    x.data[k] = keep + kFdStep;
    double up = value(x);
    x.data[k] = keep - kFdStep;
    double down = value(x);
    x.data[k] = keep;
    double fd = (up - down) / (2.0 * kFdStep);
    worst = std::max(worst, rel_err(analytic.data[k], fd));
  }
  return worst;
}

inline double naive_dist(const exf::Matrix& x, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.cols; ++k) {
    double diff = x(i, k) - x(j, k);
    s += diff * diff;
  }
  return std::sqrt(s);
}

// Literal transcription of the relative-distance attract/repel loss.
inline double relative_pair_loss_value(const exf::Matrix& x, const exf::Matrix& w,
                                       double delta) {
  const std::size_t n = x.rows;
  std::vector<double> mu(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) mu[i] += naive_dist(x, i, k);
    mu[i] /= static_cast<double>(n);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double r = naive_dist(x, i, j) / mu[i];
      double hinge = std::max(0.0, delta - r);
      total += w(i, j) * r * r + (1.0 - w(i, j)) * hinge * hinge;
    }
  return total / static_cast<double>(n);
}

// Full-sort Recall@K: for each query sort all other samples by
// (distance, index) and look for a same-class sample in the first K.
inline double recall_at_k_naive(const exf::Matrix& x,
                                const std::vector<std::size_t>& labels,
                                std::size_t k) {
  const std::size_t n = x.rows;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j = 0; j < n; ++j)
      if (j != q) order.emplace_back(naive_dist(x, q, j), j);
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < k; ++r)
      if (labels[order[r].second] == labels[q]) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

// Finite differences are only valid where the probed function is smooth;
// instances whose hidden pre-activations sit within `margin` of the
// rectifier kink are rejected by the callers.
inline bool relu_margin_ok(const exf::MlpModel& m, const exf::Matrix& x,
                           double margin = 1e-3) {
  exf::ForwardTrace trace;
  exf::mlp_forward(m, x, trace);
  for (std::size_t l = 0; l + 1 < m.layer_count(); ++l)
    for (double z : trace.pre_acts[l].data)
      if (std::abs(z) < margin) return false;
  return true;
}

inline exf::Matrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                 double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  exf::Matrix x(n, d);
  for (double& v : x.data) v = gauss(rng);
  return x;
}

inline exf::WeightMatrix random_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  exf::Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = unif(rng);
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return exf::WeightMatrix{n, std::move(w)};
}

inline std::vector<std::size_t> random_labels(std::mt19937_64& rng, std::size_t n,
                                              std::size_t classes) {
  std::uniform_int_distribution<std::size_t> dist(0, classes - 1);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = dist(rng);
  return labels;
}

}  // namespace oracle
