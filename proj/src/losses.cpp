#include "exf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exf/util.hpp"

namespace exf {

namespace {

void check_symmetric_binary(const Matrix& y) {
  if (y.rows != y.cols) throw InvalidInput("labels: matrix not square");
  for (std::size_t i = 0; i < y.rows; ++i) {
    if (y(i, i) != 1.0) throw InvalidInput("labels: diagonal must be 1");
    for (std::size_t j = 0; j < y.cols; ++j) {
      double v = y(i, j);
      if (v != 0.0 && v != 1.0) throw InvalidInput("labels: entries must be 0 or 1");
      if (v != y(j, i)) throw InvalidInput("labels: matrix not symmetric");
    }
  }
}

// Accumulate distance-space gradients back onto the embeddings:
// grad_f += sum over ordered pairs of c[a][b] * d(dist_ab)/d(f). Coincident
// pairs (dist = 0) have no defined direction and contribute nothing.
Matrix distance_grads_to_embeddings(const Matrix& x, const DistanceMatrix& d,
                                    const Matrix& c) {
  Matrix grad(x.rows, x.cols);
  for (std::size_t a = 0; a < x.rows; ++a) {
    for (std::size_t b = a + 1; b < x.rows; ++b) {
      double dist = d.dist(a, b);
      if (dist == 0.0) continue;
      double coeff = (c(a, b) + c(b, a)) / dist;
      for (std::size_t k = 0; k < x.cols; ++k) {
        double g = coeff * (x(a, k) - x(b, k));
        grad(a, k) += g;
        grad(b, k) -= g;
      }
    }
  }
  return grad;
}

// Shared core of the relative-distance losses. `pair_grad` maps
// (i, j, r_ij) to dL/dr_ij and `pair_value` to the summand; both see the
// per-pair weight. The chain rule through mu_i is applied here once.
template <typename ValueFn, typename RGradFn>
LossResult relative_loss(const Matrix& x, const Matrix& w, ValueFn pair_value,
                         RGradFn r_grad) {
  const std::size_t n = x.rows;
  DistanceMatrix d = pairwise_distances(x);
  if (n < 3)
    throw InvalidInput("relative loss: batch too small (n = " + std::to_string(n) +
                       ", need n >= 3)");
  auto mu = row_mean_distances(d);
  for (std::size_t i = 0; i < n; ++i)
    if (mu[i] == 0.0)
      throw DegenerateInput("relative loss: degenerate batch, mu = 0 at row " +
                            std::to_string(i));

  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r(i, j) = d.dist(i, j) / mu[i];

  Accumulator value;
  Matrix g(n, n);  // g(i,j) = dL/dr_ij
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      value.add(pair_value(i, j, r(i, j), w(i, j)));
      g(i, j) = r_grad(i, j, r(i, j), w(i, j));
    }

  // dL/ddist_ab = g_ab / mu_a - (1/(n mu_a)) * sum_j g_aj r_aj, the second
  // term being the coupling of mu_a to every distance in row a.
  Matrix c(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    Accumulator srow;
    for (std::size_t j = 0; j < n; ++j) srow.add(g(a, j) * r(a, j));
    double coupling = srow.total() / static_cast<double>(n);
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      c(a, b) = (g(a, b) - coupling) / mu[a];
    }
  }

  LossResult out;
  out.value = value.total() / static_cast<double>(n);
  out.grad = distance_grads_to_embeddings(x, d, c);
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (delta <= 0.0) throw InvalidInput("LossConfig: delta must be > 0");
  if (sigma <= 0.0) throw InvalidInput("LossConfig: sigma must be > 0");
  if (alpha <= 0.0) throw InvalidInput("LossConfig: alpha must be > 0");
  if (beta <= 0.0) throw InvalidInput("LossConfig: beta must be > 0");
  if (temperature <= 0.0) throw InvalidInput("LossConfig: temperature must be > 0");
}

Matrix class_equivalence(const std::vector<std::size_t>& labels) {
  const std::size_t n = labels.size();
  Matrix y(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) y(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
  return y;
}

double contrastive_distance_grad(double d, bool positive, double delta,
                                 std::size_t n) {
  if (positive) return 2.0 / static_cast<double>(n) * d;
  if (d < delta) return 2.0 / static_cast<double>(n) * (d - delta);
  return 0.0;
}

double relaxed_abs_distance_grad(double d, double w, double delta, std::size_t n) {
  if (d < delta) return 2.0 / static_cast<double>(n) * (d - delta * (1.0 - w));
  return 2.0 / static_cast<double>(n) * w * d;
}

namespace {

// Absolute-distance attract/repel loss shared by contrastive() and
// relaxed_contrastive_abs(); w entries may be binary or relaxed.
LossResult absolute_pair_loss(const Matrix& x, const Matrix& w, double delta) {
  const std::size_t n = x.rows;
  DistanceMatrix d = pairwise_distances(x);

  Accumulator value;
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double dist = d.dist(i, j);
      double wij = w(i, j);
      double hinge = std::max(0.0, delta - dist);
      value.add(wij * dist * dist + (1.0 - wij) * hinge * hinge);
      c(i, j) = (2.0 * wij * dist - 2.0 * (1.0 - wij) * hinge) / static_cast<double>(n);
    }

  LossResult out;
  out.value = value.total() / static_cast<double>(n);
  out.grad = distance_grads_to_embeddings(x, d, c);
  return out;
}

}  // namespace

LossResult contrastive(const Matrix& x, const Matrix& y, double delta) {
  if (delta <= 0.0) throw InvalidInput("contrastive: delta must be > 0");
  check_symmetric_binary(y);
  if (y.rows != x.rows) throw InvalidInput("contrastive: label/batch size mismatch");
  return absolute_pair_loss(x, y, delta);
}

LossResult relaxed_contrastive_abs(const Matrix& x, const WeightMatrix& w,
                                   double delta) {
  if (delta <= 0.0) throw InvalidInput("relaxed_contrastive_abs: delta must be > 0");
  if (w.n != x.rows)
    throw InvalidInput("relaxed_contrastive_abs: weight/batch size mismatch");
  return absolute_pair_loss(x, w.w, delta);
}

LossResult relaxed_contrastive(const Matrix& x, const WeightMatrix& w, double delta) {
  if (delta <= 0.0) throw InvalidInput("relaxed_contrastive: delta must be > 0");
  if (w.n != x.rows)
    throw InvalidInput("relaxed_contrastive: weight/batch size mismatch");
  const double n = static_cast<double>(x.rows);
  return relative_loss(
      x, w.w,
      [&](std::size_t, std::size_t, double r, double wij) {
        double hinge = std::max(0.0, delta - r);
        return wij * r * r + (1.0 - wij) * hinge * hinge;
      },
      [&](std::size_t, std::size_t, double r, double wij) {
        double hinge = std::max(0.0, delta - r);
        return (2.0 * wij * r - 2.0 * (1.0 - wij) * hinge) / n;
      });
}

LossResult unrelaxed_relative(const Matrix& x, const Matrix& y, double delta) {
  if (delta <= 0.0) throw InvalidInput("unrelaxed_relative: delta must be > 0");
  check_symmetric_binary(y);
  if (y.rows != x.rows)
    throw InvalidInput("unrelaxed_relative: label/batch size mismatch");
  const double n = static_cast<double>(x.rows);
  return relative_loss(
      x, y,
      [&](std::size_t, std::size_t, double r, double yij) {
        double hinge = std::max(0.0, delta - r);
        return yij * r * r + (1.0 - yij) * hinge * hinge;
      },
      [&](std::size_t, std::size_t, double r, double yij) {
        double hinge = std::max(0.0, delta - r);
        return (2.0 * yij * r - 2.0 * (1.0 - yij) * hinge) / n;
      });
}

LossResult relaxed_ms(const Matrix& x, const WeightMatrix& w, const LossConfig& cfg) {
  cfg.validate();
  if (w.n != x.rows) throw InvalidInput("relaxed_ms: weight/batch size mismatch");
  const std::size_t n = x.rows;
  if (n < 3)
    throw InvalidInput("relaxed_ms: batch too small (n = " + std::to_string(n) +
                       ", need n >= 3)");

  // The pooled sums A_i, B_i must be formed before per-pair gradients, so
  // this loss does not fit the relative_loss() pair callbacks; the mu chain
  // rule below is the same.
  DistanceMatrix d = pairwise_distances(x);
  auto mu = row_mean_distances(d);
  for (std::size_t i = 0; i < n; ++i)
    if (mu[i] == 0.0)
      throw DegenerateInput("relaxed_ms: degenerate batch, mu = 0 at row " +
                            std::to_string(i));

  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r(i, j) = d.dist(i, j) / mu[i];

  const double a = cfg.alpha, b = cfg.beta, delta = cfg.delta;
  Accumulator value;
  std::vector<double> attract(n), repel(n);
  for (std::size_t i = 0; i < n; ++i) {
    Accumulator A, B;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      A.add(w.w(i, j) * std::exp(a * r(i, j)));
      B.add((1.0 - w.w(i, j)) * std::exp(b * (delta - r(i, j))));
    }
    attract[i] = A.total();
    repel[i] = B.total();
    value.add(std::log1p(attract[i]) / a + std::log1p(repel[i]) / b);
  }

  Matrix g(n, n);  // dL/dr_ij
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double ga = w.w(i, j) * std::exp(a * r(i, j)) / (1.0 + attract[i]);
      double gb = (1.0 - w.w(i, j)) * std::exp(b * (delta - r(i, j))) / (1.0 + repel[i]);
      g(i, j) = (ga - gb) / static_cast<double>(n);
    }

  Matrix c(n, n);
  for (std::size_t p = 0; p < n; ++p) {
    Accumulator srow;
    for (std::size_t j = 0; j < n; ++j) srow.add(g(p, j) * r(p, j));
    double coupling = srow.total() / static_cast<double>(n);
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      c(p, q) = (g(p, q) - coupling) / mu[p];
    }
  }

  LossResult out;
  out.value = value.total() / static_cast<double>(n);
  out.grad = distance_grads_to_embeddings(x, d, c);
  return out;
}

LossResult hkd_kl(const Matrix& student_logits, const Matrix& teacher_logits,
                  double temperature) {
  if (!student_logits.same_shape(teacher_logits))
    throw InvalidInput("hkd_kl: logit shape mismatch");
  if (temperature <= 0.0) throw InvalidInput("hkd_kl: temperature must be > 0");
  const std::size_t n = student_logits.rows, cdim = student_logits.cols;
  const double T = temperature;

  LossResult out;
  out.grad = Matrix(n, cdim);
  Accumulator value;
  std::vector<double> p(cdim), logp(cdim), q(cdim), logq(cdim);
  for (std::size_t i = 0; i < n; ++i) {
    auto log_softmax = [&](const Matrix& z, std::vector<double>& prob,
                           std::vector<double>& logprob) {
      double mx = z(i, 0);
      for (std::size_t k = 1; k < cdim; ++k) mx = std::max(mx, z(i, k));
      double sum = 0.0;
      for (std::size_t k = 0; k < cdim; ++k) sum += std::exp(z(i, k) / T - mx / T);
      double logz = std::log(sum) + mx / T;
      for (std::size_t k = 0; k < cdim; ++k) {
        logprob[k] = z(i, k) / T - logz;
        prob[k] = std::exp(logprob[k]);
      }
    };
    log_softmax(teacher_logits, p, logp);
    log_softmax(student_logits, q, logq);
    double kl = 0.0;
    for (std::size_t k = 0; k < cdim; ++k) kl += p[k] * (logp[k] - logq[k]);
    value.add(T * T * kl);
    for (std::size_t k = 0; k < cdim; ++k)
      out.grad(i, k) = T / static_cast<double>(n) * (q[k] - p[k]);
  }
  out.value = std::max(0.0, value.total() / static_cast<double>(n));
  return out;
}

LossResult cross_entropy(const Matrix& logits, const std::vector<std::size_t>& labels) {
  if (labels.size() != logits.rows)
    throw InvalidInput("cross_entropy: label count mismatch");
  const std::size_t n = logits.rows, cdim = logits.cols;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= cdim)
      throw InvalidInput("cross_entropy: label " + std::to_string(labels[i]) +
                         " out of range at row " + std::to_string(i));

  LossResult out;
  out.grad = Matrix(n, cdim);
  Accumulator value;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits(i, 0);
    for (std::size_t k = 1; k < cdim; ++k) mx = std::max(mx, logits(i, k));
    double sum = 0.0;
    for (std::size_t k = 0; k < cdim; ++k) sum += std::exp(logits(i, k) - mx);
    double logz = std::log(sum) + mx;
    value.add(logz - logits(i, labels[i]));
    for (std::size_t k = 0; k < cdim; ++k) {
      double soft = std::exp(logits(i, k) - logz);
      out.grad(i, k) = (soft - (labels[i] == k ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  out.value = value.total() / static_cast<double>(n);
  return out;
}

}  // namespace exf
