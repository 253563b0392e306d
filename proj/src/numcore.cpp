#include "exf/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "exf/util.hpp"

namespace exf {

namespace {

// Static row partition over at most thread_cap() workers. Each worker owns
// a disjoint row range, so results are identical for any thread count.
template <typename Fn>
void for_each_row(std::size_t n, Fn fn) {
  std::size_t workers = std::min(thread_cap(), n == 0 ? std::size_t{1} : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

void WeightMatrix::validate() const {
  if (w.rows != n || w.cols != n) throw InvalidInput("WeightMatrix: shape mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (w(i, i) != 1.0)
      throw InvalidInput("WeightMatrix: diagonal entry " + std::to_string(i) +
                         " is not 1");
    for (std::size_t j = 0; j < n; ++j) {
      double v = w(i, j);
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidInput("WeightMatrix: entry out of [0,1] at (" +
                           std::to_string(i) + "," + std::to_string(j) + ")");
      if (v != w(j, i)) throw InvalidInput("WeightMatrix: not symmetric");
    }
  }
}

WeightMatrix WeightMatrix::from(Matrix w) {
  if (w.rows != w.cols) throw InvalidInput("WeightMatrix: matrix not square");
  WeightMatrix out{w.rows, std::move(w)};
  out.validate();
  return out;
}

DistanceMatrix pairwise_distances(const Matrix& x) {
  if (x.rows == 0 || x.cols == 0) throw InvalidInput("pairwise_distances: empty matrix");
  if (!x.all_finite()) throw InvalidInput("pairwise_distances: non-finite input");

  const std::size_t n = x.rows;
  DistanceMatrix out;
  out.n = n;
  out.dist = Matrix(n, n);
  out.d2 = Matrix(n, n);
  for_each_row(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      auto ri = x.row(i), rj = x.row(j);
      for (std::size_t k = 0; k < x.cols; ++k) {
        double diff = ri[k] - rj[k];
        s += diff * diff;
      }
      out.d2(i, j) = s;
      out.dist(i, j) = std::sqrt(s);
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      out.d2(j, i) = out.d2(i, j);
      out.dist(j, i) = out.dist(i, j);
    }
  return out;
}

Matrix l2_normalize_rows(const Matrix& x) {
  if (x.rows == 0 || x.cols == 0) throw InvalidInput("l2_normalize_rows: empty matrix");
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    double norm = std::sqrt(s);
    if (norm == 0.0)
      throw DegenerateInput("l2_normalize_rows: zero row at index " + std::to_string(i));
    for (std::size_t k = 0; k < x.cols; ++k) out(i, k) = x(i, k) / norm;
  }
  return out;
}

Matrix l2_normalize_rows_vjp(const Matrix& x, const Matrix& normalized,
                             const Matrix& grad_out) {
  if (!x.same_shape(normalized) || !x.same_shape(grad_out))
    throw InvalidInput("l2_normalize_rows_vjp: shape mismatch");
  Matrix grad_in(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    double norm = std::sqrt(s);
    if (norm == 0.0)
      throw DegenerateInput("l2_normalize_rows_vjp: zero row at index " +
                            std::to_string(i));
    double dot = 0.0;
    for (std::size_t k = 0; k < x.cols; ++k) dot += grad_out(i, k) * normalized(i, k);
    for (std::size_t k = 0; k < x.cols; ++k)
      grad_in(i, k) = (grad_out(i, k) - dot * normalized(i, k)) / norm;
  }
  return grad_in;
}

WeightMatrix gaussian_weights(const DistanceMatrix& d, double sigma) {
  if (sigma <= 0.0) throw InvalidInput("gaussian_weights: sigma must be > 0");
  WeightMatrix out;
  out.n = d.n;
  out.w = Matrix(d.n, d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    out.w(i, i) = 1.0;
    for (std::size_t j = i + 1; j < d.n; ++j) {
      double v = std::exp(-d.d2(i, j) / sigma);
      out.w(i, j) = v;
      out.w(j, i) = v;
    }
  }
  return out;
}

std::vector<double> row_mean_distances(const DistanceMatrix& d) {
  std::vector<double> mu(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    Accumulator acc;
    for (std::size_t k = 0; k < d.n; ++k) acc.add(d.dist(i, k));
    mu[i] = acc.total() / static_cast<double>(d.n);
  }
  return mu;
}

Matrix relative_distances(const DistanceMatrix& d) {
  if (d.n < 3)
    throw InvalidInput("relative_distances: batch too small (n = " +
                       std::to_string(d.n) + ", need n >= 3)");
  auto mu = row_mean_distances(d);
  Matrix r(d.n, d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    if (mu[i] == 0.0)
      throw DegenerateInput("relative_distances: degenerate batch, mu = 0 at row " +
                            std::to_string(i));
    for (std::size_t j = 0; j < d.n; ++j) r(i, j) = d.dist(i, j) / mu[i];
  }
  return r;
}

std::vector<double> singular_values(const Matrix& x) {
  if (x.rows == 0 || x.cols == 0) throw InvalidInput("singular_values: empty matrix");
  if (!x.all_finite()) throw InvalidInput("singular_values: non-finite input");

  // One-sided Jacobi on the tall orientation: columns of a (m x k) matrix
  // with m >= k are rotated pairwise until orthogonal.
  std::size_t m = x.rows, k = x.cols;
  bool transposed = m < k;
  if (transposed) std::swap(m, k);
  std::vector<std::vector<double>> col(k, std::vector<double>(m));
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      if (transposed)
        col[i][j] = x(i, j);
      else
        col[j][i] = x(i, j);
    }

  const double tol = 1e-10;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += col[p][i] * col[p][i];
          beta += col[q][i] * col[q][i];
          gamma += col[p][i] * col[q][i];
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        double rel = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, rel);
        if (rel <= tol) continue;
        double zeta = (beta - alpha) / (2.0 * gamma);
        double t = ((zeta >= 0.0) ? 1.0 : -1.0) /
                   (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          double vp = col[p][i], vq = col[q][i];
          col[p][i] = c * vp - s * vq;
          col[q][i] = s * vp + c * vq;
        }
      }
    }
    if (off <= tol) break;
  }

  std::vector<double> sv(k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (double v : col[j]) s += v * v;
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

}  // namespace exf
