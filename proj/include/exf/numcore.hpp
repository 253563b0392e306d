#pragma once

#include <cstddef>
#include <vector>

#include "exf/matrix.hpp"

namespace exf {

// Pairwise Euclidean geometry of a batch. Both the distances and their
// squares are kept; dist[i][j]^2 == d2[i][j] within 1e-9.
struct DistanceMatrix {
  std::size_t n = 0;
  Matrix dist;  // n x n, symmetric, zero diagonal
  Matrix d2;    // n x n squared distances
};

// Relaxed relation labels w_ij in [0,1]: symmetric with unit diagonal.
struct WeightMatrix {
  std::size_t n = 0;
  Matrix w;

  void validate() const;
  static WeightMatrix from(Matrix w);
};

// dist[i][j] = ||row_i - row_j||_2 for every ordered pair.
DistanceMatrix pairwise_distances(const Matrix& x);

// Rescales each row to unit Euclidean norm. A zero row is an error naming
// the row index.
Matrix l2_normalize_rows(const Matrix& x);

// Vector-Jacobian product of l2_normalize_rows: given the original rows,
// the normalized rows and a gradient w.r.t. the normalized output, returns
// the gradient w.r.t. the original rows.
Matrix l2_normalize_rows_vjp(const Matrix& x, const Matrix& normalized,
                             const Matrix& grad_out);

// w[i][j] = exp(-d2[i][j] / sigma); the diagonal is exactly 1.
WeightMatrix gaussian_weights(const DistanceMatrix& d, double sigma);

// Batch-mean distance of each anchor: mu_i = (1/n) sum_k dist[i][k],
// the self pair included (it contributes 0).
std::vector<double> row_mean_distances(const DistanceMatrix& d);

// r[i][j] = dist[i][j] / mu_i. Not symmetric in general; zero diagonal.
// Requires n >= 3 and mu_i > 0 for every row.
Matrix relative_distances(const DistanceMatrix& d);

// Singular values of x, sorted descending, computed by one-sided Jacobi
// in double precision (convergence threshold 1e-10 on off-diagonal mass).
std::vector<double> singular_values(const Matrix& x);

}  // namespace exf
