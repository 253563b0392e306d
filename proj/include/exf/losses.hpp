#pragma once

#include <cstddef>
#include <vector>

#include "exf/matrix.hpp"
#include "exf/numcore.hpp"

namespace exf {

// Hyperparameters shared by the training objectives. Defaults: delta and
// sigma are 1, the MS scales are (1, 4), the softening temperature is 4.
struct LossConfig {
  double delta = 1.0;
  double sigma = 1.0;
  double alpha = 1.0;
  double beta = 4.0;
  double temperature = 4.0;

  void validate() const;
};

// Scalar loss plus its analytical gradient w.r.t. the embeddings (or
// logits) passed in. Gradients are hand-derived closed forms; finite
// differences are the correctness oracle in the tests.
struct LossResult {
  double value = 0.0;
  Matrix grad;
};

// Original contrastive loss over a batch: mean of y*d^2 attracting terms
// and (1-y)*hinge(delta - d)^2 repelling terms. y is the binary n x n
// class-equivalence matrix (symmetric, unit diagonal). The caller supplies
// embeddings already l2-row-normalized; they are not re-normalized here.
LossResult contrastive(const Matrix& x, const Matrix& y, double delta);

// Per-pair gradient of the contrastive loss w.r.t. the pair distance:
// (2/n)d for positives, (2/n)(d - delta) for negatives inside the margin,
// 0 otherwise.
double contrastive_distance_grad(double d, bool positive, double delta,
                                 std::size_t n);

// Relaxed contrastive loss, absolute-distance form: binary labels replaced
// by weights w in [0,1]. With binary w it reduces exactly to contrastive().
LossResult relaxed_contrastive_abs(const Matrix& x, const WeightMatrix& w,
                                   double delta);

// Per-pair distance gradient of the absolute relaxed loss:
// (2/n){d - delta(1-w)} inside the margin, (2/n) w d beyond it. Zero at
// d = delta(1-w).
double relaxed_abs_distance_grad(double d, double w, double delta, std::size_t n);

// Relaxed contrastive loss, final relative-distance form: pair distances
// divided by the anchor's batch-mean distance mu_i. The gradient carries
// the full dependence of every mu_i on every embedding. Requires n >= 3
// and no row of coincident points (mu_i = 0).
LossResult relaxed_contrastive(const Matrix& x, const WeightMatrix& w, double delta);

// Ablation: the relative-distance loss with the binary class-equivalence
// labels y in place of the relaxed weights.
LossResult unrelaxed_relative(const Matrix& x, const Matrix& y, double delta);

// Relaxed MS loss: log-sum-exp pooled attract/repel terms over relative
// distances, j != i in both inner sums.
LossResult relaxed_ms(const Matrix& x, const WeightMatrix& w, const LossConfig& cfg);

// Soft-target distillation: T^2 * KL(softmax(teacher/T) || softmax(student/T)),
// mean over the batch. Gradient w.r.t. the student logits only.
LossResult hkd_kl(const Matrix& student_logits, const Matrix& teacher_logits,
                  double temperature);

// Mean negative log-softmax of the true class; gradient (softmax - onehot)/n.
LossResult cross_entropy(const Matrix& logits, const std::vector<std::size_t>& labels);

// Binary class-equivalence matrix from per-row labels (unit diagonal).
Matrix class_equivalence(const std::vector<std::size_t>& labels);

}  // namespace exf
