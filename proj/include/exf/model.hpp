#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "exf/matrix.hpp"

namespace exf {

// Small fully-connected embedding network: affine layers with rectifier
// nonlinearities on hidden layers and an identity output layer. All
// parameters live in one contiguous buffer, per layer weights (in x out,
// row-major) followed by biases.
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<double> params;

  std::size_t layer_count() const { return layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t param_count() const { return params.size(); }

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  std::span<double> weight(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
};

// Per-layer pre-activations and activations retained for the backward pass.
struct ForwardTrace {
  std::vector<std::size_t> layer_dims;
  std::size_t batch = 0;
  Matrix input;
  std::vector<Matrix> pre_acts;  // one per layer
  std::vector<Matrix> acts;      // post-nonlinearity, one per layer
};

// Flat parameter gradients (aligned with MlpModel::params) plus the
// gradient w.r.t. the network input.
struct MlpGradients {
  std::vector<double> params;
  Matrix input;
};

// Fan-in-scaled uniform weights, zero biases; bit-identical per seed.
MlpModel mlp_init(const std::vector<std::size_t>& layer_dims, std::uint64_t seed);

std::size_t mlp_param_count(const std::vector<std::size_t>& layer_dims);

Matrix mlp_forward(const MlpModel& m, const Matrix& x);
Matrix mlp_forward(const MlpModel& m, const Matrix& x, ForwardTrace& trace);

MlpGradients mlp_backward(const MlpModel& m, const ForwardTrace& trace,
                          const Matrix& grad_out);

// Backward pass with an extra gradient injected into the activation of
// `tap_layer` (0-based), used when a loss reads an intermediate layer.
MlpGradients mlp_backward(const MlpModel& m, const ForwardTrace& trace,
                          const Matrix& grad_out, std::size_t tap_layer,
                          const Matrix& tap_grad);

// Activation feeding the final layer; for a classifier these are the
// features the distillation losses consume.
const Matrix& penultimate_activations(const ForwardTrace& trace);

}  // namespace exf
