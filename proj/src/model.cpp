#include "exf/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "exf/error.hpp"

namespace exf {

std::size_t MlpModel::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l)
    off += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  return off;
}

std::size_t MlpModel::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_dims[layer] * layer_dims[layer + 1];
}

std::span<double> MlpModel::weight(std::size_t layer) {
  return {params.data() + weight_offset(layer),
          layer_dims[layer] * layer_dims[layer + 1]};
}
std::span<const double> MlpModel::weight(std::size_t layer) const {
  return {params.data() + weight_offset(layer),
          layer_dims[layer] * layer_dims[layer + 1]};
}
std::span<double> MlpModel::bias(std::size_t layer) {
  return {params.data() + bias_offset(layer), layer_dims[layer + 1]};
}
std::span<const double> MlpModel::bias(std::size_t layer) const {
  return {params.data() + bias_offset(layer), layer_dims[layer + 1]};
}

std::size_t mlp_param_count(const std::vector<std::size_t>& layer_dims) {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
    count += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  return count;
}

MlpModel mlp_init(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2)
    throw InvalidInput("mlp_init: need at least input and output dims");
  for (std::size_t d : layer_dims)
    if (d == 0) throw InvalidInput("mlp_init: zero layer dimension");

  MlpModel m;
  m.layer_dims = layer_dims;
  m.params.assign(mlp_param_count(layer_dims), 0.0);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    double limit = std::sqrt(6.0 / static_cast<double>(layer_dims[l]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : m.weight(l)) w = dist(rng);
    // biases stay zero
  }
  return m;
}

namespace {

void affine_forward(const MlpModel& m, std::size_t layer, const Matrix& in,
                    Matrix& out) {
  const std::size_t din = m.layer_dims[layer], dout = m.layer_dims[layer + 1];
  auto w = m.weight(layer);
  auto b = m.bias(layer);
  for (std::size_t i = 0; i < in.rows; ++i) {
    for (std::size_t o = 0; o < dout; ++o) out(i, o) = b[o];
    for (std::size_t k = 0; k < din; ++k) {
      double v = in(i, k);
      if (v == 0.0) continue;
      const double* wrow = w.data() + k * dout;
      for (std::size_t o = 0; o < dout; ++o) out(i, o) += v * wrow[o];
    }
  }
}

}  // namespace

Matrix mlp_forward(const MlpModel& m, const Matrix& x, ForwardTrace& trace) {
  if (x.cols != m.input_dim())
    throw InvalidInput("mlp_forward: input dim " + std::to_string(x.cols) +
                       " does not match model input " + std::to_string(m.input_dim()));
  trace.layer_dims = m.layer_dims;
  trace.batch = x.rows;
  trace.input = x;
  trace.pre_acts.clear();
  trace.acts.clear();

  const Matrix* cur = &x;
  const std::size_t layers = m.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z(cur->rows, m.layer_dims[l + 1]);
    affine_forward(m, l, *cur, z);
    trace.pre_acts.push_back(z);
    if (l + 1 < layers) {
      // rectifier on hidden layers; derivative at exactly 0 is 0
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    trace.acts.push_back(std::move(z));
    cur = &trace.acts.back();
  }
  return trace.acts.back();
}

Matrix mlp_forward(const MlpModel& m, const Matrix& x) {
  ForwardTrace trace;
  return mlp_forward(m, x, trace);
}

namespace {

MlpGradients backward_impl(const MlpModel& m, const ForwardTrace& trace,
                           const Matrix& grad_out, const Matrix* tap_grad,
                           std::size_t tap_layer) {
  if (trace.layer_dims != m.layer_dims)
    throw InvalidInput("mlp_backward: trace does not match this model");
  const std::size_t layers = m.layer_count();
  if (trace.acts.size() != layers || trace.pre_acts.size() != layers ||
      trace.input.rows != trace.batch)
    throw InvalidInput("mlp_backward: stale or incomplete trace");
  if (grad_out.rows != trace.batch || grad_out.cols != m.output_dim())
    throw InvalidInput("mlp_backward: grad_out shape mismatch");

  MlpGradients grads;
  grads.params.assign(m.param_count(), 0.0);

  Matrix delta = grad_out;  // gradient w.r.t. the activation of layer l
  for (std::size_t li = layers; li-- > 0;) {
    if (tap_grad && li == tap_layer) {
      if (!tap_grad->same_shape(delta))
        throw InvalidInput("mlp_backward: tap gradient shape mismatch");
      delta += *tap_grad;
    }
    // through the rectifier (hidden layers only)
    if (li + 1 < layers) {
      const Matrix& z = trace.pre_acts[li];
      for (std::size_t k = 0; k < delta.data.size(); ++k)
        if (z.data[k] <= 0.0) delta.data[k] = 0.0;
    }
    const Matrix& in = li == 0 ? trace.input : trace.acts[li - 1];
    const std::size_t din = m.layer_dims[li], dout = m.layer_dims[li + 1];
    double* wgrad = grads.params.data() + m.weight_offset(li);
    double* bgrad = grads.params.data() + m.bias_offset(li);
    for (std::size_t i = 0; i < trace.batch; ++i) {
      for (std::size_t o = 0; o < dout; ++o) bgrad[o] += delta(i, o);
      for (std::size_t k = 0; k < din; ++k) {
        double v = in(i, k);
        if (v == 0.0) continue;
        double* wrow = wgrad + k * dout;
        for (std::size_t o = 0; o < dout; ++o) wrow[o] += v * delta(i, o);
      }
    }
    Matrix prev(trace.batch, din);
    auto w = m.weight(li);
    for (std::size_t i = 0; i < trace.batch; ++i)
      for (std::size_t k = 0; k < din; ++k) {
        double s = 0.0;
        const double* wrow = w.data() + k * dout;
        for (std::size_t o = 0; o < dout; ++o) s += wrow[o] * delta(i, o);
        prev(i, k) = s;
      }
    delta = std::move(prev);
  }
  grads.input = std::move(delta);
  return grads;
}

}  // namespace

MlpGradients mlp_backward(const MlpModel& m, const ForwardTrace& trace,
                          const Matrix& grad_out) {
  return backward_impl(m, trace, grad_out, nullptr, 0);
}

MlpGradients mlp_backward(const MlpModel& m, const ForwardTrace& trace,
                          const Matrix& grad_out, std::size_t tap_layer,
                          const Matrix& tap_grad) {
  if (tap_layer + 1 >= m.layer_count() + 1)
    throw InvalidInput("mlp_backward: tap layer out of range");
  return backward_impl(m, trace, grad_out, &tap_grad, tap_layer);
}

const Matrix& penultimate_activations(const ForwardTrace& trace) {
  if (trace.acts.size() < 2)
    throw InvalidInput("penultimate_activations: model has a single layer");
  return trace.acts[trace.acts.size() - 2];
}

}  // namespace exf
