#pragma once

// Dense feed-forward networks with hand-written reverse-mode gradients,
// Adam, and power-iteration spectral norms. Every learned function in the
// library (potentials, transport maps, classifiers, score models) is an Mlp.

#include "esuot/common.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace esuot::nn {

enum class Activation { ReLU, SiLU, None };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::SiLU: return "silu";
    case Activation::None: return "none";
  }
  return "?";
}

struct DenseLayer {
  Matrix weight;  // [out x in]
  Vector bias;    // [out]
};

/// Parameters of an MLP. The activation is applied between layers, never
/// after the last one. With `skip`, the network input is added to the output.
struct NetParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::SiLU;
  bool skip = false;

  Eigen::Index in_dim() const { return layers.front().weight.cols(); }
  Eigen::Index out_dim() const { return layers.back().weight.rows(); }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  void validate() const {
    if (layers.empty()) throw ConfigError("network has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      require_shape(l.bias.size() == l.weight.rows(), "bias/weight mismatch in layer " + std::to_string(k));
      if (k + 1 < layers.size())
        require_shape(l.weight.rows() == layers[k + 1].weight.cols(),
                      "layer " + std::to_string(k) + " output does not chain into layer " + std::to_string(k + 1));
      if (!l.weight.allFinite() || !l.bias.allFinite())
        throw NumericError("non-finite parameter in layer " + std::to_string(k));
    }
    if (skip && in_dim() != out_dim()) throw ConfigError("skip connection requires input dim == output dim");
  }
};

/// Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)); zero biases.
inline NetParams mlp_init(const std::vector<int>& layer_dims, Activation activation, bool skip,
                          std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ConfigError("mlp_init needs at least two layer dims");
  for (int d : layer_dims)
    if (d <= 0) throw ConfigError("mlp_init dims must be positive");
  if (skip && layer_dims.front() != layer_dims.back())
    throw ConfigError("skip connection requires input dim == output dim");

  Rng rng(seed);
  NetParams net;
  net.activation = activation;
  net.skip = skip;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const int in = layer_dims[k];
    const int out = layer_dims[k + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) layer.weight(i, j) = u(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::SiLU: return z.unaryExpr([](double v) { return v * sigmoid(v); });
    case Activation::None: return z;
  }
  return z;
}

inline Matrix activate_derivative(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::ReLU: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::SiLU:
      return z.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
    case Activation::None: return Matrix::Ones(z.rows(), z.cols());
  }
  return z;
}

}  // namespace detail

inline double silu(double x) { return x * detail::sigmoid(x); }

/// Intermediate values kept by the forward pass for backpropagation.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input to layer k
  std::vector<Matrix> pre_activations;
  Matrix output;
};

inline ForwardCache forward_cached(const NetParams& net, const Matrix& batch) {
  require_shape(batch.cols() == net.in_dim(), "forward: batch has " + std::to_string(batch.cols()) +
                                                  " columns, network expects " + std::to_string(net.in_dim()));
  ForwardCache cache;
  Matrix a = batch;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    Matrix z = a * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    cache.layer_inputs.push_back(std::move(a));
    const bool last = k + 1 == net.layers.size();
    a = last ? z : detail::activate(net.activation, z);
    if (!a.allFinite()) throw NumericError("forward: non-finite activation at layer " + std::to_string(k));
    cache.pre_activations.push_back(std::move(z));
  }
  if (net.skip) a += batch;
  cache.output = std::move(a);
  return cache;
}

inline Matrix mlp_forward(const NetParams& net, const Matrix& batch) { return forward_cached(net, batch).output; }

/// Per-parameter gradients, laid out exactly like NetParams::layers.
struct GradBundle {
  std::vector<DenseLayer> layers;
  double loss_value = 0.0;

  static GradBundle zeros_like(const NetParams& net) {
    GradBundle g;
    for (const auto& l : net.layers)
      g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    return g;
  }

  GradBundle& operator+=(const GradBundle& other) {
    require_shape(layers.size() == other.layers.size(), "gradient bundles differ in depth");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      layers[k].weight += other.layers[k].weight;
      layers[k].bias += other.layers[k].bias;
    }
    loss_value += other.loss_value;
    return *this;
  }
};

struct Backprop {
  GradBundle grads;
  Matrix input_grad;  // dL/d(batch)
};

/// Reverse pass given dL/d(output).
inline Backprop backward(const NetParams& net, const ForwardCache& cache, const Matrix& output_grad) {
  require_shape(output_grad.rows() == cache.output.rows() && output_grad.cols() == cache.output.cols(),
                "backward: output gradient shape does not match forward output");
  if (!output_grad.allFinite()) throw NumericError("backward: non-finite output gradient from loss");
  Backprop bp;
  bp.grads = GradBundle::zeros_like(net);
  Matrix delta = output_grad;
  for (std::size_t kk = net.layers.size(); kk-- > 0;) {
    const bool last = kk + 1 == net.layers.size();
    if (!last) delta = delta.cwiseProduct(detail::activate_derivative(net.activation, cache.pre_activations[kk]));
    bp.grads.layers[kk].weight.noalias() = delta.transpose() * cache.layer_inputs[kk];
    bp.grads.layers[kk].bias = delta.colwise().sum().transpose();
    delta = delta * net.layers[kk].weight;
    if (!delta.allFinite()) throw NumericError("backward: non-finite gradient at layer " + std::to_string(kk));
  }
  if (net.skip) delta += output_grad;
  bp.input_grad = std::move(delta);
  return bp;
}

/// Value of a loss on network outputs together with dL/d(output).
struct LossHead {
  double value = 0.0;
  Matrix output_grad;
};

using HeadFn = std::function<LossHead(const Matrix& output)>;

/// Gradient of loss(net(batch)) with respect to every parameter.
inline GradBundle grad(const NetParams& net, const Matrix& batch, const HeadFn& head) {
  const ForwardCache cache = forward_cached(net, batch);
  LossHead h = head(cache.output);
  if (!std::isfinite(h.value)) throw NumericError("grad: loss head returned a non-finite value");
  Backprop bp = backward(net, cache, h.output_grad);
  bp.grads.loss_value = h.value;
  return std::move(bp.grads);
}

// Flattened parameter views, layer by layer (weight row-major, then bias).
inline Vector flatten(const std::vector<DenseLayer>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  Vector out(n);
  Eigen::Index p = 0;
  auto put = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out(p++) = m(i, j);
  };
  for (const auto& l : layers) {
    put(l.weight);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out(p++) = l.bias(i);
  }
  return out;
}

inline Vector flatten(const NetParams& net) { return flatten(net.layers); }
inline Vector flatten(const GradBundle& g) { return flatten(g.layers); }

inline void unflatten(const Vector& v, NetParams& net) {
  require_shape(v.size() == net.param_count(), "unflatten: size mismatch");
  Eigen::Index p = 0;
  auto take = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v(p++);
  };
  for (auto& l : net.layers) {
    take(l.weight);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = v(p++);
  }
}

struct AdamState {
  long step_count = 0;
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_num = 1e-8;

  static AdamState for_net(const NetParams& net) {
    AdamState s;
    const GradBundle z = GradBundle::zeros_like(net);
    s.first_moment = z.layers;
    s.second_moment = z.layers;
    return s;
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(NetParams& net, const GradBundle& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
  require_shape(grads.layers.size() == net.layers.size() && state.first_moment.size() == net.layers.size(),
                "adam_step: gradient/state depth mismatch");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    require_shape(param.rows() == g.rows() && param.cols() == g.cols(), "adam_step: gradient shape mismatch");
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps_num);
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    update(net.layers[k].weight, grads.layers[k].weight, state.first_moment[k].weight, state.second_moment[k].weight);
    update(net.layers[k].bias, grads.layers[k].bias, state.first_moment[k].bias, state.second_moment[k].bias);
  }
}

/// Largest singular value by power iteration on W^T W from a fixed start vector.
/// The estimate never decreases with more iterations and never exceeds ||W||_F.
inline double spectral_norm(const Matrix& weight, int iters) {
  if (iters < 1) throw ConfigError("spectral_norm: iters must be >= 1");
  if (weight.size() == 0 || weight.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Rng rng(0x5eedULL);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vector v(weight.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
  v.normalize();
  double estimate = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector next = weight.transpose() * (weight * v);
    const double n = next.norm();
    if (n == 0.0) break;
    v = next / n;
    estimate = std::max(estimate, (weight * v).norm());
  }
  return estimate;
}

}  // namespace esuot::nn
