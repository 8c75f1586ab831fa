#pragma once

#include <cmath>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "demoscore/errors.hpp"
#include "demoscore/mat.hpp"
#include "demoscore/rng.hpp"

namespace demoscore {

enum class Head { Linear, Sigmoid };

struct Layer {
  Mat w;                  // out x in
  std::vector<double> b;  // out
};

// Gradients mirror the parameter shapes exactly.
using Gradients = std::vector<Layer>;

// Feed-forward net: tanh on hidden layers, Linear or Sigmoid output head.
struct Mlp {
  std::vector<Layer> layers;
  Head head = Head::Linear;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }

  void validate() const {
    if (layers.empty()) throw ContractError("mlp has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].w.rows != layers[l].b.size())
        throw ContractError("layer " + std::to_string(l) + ": bias length " +
                            std::to_string(layers[l].b.size()) + " != rows " +
                            std::to_string(layers[l].w.rows));
      if (l > 0 && layers[l].w.cols != layers[l - 1].w.rows)
        throw ContractError("layer " + std::to_string(l) + ": input width " +
                            std::to_string(layers[l].w.cols) + " != previous layer width " +
                            std::to_string(layers[l - 1].w.rows));
    }
  }
};

inline Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  g.reserve(net.layers.size());
  for (const auto& l : net.layers) g.push_back({Mat(l.w.rows, l.w.cols), std::vector<double>(l.b.size(), 0.0)});
  return g;
}

// Weights ~ N(0, scale^2 / fan_in), biases zero. head_scale shrinks the
// final layer so freshly built nets start near the origin of output space.
inline Mlp init_mlp(const std::vector<std::size_t>& dims, Head head, RngStream& rng,
                    double head_scale = 1.0) {
  if (dims.size() < 2) throw ContractError("mlp needs at least input and output dims");
  Mlp net;
  net.head = head;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer{Mat(dims[l + 1], dims[l]), std::vector<double>(dims[l + 1], 0.0)};
    const bool is_head = (l + 2 == dims.size());
    const double std_dev = (is_head ? head_scale : 1.0) / std::sqrt(static_cast<double>(dims[l]));
    for (auto& v : layer.w.data) v = std_dev * rng.gaussian();
    net.layers.push_back(std::move(layer));
  }
  return net;
}

// Activation record from one forward pass, consumed by the matching backward.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // inputs[l] = vector fed into layer l
  std::vector<std::vector<double>> hidden;  // tanh output per hidden layer, before dropout
  std::vector<std::vector<double>> mask;    // dropout multiplier per hidden layer
  std::vector<double> output;
};

// Inverted-dropout convention: units are dropped and survivors scaled by
// 1/(1-rate) in train mode only; eval mode is the identity.
inline std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input,
                                       double dropout_rate, RngStream* rng, bool train_mode,
                                       ForwardCache* cache = nullptr) {
  net.validate();
  if (input.size() != net.input_dim())
    throw ContractError("layer 0: input length " + std::to_string(input.size()) + " != width " +
                        std::to_string(net.input_dim()));
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ContractError("dropout_rate outside [0,1)");
  if (train_mode && dropout_rate > 0.0 && rng == nullptr)
    throw ContractError("train-mode dropout needs an rng");

  const std::size_t n_layers = net.layers.size();
  std::vector<double> x(input.begin(), input.end());
  if (cache) {
    cache->inputs.assign(n_layers, {});
    cache->hidden.assign(n_layers > 0 ? n_layers - 1 : 0, {});
    cache->mask.assign(n_layers > 0 ? n_layers - 1 : 0, {});
  }

  const double keep_scale = 1.0 / (1.0 - dropout_rate);
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (cache) cache->inputs[l] = x;
    std::vector<double> z(net.layers[l].w.rows);
    matvec(net.layers[l].w, x.data(), z.data());
    for (std::size_t r = 0; r < z.size(); ++r) z[r] += net.layers[l].b[r];

    if (l + 1 < n_layers) {
      for (auto& v : z) v = std::tanh(v);
      if (cache) cache->hidden[l] = z;
      if (train_mode && dropout_rate > 0.0) {
        std::vector<double> m(z.size());
        for (std::size_t r = 0; r < z.size(); ++r) {
          m[r] = (rng->uniform() < dropout_rate) ? 0.0 : keep_scale;
          z[r] *= m[r];
        }
        if (cache) cache->mask[l] = std::move(m);
      }
      x = std::move(z);
    } else {
      if (net.head == Head::Sigmoid)
        for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
      if (cache) cache->output = z;
      x = std::move(z);
    }
  }
  return x;
}

namespace detail {

// Shared backprop body; dz is the gradient w.r.t. the head pre-activation.
inline Gradients backprop(const Mlp& net, const ForwardCache& cache, std::vector<double> dz) {
  Gradients grads = zero_gradients(net);
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Layer& layer = net.layers[li];
    if (dz.size() != layer.w.rows)
      throw ContractError("layer " + std::to_string(li) + ": gradient length " +
                          std::to_string(dz.size()) + " != width " + std::to_string(layer.w.rows));
    const std::vector<double>& in = cache.inputs[li];
    if (in.size() != layer.w.cols)
      throw ContractError("layer " + std::to_string(li) + ": cache input length mismatch");
    Mat& gw = grads[li].w;
    for (std::size_t r = 0; r < layer.w.rows; ++r) {
      double* gwr = gw.row(r);
      const double d = dz[r];
      for (std::size_t c = 0; c < layer.w.cols; ++c) gwr[c] = d * in[c];
      grads[li].b[r] = d;
    }
    if (li == 0) break;
    std::vector<double> dx(layer.w.cols);
    matvec_t(layer.w, dz.data(), dx.data());
    const std::vector<double>& h = cache.hidden[li - 1];
    const std::vector<double>& m = cache.mask[li - 1];
    for (std::size_t c = 0; c < dx.size(); ++c) {
      if (!m.empty()) dx[c] *= m[c];
      dx[c] *= 1.0 - h[c] * h[c];  // tanh'
    }
    dz = std::move(dx);
  }
  return grads;
}

// Backprop that accumulates scale * gradient into an existing accumulator;
// avoids per-sample allocation in training loops.
inline void backprop_accumulate(const Mlp& net, const ForwardCache& cache, std::vector<double> dz,
                                double scale, Gradients& into) {
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Layer& layer = net.layers[li];
    const std::vector<double>& in = cache.inputs[li];
    Mat& gw = into[li].w;
    for (std::size_t r = 0; r < layer.w.rows; ++r) {
      double* gwr = gw.row(r);
      const double d = scale * dz[r];
      for (std::size_t c = 0; c < layer.w.cols; ++c) gwr[c] += d * in[c];
      into[li].b[r] += d;
    }
    if (li == 0) break;
    std::vector<double> dx(layer.w.cols);
    matvec_t(layer.w, dz.data(), dx.data());
    const std::vector<double>& h = cache.hidden[li - 1];
    const std::vector<double>& m = cache.mask[li - 1];
    for (std::size_t c = 0; c < dx.size(); ++c) {
      if (!m.empty()) dx[c] *= m[c];
      dx[c] *= 1.0 - h[c] * h[c];
    }
    dz = std::move(dx);
  }
}

}  // namespace detail

// Exact gradients of the scalar loss whose gradient w.r.t. the net output
// is grad_output.
inline Gradients mlp_backward(const Mlp& net, const ForwardCache& cache,
                              std::span<const double> grad_output) {
  if (grad_output.size() != net.output_dim())
    throw ContractError("layer " + std::to_string(net.layers.size() - 1) +
                        ": grad_output length " + std::to_string(grad_output.size()) +
                        " != output width " + std::to_string(net.output_dim()));
  std::vector<double> dz(grad_output.begin(), grad_output.end());
  if (net.head == Head::Sigmoid) {
    const std::vector<double>& q = cache.output;
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= q[i] * (1.0 - q[i]);
  }
  return detail::backprop(net, cache, std::move(dz));
}

// Backward entry point for losses whose gradient is naturally expressed
// w.r.t. the head pre-activation (e.g. q - y for sigmoid + cross-entropy).
inline Gradients mlp_backward_preact(const Mlp& net, const ForwardCache& cache,
                                     std::span<const double> grad_preact) {
  return detail::backprop(net, cache,
                          std::vector<double>(grad_preact.begin(), grad_preact.end()));
}

inline void accumulate(Gradients& into, const Gradients& g, double scale) {
  for (std::size_t l = 0; l < into.size(); ++l) {
    for (std::size_t i = 0; i < into[l].w.size(); ++i) into[l].w.data[i] += scale * g[l].w.data[i];
    for (std::size_t i = 0; i < into[l].b.size(); ++i) into[l].b[i] += scale * g[l].b[i];
  }
}

// Little-endian parameter bytes, layer by layer (weights then bias).
inline void append_param_bytes(const Mlp& net, std::vector<unsigned char>& out) {
  auto put = [&out](const double* p, std::size_t n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    out.insert(out.end(), bytes, bytes + n * sizeof(double));
  };
  for (const auto& l : net.layers) {
    put(l.w.data.data(), l.w.size());
    put(l.b.data(), l.b.size());
  }
}

}  // namespace demoscore
