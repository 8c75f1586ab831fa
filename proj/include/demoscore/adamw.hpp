#pragma once

#include <cmath>
#include <string>

#include "demoscore/errors.hpp"
#include "demoscore/mlp.hpp"

namespace demoscore {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Decoupled-weight-decay adaptive optimizer state. Moments mirror the
// parameter shapes; step strictly increases.
struct AdamWState {
  Gradients m;
  Gradients v;
  std::uint64_t step = 0;
  AdamWConfig cfg;

  AdamWState() = default;
  AdamWState(const Mlp& net, AdamWConfig c) : m(zero_gradients(net)), v(zero_gradients(net)), cfg(c) {}
};

namespace detail {

inline void adamw_update(double* p, const double* g, double* m, double* v, std::size_t n,
                         const AdamWConfig& cfg, double bc1, double bc2, bool decay,
                         std::size_t layer) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(g[i]))
      throw ContractError("non-finite gradient in layer " + std::to_string(layer));
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    if (decay) p[i] -= cfg.lr * cfg.weight_decay * p[i];
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace detail

// Bias-corrected AdamW step. Weight decay is applied multiplicatively to
// weights only, never to biases.
inline void adamw_step(Mlp& net, const Gradients& grads, AdamWState& state) {
  if (grads.size() != net.layers.size()) throw ContractError("gradient layer count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Layer& layer = net.layers[l];
    if (grads[l].w.rows != layer.w.rows || grads[l].w.cols != layer.w.cols ||
        grads[l].b.size() != layer.b.size())
      throw ContractError("gradient shape mismatch in layer " + std::to_string(l));
    detail::adamw_update(layer.w.data.data(), grads[l].w.data.data(), state.m[l].w.data.data(),
                         state.v[l].w.data.data(), layer.w.size(), state.cfg, bc1, bc2,
                         state.cfg.weight_decay != 0.0, l);
    detail::adamw_update(layer.b.data(), grads[l].b.data(), state.m[l].b.data(),
                         state.v[l].b.data(), layer.b.size(), state.cfg, bc1, bc2, false, l);
  }
}

}  // namespace demoscore
