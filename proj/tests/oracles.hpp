// Test-only reference implementations, kept independent of the library
// code paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "demoscore/mlp.hpp"

namespace oracles {

// Central finite differences of a scalar loss over every parameter.
inline demoscore::Gradients fd_gradients(demoscore::Mlp& net,
                                         const std::function<double()>& loss, double eps = 1e-5) {
  demoscore::Gradients out = demoscore::zero_gradients(net);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto probe = [&](double* p, double* g, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        const double saved = p[i];
        p[i] = saved + eps;
        const double up = loss();
        p[i] = saved - eps;
        const double down = loss();
        p[i] = saved;
        g[i] = (up - down) / (2.0 * eps);
      }
    };
    probe(net.layers[l].w.data.data(), out[l].w.data.data(), net.layers[l].w.size());
    probe(net.layers[l].b.data(), out[l].b.data(), net.layers[l].b.size());
  }
  return out;
}

inline double max_rel_err(const demoscore::Gradients& a, const demoscore::Gradients& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    auto cmp = [&worst](const double* x, const double* y, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        const double denom = std::max({std::fabs(x[i]), std::fabs(y[i]), 1e-6});
        worst = std::max(worst, std::fabs(x[i] - y[i]) / denom);
      }
    };
    cmp(a[l].w.data.data(), b[l].w.data.data(), a[l].w.size());
    cmp(a[l].b.data(), b[l].b.data(), a[l].b.size());
  }
  return worst;
}

// Straight-line forward pass: plain nested loops, no shared helpers.
inline std::vector<double> direct_forward(const demoscore::Mlp& net,
                                          const std::vector<double>& input) {
  std::vector<double> x = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    std::vector<double> z(layer.w.rows, 0.0);
    for (std::size_t r = 0; r < layer.w.rows; ++r) {
      double s = layer.b[r];
      for (std::size_t c = 0; c < layer.w.cols; ++c) s += layer.w(r, c) * x[c];
      z[r] = s;
    }
    if (l + 1 < net.layers.size()) {
      for (auto& v : z) v = std::tanh(v);
    } else if (net.head == demoscore::Head::Sigmoid) {
      for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
    }
    x = z;
  }
  return x;
}

// Scalar AdamW reference, written from the update equations.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  long t = 0;
  double lr, b1, b2, eps, wd;
  ScalarAdam(double lr_, double b1_, double b2_, double eps_, double wd_)
      : lr(lr_), b1(b1_), b2(b2_), eps(eps_), wd(wd_) {}
  double step(double x, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= lr * wd * x;
    x -= lr * mh / (std::sqrt(vh) + eps);
    return x;
  }
};

// Naive gaussian-mixture density, no log-sum-exp.
inline double direct_mixture_nll(const std::vector<double>& logits,
                                 const std::vector<std::vector<double>>& means,
                                 const std::vector<std::vector<double>>& sigmas,
                                 const std::vector<double>& action) {
  double zmax = logits[0];
  for (double a : logits) zmax = std::max(zmax, a);
  double denom = 0.0;
  for (double a : logits) denom += std::exp(a - zmax);
  double density = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double pi_k = std::exp(logits[k] - zmax) / denom;
    double pdf = 1.0;
    for (std::size_t d = 0; d < action.size(); ++d) {
      const double z = (action[d] - means[k][d]) / sigmas[k][d];
      pdf *= std::exp(-0.5 * z * z) / (sigmas[k][d] * std::sqrt(2.0 * M_PI));
    }
    density += pi_k * pdf;
  }
  return -std::log(density);
}

// Wilson bounds from the quadratic-root form, algebraically distinct from
// the center +/- halfwidth arrangement.
inline std::pair<double, double> wilson_roots(double successes, double n, double z) {
  const double phat = successes / n;
  const double disc = z * std::sqrt(z * z + 4.0 * n * phat * (1.0 - phat));
  const double lo = (2.0 * n * phat + z * z - disc) / (2.0 * (n + z * z));
  const double hi = (2.0 * n * phat + z * z + disc) / (2.0 * (n + z * z));
  return {lo, hi};
}

// Per-step binary cross entropy, averaged, probabilities clamped.
inline double direct_step_loss(const std::vector<double>& probs, double y) {
  double total = 0.0;
  for (double q : probs) {
    const double qc = std::min(1.0 - 1e-7, std::max(1e-7, q));
    total += -y * std::log(qc) - (1.0 - y) * std::log(1.0 - qc);
  }
  return total / static_cast<double>(probs.size());
}

}  // namespace oracles
