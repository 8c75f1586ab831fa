#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demoscore/adamw.hpp"
#include "demoscore/data.hpp"
#include "demoscore/env.hpp"
#include "demoscore/errors.hpp"
#include "demoscore/mlp.hpp"
#include "demoscore/rng.hpp"
#include "demoscore/stats.hpp"

namespace demoscore {

// Mixture-density behavior-cloning policy: an MLP trunk with a linear head
// emitting, per mixture component, a logit, a 2-d mean and a 2-d log-std.
// Sampling and likelihoods clamp the std into [sigma_min, sigma_max].
struct MdnPolicy {
  Mlp net;
  int components = 5;
  int input_dim = 3;
  bool return_conditioned = false;
  double action_cap = 0.05;
  double sigma_min = 1e-3;
  double sigma_max = 0.2;

  int output_dim() const { return 5 * components; }
};

inline MdnPolicy make_mdn_policy(int input_dim, int components, RngStream& rng,
                                 double action_cap = 0.05,
                                 const std::vector<std::size_t>& hidden = {64, 64}) {
  MdnPolicy p;
  p.components = components;
  p.input_dim = input_dim;
  p.action_cap = action_cap;
  std::vector<std::size_t> dims{static_cast<std::size_t>(input_dim)};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(static_cast<std::size_t>(p.output_dim()));
  p.net = init_mlp(dims, Head::Linear, rng, 0.05);
  // Anneal-style start: component means spread across the action range and
  // stds near the top of the clamp box, so early responsibilities stay soft
  // and components specialize instead of one absorbing everything.
  auto& head_bias = p.net.layers.back().b;
  for (int k = 0; k < components; ++k) {
    head_bias[components + 2 * k] = 0.04 * rng.gaussian();
    head_bias[components + 2 * k + 1] = 0.04 * rng.gaussian();
    head_bias[3 * components + 2 * k] = std::log(0.15);
    head_bias[3 * components + 2 * k + 1] = std::log(0.15);
  }
  return p;
}

namespace detail {

struct MixtureView {
  // Unpacked head output for one state.
  std::vector<double> log_pi;     // K, normalized
  std::vector<double> mu;         // 2K
  std::vector<double> sigma;      // 2K, clamped
  std::vector<bool> sigma_free;   // gradient flows only when unclamped
};

inline MixtureView unpack_mixture(const MdnPolicy& p, const std::vector<double>& out) {
  const int k = p.components;
  MixtureView v;
  v.log_pi.resize(k);
  v.mu.assign(out.begin() + k, out.begin() + 3 * k);
  v.sigma.resize(2 * k);
  v.sigma_free.resize(2 * k);
  double amax = out[0];
  for (int i = 1; i < k; ++i) amax = std::max(amax, out[i]);
  double denom = 0.0;
  for (int i = 0; i < k; ++i) denom += std::exp(out[i] - amax);
  const double lse = amax + std::log(denom);
  for (int i = 0; i < k; ++i) v.log_pi[i] = out[i] - lse;
  for (int i = 0; i < 2 * k; ++i) {
    const double raw = std::exp(out[3 * k + i]);
    v.sigma[i] = std::clamp(raw, p.sigma_min, p.sigma_max);
    v.sigma_free[i] = raw > p.sigma_min && raw < p.sigma_max;
  }
  return v;
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

// Negative log-likelihood and, when grad_out is non-null, its gradient
// w.r.t. the raw head outputs.
inline double mixture_nll(const MdnPolicy& p, const MixtureView& v, const Action2& action,
                          std::vector<double>* grad_out) {
  const int k = p.components;
  const double act[2] = {action.dx, action.dy};
  std::vector<double> comp(k);
  double gmax = -1e300;
  for (int i = 0; i < k; ++i) {
    double log_n = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double s = v.sigma[2 * i + d];
      const double z = (act[d] - v.mu[2 * i + d]) / s;
      log_n += -0.5 * z * z - std::log(s) - kHalfLog2Pi;
    }
    comp[i] = v.log_pi[i] + log_n;
    gmax = std::max(gmax, comp[i]);
  }
  double denom = 0.0;
  for (int i = 0; i < k; ++i) denom += std::exp(comp[i] - gmax);
  const double log_lik = gmax + std::log(denom);
  if (!std::isfinite(log_lik)) throw ContractError("non-finite mixture likelihood");

  if (grad_out) {
    grad_out->assign(static_cast<std::size_t>(5 * k), 0.0);
    for (int i = 0; i < k; ++i) {
      const double resp = std::exp(comp[i] - log_lik);      // posterior weight
      (*grad_out)[i] = std::exp(v.log_pi[i]) - resp;        // d(-LL)/d alpha_i
      for (int d = 0; d < 2; ++d) {
        const double s = v.sigma[2 * i + d];
        const double z = (act[d] - v.mu[2 * i + d]) / s;
        (*grad_out)[k + 2 * i + d] = -resp * z / s;
        if (v.sigma_free[2 * i + d]) (*grad_out)[3 * k + 2 * i + d] = -resp * (z * z - 1.0);
      }
    }
  }
  return -log_lik;
}

}  // namespace detail

inline double mdn_nll(const MdnPolicy& p, std::span<const double> state, const Action2& action) {
  auto out = mlp_forward(p.net, state, 0.0, nullptr, false);
  auto view = detail::unpack_mixture(p, out);
  return detail::mixture_nll(p, view, action, nullptr);
}

// Ancestral sampling: component by categorical draw, action by diagonal
// gaussian, clamped to the action cap.
inline Action2 sample_action(const MdnPolicy& p, std::span<const double> state, RngStream& rng) {
  auto out = mlp_forward(p.net, state, 0.0, nullptr, false);
  auto view = detail::unpack_mixture(p, out);
  const double u = rng.uniform();
  int pick = p.components - 1;
  double cdf = 0.0;
  for (int i = 0; i < p.components; ++i) {
    cdf += std::exp(view.log_pi[i]);
    if (u < cdf) {
      pick = i;
      break;
    }
  }
  const double g1 = rng.gaussian();
  const double g2 = rng.gaussian();
  Action2 a{view.mu[2 * pick] + view.sigma[2 * pick] * g1,
            view.mu[2 * pick + 1] + view.sigma[2 * pick + 1] * g2};
  a.dx = std::clamp(a.dx, -p.action_cap, p.action_cap);
  a.dy = std::clamp(a.dy, -p.action_cap, p.action_cap);
  return a;
}

// Flattened supervised set: one row per (state, action) pair with the
// weight of its parent episode.
struct TrainingSet {
  int input_dim = 3;
  std::vector<std::vector<double>> inputs;
  std::vector<Action2> actions;
  std::vector<double> weights;

  std::size_t size() const { return inputs.size(); }
};

inline TrainingSet training_set_from(const std::vector<Trajectory>& trajs,
                                     const std::vector<double>& episode_weights = {}) {
  if (!episode_weights.empty() && episode_weights.size() != trajs.size())
    throw ContractError("episode weight count mismatch");
  TrainingSet ts;
  for (std::size_t e = 0; e < trajs.size(); ++e) {
    const double w = episode_weights.empty() ? 1.0 : episode_weights[e];
    for (std::size_t i = 0; i < trajs[e].states.size(); ++i) {
      const auto v = trajs[e].states[i].vec();
      ts.inputs.emplace_back(v.begin(), v.end());
      ts.actions.push_back(trajs[e].actions[i]);
      ts.weights.push_back(w);
    }
  }
  return ts;
}

// Behavior-cloning run parameters. Checkpoints are captured at steps
// i*steps/checkpoints for i = 1..checkpoints.
struct TrainRun {
  int steps = 20000;
  int batch = 64;
  double lr = 1e-3;
  int checkpoints = 4;
  bool fine_tune = false;
};

struct TrainResult {
  std::vector<MdnPolicy> checkpoints;
  std::vector<int> checkpoint_steps;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

namespace detail {

inline double mean_nll(const MdnPolicy& p, const TrainingSet& ts, std::size_t max_samples = 4096) {
  const std::size_t n = ts.size();
  const std::size_t m = std::min(n, max_samples);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t idx = i * n / m;
    total += ts.weights[idx] * mdn_nll(p, ts.inputs[idx], ts.actions[idx]);
  }
  return total / static_cast<double>(m);
}

}  // namespace detail

// Minimizes the mean weighted per-step mixture NLL with AdamW (no weight
// decay) over uniformly sampled pairs.
inline TrainResult train_mdn(const TrainingSet& ts, const TrainRun& run, std::uint64_t seed,
                             const MdnPolicy* init = nullptr, int components = 5,
                             double action_cap = 0.05) {
  if (ts.size() == 0) throw ContractError("train_mdn: empty training set");
  if (run.checkpoints < 2) throw ConfigError("TrainRun.checkpoints must be >= 2");

  RngStream root(seed);
  RngStream init_rng = root.substream("init");
  MdnPolicy policy = init ? *init : make_mdn_policy(ts.input_dim, components, init_rng, action_cap);
  if (policy.input_dim != ts.input_dim)
    throw ContractError("policy input width " + std::to_string(policy.input_dim) +
                        " != training input width " + std::to_string(ts.input_dim));

  AdamWConfig opt_cfg;
  opt_cfg.lr = run.lr;
  AdamWState opt(policy.net, opt_cfg);
  RngStream batch_rng = root.substream("batch");

  TrainResult result;
  result.initial_loss = detail::mean_nll(policy, ts);

  std::vector<int> snap_steps;
  for (int i = 1; i <= run.checkpoints; ++i)
    snap_steps.push_back(static_cast<int>(static_cast<long>(run.steps) * i / run.checkpoints));
  std::size_t next_snap = 0;

  Gradients grads = zero_gradients(policy.net);
  ForwardCache cache;
  std::vector<double> head_grad;
  const std::size_t n = ts.size();
  for (int step = 1; step <= run.steps; ++step) {
    for (auto& layer : grads) {
      layer.w.fill(0.0);
      std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
    double batch_loss = 0.0;
    for (int b = 0; b < run.batch; ++b) {
      const std::size_t idx = batch_rng.next_u64() % n;
      const double w = ts.weights[idx];
      auto out = mlp_forward(policy.net, ts.inputs[idx], 0.0, nullptr, false, &cache);
      auto view = detail::unpack_mixture(policy, out);
      const double nll = detail::mixture_nll(policy, view, ts.actions[idx], &head_grad);
      batch_loss += w * nll;
      if (w != 0.0)
        detail::backprop_accumulate(policy.net, cache, head_grad,
                                    w / static_cast<double>(run.batch), grads);
    }
    batch_loss /= static_cast<double>(run.batch);
    if (!std::isfinite(batch_loss)) throw DivergenceError("training loss diverged", step);
    adamw_step(policy.net, grads, opt);

    while (next_snap < snap_steps.size() && step == snap_steps[next_snap]) {
      result.checkpoints.push_back(policy);
      result.checkpoint_steps.push_back(step);
      ++next_snap;
    }
  }
  result.final_loss = detail::mean_nll(policy, ts);
  return result;
}

inline TrainResult train_bc(const DemoDataset& dataset, const TrainRun& run, std::uint64_t seed,
                            const std::vector<double>& episode_weights = {},
                            const MdnPolicy* init = nullptr) {
  if (dataset.trajectories.empty()) throw ContractError("train_bc: empty dataset");
  TrainingSet ts = training_set_from(dataset.trajectories, episode_weights);
  return train_mdn(ts, run, seed, init);
}

// Runs m complete episodes with per-episode derived seeds; deterministic
// and order-independent.
inline RolloutSet collect_rollouts(const MdnPolicy& policy, const EnvConfig& cfg, int m,
                                   std::uint64_t seed, int checkpoint_index) {
  if (m < 1) throw ContractError("collect_rollouts: m must be >= 1");
  RolloutSet set;
  set.checkpoint = checkpoint_index;
  RngStream root(seed);
  for (int j = 0; j < m; ++j) {
    RngStream ep_rng = root.substream("episode", j);
    auto sampler = [&policy](const Observation& obs, RngStream& r) {
      return sample_action(policy, obs.vec(), r);
    };
    Episode ep = run_episode(cfg, sampler, ep_rng);
    TrajectorySource src;
    src.kind = TrajectorySource::Kind::Rollout;
    src.checkpoint = checkpoint_index;
    set.trajectories.push_back(trajectory_from_episode(
        ep, "rollout_c" + std::to_string(checkpoint_index) + "_" + std::to_string(j), src,
        ep_rng.seed));
  }
  return set;
}

inline SuccessStats evaluate_policy(const MdnPolicy& policy, const EnvConfig& cfg, int n,
                                    std::uint64_t seed) {
  if (n < 1) throw ContractError("evaluate_policy: n must be >= 1");
  RngStream root(seed);
  std::vector<double> outcomes;
  outcomes.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    RngStream ep_rng = root.substream("eval_episode", j);
    auto sampler = [&policy](const Observation& obs, RngStream& r) {
      return sample_action(policy, obs.vec(), r);
    };
    outcomes.push_back(is_success(run_episode(cfg, sampler, ep_rng)));
  }
  return success_stats(outcomes);
}

// Success rate of each rollout set, as used for checkpoint selection.
inline std::vector<double> checkpoint_success_curve(const std::vector<RolloutSet>& pools) {
  std::vector<double> rates;
  rates.reserve(pools.size());
  for (const auto& pool : pools) {
    double s = 0.0;
    for (const auto& t : pool.trajectories) s += t.outcome;
    rates.push_back(pool.trajectories.empty() ? 0.0 : s / static_cast<double>(pool.trajectories.size()));
  }
  return rates;
}

// Index of the best checkpoint by rollout success; ties go to the later
// (more trained) checkpoint.
inline std::size_t best_checkpoint_index(const std::vector<double>& rates) {
  if (rates.empty()) throw ContractError("best_checkpoint_index on empty curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rates.size(); ++i)
    if (rates[i] >= rates[best]) best = i;
  return best;
}

// Which opening a trajectory used, judged by the height of its last wall
// crossing. Evaluation-side helper.
enum class Route { None, Narrow, Wide };

inline Route classify_route(const EnvConfig& cfg, const std::vector<Observation>& states) {
  Route route = Route::None;
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    if ((states[i].x < cfg.wall_x) != (states[i + 1].x < cfg.wall_x)) {
      const double frac = (cfg.wall_x - states[i].x) / (states[i + 1].x - states[i].x);
      const double y_cross = states[i].y + frac * (states[i + 1].y - states[i].y);
      route = y_cross >= cfg.open_region_low ? Route::Wide : Route::Narrow;
    }
  }
  if (route == Route::None && !states.empty()) {
    // A collision terminates before any far-side state is recorded; an
    // episode that died within one step of the wall attempted that opening.
    const Observation& last = states.back();
    if (last.x < cfg.wall_x &&
        cfg.wall_x - last.x <= cfg.action_cap + 5.0 * cfg.sigma_dyn)
      route = last.y >= cfg.open_region_low ? Route::Wide : Route::Narrow;
  }
  return route;
}

// -- checkpoint serialization: versioned little-endian binary blob --

namespace detail {

constexpr std::uint32_t kCheckpointMagic = 0x4d44534eu;  // "NSDM"

template <typename T>
void put_raw(std::string& out, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.append(p, p + sizeof(T));
}

template <typename T>
T get_raw(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("truncated checkpoint blob", 0);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

inline std::string checkpoint_bytes(const MdnPolicy& p) {
  std::string out;
  detail::put_raw(out, detail::kCheckpointMagic);
  detail::put_raw(out, std::uint32_t{1});  // version
  detail::put_raw(out, std::int32_t{p.components});
  detail::put_raw(out, std::int32_t{p.input_dim});
  detail::put_raw(out, static_cast<std::uint8_t>(p.return_conditioned ? 1 : 0));
  detail::put_raw(out, p.action_cap);
  detail::put_raw(out, p.sigma_min);
  detail::put_raw(out, p.sigma_max);
  detail::put_raw(out, std::uint32_t(p.net.layers.size()));
  for (const auto& l : p.net.layers) {
    detail::put_raw(out, std::uint32_t(l.w.rows));
    detail::put_raw(out, std::uint32_t(l.w.cols));
  }
  for (const auto& l : p.net.layers) {
    for (double v : l.w.data) detail::put_raw(out, v);
    for (double v : l.b) detail::put_raw(out, v);
  }
  return out;
}

inline MdnPolicy checkpoint_from_bytes(const std::string& blob) {
  std::size_t pos = 0;
  if (detail::get_raw<std::uint32_t>(blob, pos) != detail::kCheckpointMagic)
    throw ParseError("bad checkpoint magic", 0);
  if (detail::get_raw<std::uint32_t>(blob, pos) != 1u)
    throw ParseError("unsupported checkpoint version", 0);
  MdnPolicy p;
  p.components = detail::get_raw<std::int32_t>(blob, pos);
  p.input_dim = detail::get_raw<std::int32_t>(blob, pos);
  p.return_conditioned = detail::get_raw<std::uint8_t>(blob, pos) != 0;
  p.action_cap = detail::get_raw<double>(blob, pos);
  p.sigma_min = detail::get_raw<double>(blob, pos);
  p.sigma_max = detail::get_raw<double>(blob, pos);
  const auto n_layers = detail::get_raw<std::uint32_t>(blob, pos);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto rows = detail::get_raw<std::uint32_t>(blob, pos);
    const auto cols = detail::get_raw<std::uint32_t>(blob, pos);
    shapes.emplace_back(rows, cols);
  }
  for (auto [rows, cols] : shapes) {
    Layer l{Mat(rows, cols), std::vector<double>(rows, 0.0)};
    for (auto& v : l.w.data) v = detail::get_raw<double>(blob, pos);
    for (auto& v : l.b) v = detail::get_raw<double>(blob, pos);
    p.net.layers.push_back(std::move(l));
  }
  p.net.head = Head::Linear;
  p.net.validate();
  if (p.net.output_dim() != static_cast<std::size_t>(p.output_dim()))
    throw ParseError("checkpoint head width does not match component count", 0);
  return p;
}

inline void save_checkpoint(const MdnPolicy& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  const std::string blob = checkpoint_bytes(p);
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

inline MdnPolicy load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for reading: " + path);
  std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(blob);
}

}  // namespace demoscore
