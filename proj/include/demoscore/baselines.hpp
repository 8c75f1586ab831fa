#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "demoscore/data.hpp"
#include "demoscore/errors.hpp"
#include "demoscore/policy.hpp"

namespace demoscore {

// Union of the original demos and every successful rollout episode; no
// filtering of either side.
inline DemoDataset auto_il_dataset(const DemoDataset& demos,
                                   const std::vector<RolloutSet>& pools) {
  DemoDataset out = demos;
  for (const auto& pool : pools)
    for (const auto& t : pool.trajectories)
      if (t.outcome >= 0.99) out.trajectories.push_back(t);
  return out;
}

// Return-conditioned data: every state gains a constant per-episode return
// input, so the policy input width grows by one. At rollout time the
// return input is pinned to 1.
struct ConditionedTrajectory {
  std::string id;
  std::vector<std::array<double, 4>> states;
  std::vector<Action2> actions;
  double outcome = 0.0;
};

struct RcpDataset {
  std::vector<ConditionedTrajectory> trajectories;
  static constexpr int kInputDim = 4;
};

inline RcpDataset rcp_dataset(const DemoDataset& demos, const std::vector<RolloutSet>& pools) {
  RcpDataset out;
  auto add = [&out](const Trajectory& t, double return_value) {
    ConditionedTrajectory c;
    c.id = t.id;
    c.outcome = t.outcome;
    c.actions = t.actions;
    c.states.reserve(t.states.size());
    for (const auto& s : t.states) c.states.push_back({s.x, s.y, s.time_frac, return_value});
    out.trajectories.push_back(std::move(c));
  };
  for (const auto& t : demos.trajectories) add(t, 1.0);
  for (const auto& pool : pools)
    for (const auto& t : pool.trajectories) add(t, t.outcome >= 0.99 ? 1.0 : 0.0);
  return out;
}

inline TrainingSet training_set_from(const RcpDataset& ds) {
  TrainingSet ts;
  ts.input_dim = RcpDataset::kInputDim;
  for (const auto& t : ds.trajectories)
    for (std::size_t i = 0; i < t.states.size(); ++i) {
      ts.inputs.emplace_back(t.states[i].begin(), t.states[i].end());
      ts.actions.push_back(t.actions[i]);
      ts.weights.push_back(1.0);
    }
  return ts;
}

// Samples the conditioned policy with the return input fixed.
inline Action2 sample_action_conditioned(const MdnPolicy& policy, const Observation& obs,
                                         double return_input, RngStream& rng) {
  return sample_action(policy, std::vector<double>{obs.x, obs.y, obs.time_frac, return_input},
                       rng);
}

inline RolloutSet collect_rollouts_conditioned(const MdnPolicy& policy, const EnvConfig& cfg,
                                               int m, std::uint64_t seed, int checkpoint_index,
                                               double return_input = 1.0) {
  if (m < 1) throw ContractError("collect_rollouts: m must be >= 1");
  RolloutSet set;
  set.checkpoint = checkpoint_index;
  RngStream root(seed);
  for (int j = 0; j < m; ++j) {
    RngStream ep_rng = root.substream("episode", j);
    auto sampler = [&](const Observation& obs, RngStream& r) {
      return sample_action_conditioned(policy, obs, return_input, r);
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

inline SuccessStats evaluate_policy_conditioned(const MdnPolicy& policy, const EnvConfig& cfg,
                                                int n, std::uint64_t seed,
                                                double return_input = 1.0) {
  if (n < 1) throw ContractError("evaluate_policy: n must be >= 1");
  RngStream root(seed);
  std::vector<double> outcomes;
  for (int j = 0; j < n; ++j) {
    RngStream ep_rng = root.substream("eval_episode", j);
    auto sampler = [&](const Observation& obs, RngStream& r) {
      return sample_action_conditioned(policy, obs, return_input, r);
    };
    outcomes.push_back(is_success(run_episode(cfg, sampler, ep_rng)));
  }
  return success_stats(outcomes);
}

// Demos weighted inversely to the initial policy's mean per-step loss,
// normalized by subtracting the minimum and dividing by the (population)
// standard deviation. All-equal weights fall back to 1 with a warning flag.
struct WeightedDataset {
  DemoDataset demos;
  std::vector<double> weights;      // aligned with demos.trajectories
  std::vector<double> mean_losses;  // diagnostics
  bool all_equal_guard = false;
};

inline WeightedDataset loss_weighting(const DemoDataset& demos, const MdnPolicy& best_initial) {
  if (demos.trajectories.empty()) throw ContractError("loss_weighting: empty demo set");
  WeightedDataset out;
  out.demos = demos;
  std::vector<double> raw;
  raw.reserve(demos.trajectories.size());
  for (const auto& t : demos.trajectories) {
    double mean_loss = 0.0;
    for (std::size_t i = 0; i < t.states.size(); ++i)
      mean_loss += mdn_nll(best_initial, t.states[i].vec(), t.actions[i]);
    mean_loss /= static_cast<double>(t.states.size());
    out.mean_losses.push_back(mean_loss);
    raw.push_back(1.0 / mean_loss);
  }
  const double lo = *std::min_element(raw.begin(), raw.end());
  double mean = 0.0;
  for (double w : raw) mean += w;
  mean /= static_cast<double>(raw.size());
  double var = 0.0;
  for (double w : raw) var += (w - mean) * (w - mean);
  const double stddev = std::sqrt(var / static_cast<double>(raw.size()));
  if (stddev < 1e-12) {
    out.all_equal_guard = true;
    out.weights.assign(raw.size(), 1.0);
    return out;
  }
  out.weights.reserve(raw.size());
  for (double w : raw) out.weights.push_back((w - lo) / stddev);
  return out;
}

}  // namespace demoscore
