#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "demoscore/env.hpp"
#include "demoscore/errors.hpp"
#include "demoscore/rng.hpp"

namespace demoscore {

struct TrajectorySource {
  enum class Kind { Demo, Rollout };
  Kind kind = Kind::Demo;
  StrategyTag tag = StrategyTag::WideA;  // valid when kind == Demo
  int checkpoint = 0;                    // valid when kind == Rollout
};

// The universal currency of the pipeline: one episode with its outcome and
// provenance. The strategy tag is evaluation-only metadata.
struct Trajectory {
  std::string id;
  std::vector<Observation> states;
  std::vector<Action2> actions;
  double outcome = 0.0;  // in [0,1]; binary in this environment
  TrajectorySource source;
  std::uint64_t seed = 0;

  std::size_t length() const { return states.size(); }
};

inline void validate_trajectory(const Trajectory& t, int max_steps) {
  if (t.states.size() != t.actions.size())
    throw ValidationError("trajectory " + t.id + ": states/actions length mismatch");
  if (t.states.empty()) throw ValidationError("trajectory " + t.id + ": empty");
  if (max_steps > 0 && t.states.size() > static_cast<std::size_t>(max_steps))
    throw ValidationError("trajectory " + t.id + ": longer than max_steps");
  if (!(t.outcome >= 0.0 && t.outcome <= 1.0))
    throw ValidationError("trajectory " + t.id + ": outcome outside [0,1]");
}

inline void require_unique_ids(const std::vector<Trajectory>& trajs) {
  std::unordered_set<std::string> seen;
  for (const auto& t : trajs)
    if (!seen.insert(t.id).second) throw ValidationError("duplicate trajectory id: " + t.id);
}

// Demonstration set; every episode is successful.
struct DemoDataset {
  std::vector<Trajectory> trajectories;
  std::vector<std::pair<StrategyTag, int>> mixture_spec;

  void validate(int max_steps = 0) const {
    require_unique_ids(trajectories);
    for (const auto& t : trajectories) {
      validate_trajectory(t, max_steps);
      if (t.outcome != 1.0)
        throw ValidationError("demo " + t.id + " is not successful");
    }
  }
};

// Episodes produced by one policy checkpoint, labeled with outcomes.
struct RolloutSet {
  int checkpoint = 0;
  std::vector<Trajectory> trajectories;

  void validate(int max_steps = 0) const {
    require_unique_ids(trajectories);
    for (const auto& t : trajectories) {
      validate_trajectory(t, max_steps);
      if (t.source.kind != TrajectorySource::Kind::Rollout || t.source.checkpoint != checkpoint)
        throw ValidationError("rollout " + t.id + " does not belong to checkpoint " +
                              std::to_string(checkpoint));
    }
  }
};

inline Trajectory trajectory_from_episode(const Episode& ep, std::string id,
                                          TrajectorySource source, std::uint64_t seed) {
  Trajectory t;
  t.id = std::move(id);
  t.states = ep.states;
  t.actions = ep.actions;
  t.outcome = is_success(ep);
  t.source = source;
  t.seed = seed;
  return t;
}

// Deterministic heterogeneous demo set: scripted demos with derived seeds,
// order shuffled by the same seed.
inline DemoDataset build_mixture(const std::vector<std::pair<StrategyTag, int>>& spec,
                                 const EnvConfig& cfg, std::uint64_t seed) {
  DemoDataset out;
  out.mixture_spec = spec;
  RngStream root(seed);
  for (const auto& [tag, count] : spec) {
    if (count < 0) throw ContractError("mixture count must be >= 0");
    for (int k = 0; k < count; ++k) {
      const std::uint64_t demo_seed = root.substream("mixture", 0).substream(to_string(tag), k).seed;
      std::uint64_t attempt_seed = 0;
      Episode ep = script_demo(tag, cfg, demo_seed, &attempt_seed);
      TrajectorySource src;
      src.kind = TrajectorySource::Kind::Demo;
      src.tag = tag;
      out.trajectories.push_back(trajectory_from_episode(
          ep, std::string("demo_") + to_string(tag) + "_" + std::to_string(k), src, attempt_seed));
    }
  }
  RngStream shuffle = root.substream("shuffle");
  const auto perm = shuffle.permutation(out.trajectories.size());
  std::vector<Trajectory> shuffled(out.trajectories.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = std::move(out.trajectories[perm[i]]);
  out.trajectories = std::move(shuffled);
  out.validate(cfg.max_steps);
  return out;
}

struct DatasetStats {
  std::size_t total = 0;
  std::map<std::string, std::size_t> counts;  // per demo tag / rollout checkpoint
  double outcome_mean = 0.0;
  std::size_t len_min = 0, len_median = 0, len_max = 0;
};

inline DatasetStats dataset_stats(const std::vector<Trajectory>& trajs) {
  DatasetStats s;
  s.total = trajs.size();
  if (trajs.empty()) return s;
  std::vector<std::size_t> lengths;
  lengths.reserve(trajs.size());
  for (const auto& t : trajs) {
    const std::string key = t.source.kind == TrajectorySource::Kind::Demo
                                ? std::string("demo:") + to_string(t.source.tag)
                                : "rollout:" + std::to_string(t.source.checkpoint);
    ++s.counts[key];
    s.outcome_mean += t.outcome;
    lengths.push_back(t.length());
  }
  s.outcome_mean /= static_cast<double>(trajs.size());
  std::sort(lengths.begin(), lengths.end());
  s.len_min = lengths.front();
  s.len_median = lengths[lengths.size() / 2];
  s.len_max = lengths.back();
  return s;
}

}  // namespace demoscore
