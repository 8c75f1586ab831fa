#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "demoscore/errors.hpp"
#include "demoscore/rng.hpp"

namespace demoscore {

// Two-dimensional navigation arena. A vertical wall splits it in half;
// the wall has a narrow gap at mid-height and is absent above
// open_region_low. Reaching the goal disc through either opening
// succeeds; touching wall material while crossing terminates the episode.
//
// The default narrow-gap width below is the value certified by the
// calibration suite: scripted demonstrators clear it >= 99% of the time
// while behavior-cloned policies crossing under actuation and sampling
// noise fail it often.
struct EnvConfig {
  double arena_half_extent = 1.0;
  double wall_x = 0.0;
  double narrow_gap_half_width = 0.0225;
  double open_region_low = 0.6;
  double open_region_high = 1.0;
  double agent_radius = 0.02;
  double goal_x = 0.8;
  double goal_y = 0.0;
  double goal_radius = 0.1;
  double start_x = -0.8;
  double start_y_range = 0.2;
  int max_steps = 150;
  double sigma_dyn = 0.005;
  double sigma_demo = 0.001;
  double action_cap = 0.05;

  void validate() const {
    if (narrow_gap_half_width <= agent_radius)
      throw ConfigError("narrow_gap_half_width must exceed agent_radius");
    if (std::fabs(goal_x - wall_x) <= goal_radius)
      throw ConfigError("goal disc intersects the wall");
    if (open_region_low >= open_region_high)
      throw ConfigError("open_region_low must be below open_region_high");
    if (action_cap <= 0.0) throw ConfigError("action_cap must be positive");
    const double min_path = std::hypot(goal_x - start_x, goal_y) - goal_radius;
    if (static_cast<double>(max_steps) < min_path / action_cap)
      throw ConfigError("max_steps too small for the shortest path");
    if (sigma_dyn < 0.0 || sigma_demo < 0.0) throw ConfigError("noise std must be >= 0");
    if (start_y_range < 0.0) throw ConfigError("start_y_range must be >= 0");
  }
};

struct EnvState {
  double x = 0.0;
  double y = 0.0;
  int t = 0;
  bool terminated = false;
  bool collided = false;
  bool reached = false;
};

// What the policy and the classifier see: position plus normalized time.
struct Observation {
  double x = 0.0;
  double y = 0.0;
  double time_frac = 0.0;

  std::array<double, 3> vec() const { return {x, y, time_frac}; }
};

struct Action2 {
  double dx = 0.0;
  double dy = 0.0;
};

// Which scripted demonstrator produced a demo. Metadata only: policies and
// classifiers never see it; evaluation code uses it to measure filtering.
enum class StrategyTag { WideA, NarrowB };

inline const char* to_string(StrategyTag tag) {
  return tag == StrategyTag::WideA ? "WideA" : "NarrowB";
}

inline StrategyTag strategy_from_string(const std::string& s) {
  if (s == "WideA") return StrategyTag::WideA;
  if (s == "NarrowB") return StrategyTag::NarrowB;
  throw ValidationError("unknown strategy tag: " + s);
}

inline EnvState env_reset(const EnvConfig& cfg, RngStream& rng) {
  cfg.validate();
  EnvState s;
  s.x = cfg.start_x;
  s.y = cfg.start_y_range > 0.0 ? (2.0 * rng.uniform() - 1.0) * cfg.start_y_range : 0.0;
  return s;
}

inline EnvState env_reset(const EnvConfig& cfg, std::uint64_t seed) {
  RngStream rng(seed);
  return env_reset(cfg, rng);
}

inline Observation observe(const EnvConfig& cfg, const EnvState& s) {
  return {s.x, s.y, static_cast<double>(s.t) / static_cast<double>(cfg.max_steps)};
}

namespace detail {

// A disc of the agent's radius fits through the wall plane at height y iff
// it is inside the narrow gap or fully above the wall's top edge.
inline bool crossing_clear(const EnvConfig& cfg, double y_cross) {
  if (std::fabs(y_cross) <= cfg.narrow_gap_half_width - cfg.agent_radius) return true;
  return y_cross - cfg.agent_radius >= cfg.open_region_low;
}

}  // namespace detail

// Advance one step: clamp the action per axis, add actuation noise, resolve
// the motion against the wall, then check goal and timeout. Collision is
// checked before the goal, so a motion that both crosses wall material and
// lands in the goal disc terminates as a collision.
inline EnvState env_step(const EnvConfig& cfg, const EnvState& s, Action2 action, RngStream& rng) {
  if (s.terminated) throw ContractError("env_step on terminated state");
  const double ax = std::clamp(action.dx, -cfg.action_cap, cfg.action_cap);
  const double ay = std::clamp(action.dy, -cfg.action_cap, cfg.action_cap);
  double nx = s.x + ax + cfg.sigma_dyn * rng.gaussian();
  double ny = s.y + ay + cfg.sigma_dyn * rng.gaussian();

  EnvState next = s;
  next.t = s.t + 1;

  const bool crossed = (s.x < cfg.wall_x) != (nx < cfg.wall_x) || (nx == cfg.wall_x && s.x != cfg.wall_x);
  if (crossed) {
    const double frac = (cfg.wall_x - s.x) / (nx - s.x);
    const double y_cross = s.y + frac * (ny - s.y);
    if (!detail::crossing_clear(cfg, y_cross)) {
      next.x = cfg.wall_x;
      next.y = y_cross;
      next.collided = true;
      next.terminated = true;
      return next;
    }
  }

  const double lim = cfg.arena_half_extent - cfg.agent_radius;
  next.x = std::clamp(nx, -lim, lim);
  next.y = std::clamp(ny, -lim, lim);

  if (std::hypot(next.x - cfg.goal_x, next.y - cfg.goal_y) <= cfg.goal_radius) {
    next.reached = true;
    next.terminated = true;
  } else if (next.t >= cfg.max_steps) {
    next.terminated = true;  // timeout
  }
  return next;
}

// One full episode as recorded: observation before each action, the
// commanded (pre-noise) action, and the terminal state.
struct Episode {
  std::vector<Observation> states;
  std::vector<Action2> actions;
  EnvState final_state;
};

inline double is_success(const Episode& ep) {
  if (!ep.final_state.terminated) throw ContractError("is_success on unterminated episode");
  return (ep.final_state.reached && !ep.final_state.collided) ? 1.0 : 0.0;
}

// Runs policy(obs, rng) -> Action2 until the environment terminates.
template <typename Policy>
Episode run_episode(const EnvConfig& cfg, Policy&& policy, RngStream& rng) {
  Episode ep;
  EnvState s = env_reset(cfg, rng);
  while (!s.terminated) {
    const Observation obs = observe(cfg, s);
    const Action2 a = policy(obs, rng);
    ep.states.push_back(obs);
    ep.actions.push_back(a);
    s = env_step(cfg, s, a, rng);
  }
  ep.final_state = s;
  return ep;
}

// Proportional waypoint follower used by both scripted demonstrators.
class WaypointController {
 public:
  WaypointController(std::vector<std::array<double, 2>> waypoints, double cap)
      : waypoints_(std::move(waypoints)), cap_(cap) {}

  Action2 operator()(const Observation& obs, RngStream&) {
    while (next_ + 1 < waypoints_.size() &&
           std::hypot(waypoints_[next_][0] - obs.x, waypoints_[next_][1] - obs.y) < 0.05)
      ++next_;
    return {std::clamp(waypoints_[next_][0] - obs.x, -cap_, cap_),
            std::clamp(waypoints_[next_][1] - obs.y, -cap_, cap_)};
  }

 private:
  std::vector<std::array<double, 2>> waypoints_;
  double cap_;
  std::size_t next_ = 0;
};

inline std::vector<std::array<double, 2>> strategy_waypoints(StrategyTag tag,
                                                             const EnvConfig& cfg) {
  if (tag == StrategyTag::WideA)
    return {{-0.5, 0.8}, {0.3, 0.8}, {cfg.goal_x, cfg.goal_y}};
  return {{-0.3, 0.0}, {0.3, 0.0}, {cfg.goal_x, cfg.goal_y}};
}

// One scripted attempt under demonstration-time noise.
inline Episode demo_attempt(StrategyTag tag, const EnvConfig& cfg, std::uint64_t seed) {
  EnvConfig demo_cfg = cfg;
  demo_cfg.sigma_dyn = cfg.sigma_demo;
  WaypointController controller(strategy_waypoints(tag, cfg), cfg.action_cap);
  RngStream rng(seed);
  return run_episode(demo_cfg, controller, rng);
}

// Scripted demonstration; only successful episodes are returned, failed
// attempts retry with fresh derived seeds.
inline Episode script_demo(StrategyTag tag, const EnvConfig& cfg, std::uint64_t seed,
                           std::uint64_t* attempt_seed_out = nullptr) {
  cfg.validate();
  RngStream root(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::uint64_t attempt_seed = root.substream("attempt", attempt).seed;
    Episode ep = demo_attempt(tag, cfg, attempt_seed);
    if (is_success(ep) == 1.0) {
      if (attempt_seed_out) *attempt_seed_out = attempt_seed;
      return ep;
    }
  }
  throw CalibrationError(std::string("demonstrator ") + to_string(tag) +
                         " failed 100 consecutive attempts; environment mis-configured");
}

struct CalibrationReport {
  int trials = 0;
  double wide_first_attempt_rate = 0.0;
  double narrow_first_attempt_rate = 0.0;
  double narrow_clearance = 0.0;  // gap half-width minus agent radius
  double wide_clearance = 0.0;    // open-region span minus the agent disc
};

// Measures first-attempt demonstrator success; report only, never throws.
inline CalibrationReport calibrate(const EnvConfig& cfg, int n_trials) {
  if (n_trials < 100) throw ContractError("calibrate needs n_trials >= 100");
  cfg.validate();
  CalibrationReport rep;
  rep.trials = n_trials;
  rep.narrow_clearance = cfg.narrow_gap_half_width - cfg.agent_radius;
  rep.wide_clearance = (cfg.open_region_high - cfg.open_region_low) - 2.0 * cfg.agent_radius;
  int wide_ok = 0, narrow_ok = 0;
  RngStream root(0x5ca1ab1e);
  for (int i = 0; i < n_trials; ++i) {
    const std::uint64_t seed_w = root.substream("wide", i).seed;
    const std::uint64_t seed_n = root.substream("narrow", i).seed;
    if (is_success(demo_attempt(StrategyTag::WideA, cfg, seed_w)) == 1.0) ++wide_ok;
    if (is_success(demo_attempt(StrategyTag::NarrowB, cfg, seed_n)) == 1.0) ++narrow_ok;
  }
  rep.wide_first_attempt_rate = static_cast<double>(wide_ok) / n_trials;
  rep.narrow_first_attempt_rate = static_cast<double>(narrow_ok) / n_trials;
  return rep;
}

}  // namespace demoscore
