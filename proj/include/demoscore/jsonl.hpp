#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoscore/data.hpp"
#include "demoscore/env.hpp"
#include "demoscore/errors.hpp"

namespace demoscore {

inline nlohmann::json env_config_to_json(const EnvConfig& c) {
  return nlohmann::json{{"arena_half_extent", c.arena_half_extent},
                        {"wall_x", c.wall_x},
                        {"narrow_gap_half_width", c.narrow_gap_half_width},
                        {"open_region_low", c.open_region_low},
                        {"open_region_high", c.open_region_high},
                        {"agent_radius", c.agent_radius},
                        {"goal_x", c.goal_x},
                        {"goal_y", c.goal_y},
                        {"goal_radius", c.goal_radius},
                        {"start_x", c.start_x},
                        {"start_y_range", c.start_y_range},
                        {"max_steps", c.max_steps},
                        {"sigma_dyn", c.sigma_dyn},
                        {"sigma_demo", c.sigma_demo},
                        {"action_cap", c.action_cap}};
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig c;
  c.arena_half_extent = j.value("arena_half_extent", c.arena_half_extent);
  c.wall_x = j.value("wall_x", c.wall_x);
  c.narrow_gap_half_width = j.value("narrow_gap_half_width", c.narrow_gap_half_width);
  c.open_region_low = j.value("open_region_low", c.open_region_low);
  c.open_region_high = j.value("open_region_high", c.open_region_high);
  c.agent_radius = j.value("agent_radius", c.agent_radius);
  c.goal_x = j.value("goal_x", c.goal_x);
  c.goal_y = j.value("goal_y", c.goal_y);
  c.goal_radius = j.value("goal_radius", c.goal_radius);
  c.start_x = j.value("start_x", c.start_x);
  c.start_y_range = j.value("start_y_range", c.start_y_range);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.sigma_dyn = j.value("sigma_dyn", c.sigma_dyn);
  c.sigma_demo = j.value("sigma_demo", c.sigma_demo);
  c.action_cap = j.value("action_cap", c.action_cap);
  return c;
}

namespace detail {

// 17 significant digits: enough to round-trip any double exactly.
inline void put_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

inline void put_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
}

}  // namespace detail

// One JSON object per line; deterministic formatting so identical data
// yields identical bytes.
inline std::string trajectory_to_jsonl_line(const Trajectory& t) {
  std::string line = "{\"id\": ";
  detail::put_escaped(line, t.id);
  line += ", \"source\": {\"kind\": ";
  if (t.source.kind == TrajectorySource::Kind::Demo) {
    line += "\"demo\", \"tag\": ";
    detail::put_escaped(line, to_string(t.source.tag));
  } else {
    line += "\"rollout\", \"ckpt\": " + std::to_string(t.source.checkpoint);
  }
  line += "}, \"seed\": " + std::to_string(t.seed) + ", \"outcome\": ";
  detail::put_double(line, t.outcome);
  line += ", \"states\": [";
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    if (i) line += ", ";
    line += '[';
    detail::put_double(line, t.states[i].x);
    line += ", ";
    detail::put_double(line, t.states[i].y);
    line += ", ";
    detail::put_double(line, t.states[i].time_frac);
    line += ']';
  }
  line += "], \"actions\": [";
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    if (i) line += ", ";
    line += '[';
    detail::put_double(line, t.actions[i].dx);
    line += ", ";
    detail::put_double(line, t.actions[i].dy);
    line += ']';
  }
  line += "]}";
  return line;
}

inline std::size_t save_jsonl(const std::vector<Trajectory>& trajs, const EnvConfig& cfg,
                              const std::string& path) {
  std::string buf = "{\"schema_version\": 1, \"env_config\": ";
  buf += env_config_to_json(cfg).dump();
  buf += "}\n";
  for (const auto& t : trajs) {
    buf += trajectory_to_jsonl_line(t);
    buf += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw ValidationError("write failed: " + path);
  return buf.size();
}

inline std::size_t save_jsonl(const DemoDataset& ds, const EnvConfig& cfg, const std::string& path) {
  return save_jsonl(ds.trajectories, cfg, path);
}

inline std::size_t save_jsonl(const RolloutSet& rs, const EnvConfig& cfg, const std::string& path) {
  return save_jsonl(rs.trajectories, cfg, path);
}

struct LoadedJsonl {
  EnvConfig env;
  std::vector<Trajectory> trajectories;

  DemoDataset as_demo_dataset() const {
    DemoDataset ds;
    ds.trajectories = trajectories;
    ds.validate(env.max_steps);
    return ds;
  }

  RolloutSet as_rollout_set() const {
    RolloutSet rs;
    if (!trajectories.empty()) rs.checkpoint = trajectories.front().source.checkpoint;
    rs.trajectories = trajectories;
    rs.validate(env.max_steps);
    return rs;
  }
};

inline LoadedJsonl load_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for reading: " + path);
  LoadedJsonl out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    try {
      if (line_no == 1) {
        if (j.value("schema_version", 0) != 1) throw ValidationError("unsupported schema_version");
        out.env = env_config_from_json(j.at("env_config"));
        continue;
      }
      Trajectory t;
      t.id = j.at("id").get<std::string>();
      const auto& src = j.at("source");
      if (src.at("kind") == "demo") {
        t.source.kind = TrajectorySource::Kind::Demo;
        t.source.tag = strategy_from_string(src.at("tag").get<std::string>());
      } else if (src.at("kind") == "rollout") {
        t.source.kind = TrajectorySource::Kind::Rollout;
        t.source.checkpoint = src.at("ckpt").get<int>();
      } else {
        throw ValidationError("unknown source kind");
      }
      t.seed = j.at("seed").get<std::uint64_t>();
      t.outcome = j.at("outcome").get<double>();
      for (const auto& s : j.at("states"))
        t.states.push_back({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()});
      for (const auto& a : j.at("actions"))
        t.actions.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
      validate_trajectory(t, out.env.max_steps);
      out.trajectories.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (line_no == 0) throw ParseError("missing metadata line", 1);
  require_unique_ids(out.trajectories);
  return out;
}

}  // namespace demoscore
