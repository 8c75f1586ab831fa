#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoscore/curator.hpp"
#include "demoscore/env.hpp"
#include "demoscore/errors.hpp"
#include "demoscore/jsonl.hpp"
#include "demoscore/policy.hpp"

namespace demoscore {

enum class Method { DemoScore, Base, AutoIl, Rcp, LossWeighting };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::DemoScore: return "demo_score";
    case Method::Base: return "base";
    case Method::AutoIl: return "auto_il";
    case Method::Rcp: return "rcp";
    case Method::LossWeighting: return "loss_weighting";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  if (s == "demo_score") return Method::DemoScore;
  if (s == "base") return Method::Base;
  if (s == "auto_il") return Method::AutoIl;
  if (s == "rcp") return Method::Rcp;
  if (s == "loss_weighting") return Method::LossWeighting;
  throw ConfigError("unknown method: " + s);
}

struct EvalConfig {
  int n = 256;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};  // replicate seeds
  std::uint64_t eval_seed = 0;  // isolated stream: changing it never touches curation
  std::vector<double> ood_expansions;  // start-range expansion factors, e.g. 0.5 and 1.0
};

struct ExperimentConfig {
  EnvConfig env;
  std::vector<std::pair<StrategyTag, int>> mixture{{StrategyTag::WideA, 50},
                                                   {StrategyTag::NarrowB, 50}};
  TrainRun train;
  CurationConfig curation;
  Method method = Method::DemoScore;
  EvalConfig eval;
  std::string out_dir = "out";
  bool resume = false;  // reuse on-disk checkpoints/rollouts when present

  void validate() const {
    env.validate();
    curation.validate();
    if (eval.n < 1) throw ConfigError("eval.n must be >= 1");
    if (eval.seeds.empty()) throw ConfigError("eval.seeds must not be empty");
    std::set<std::uint64_t> uniq(eval.seeds.begin(), eval.seeds.end());
    if (uniq.size() != eval.seeds.size()) throw ConfigError("replicate seeds must be distinct");
    if (train.checkpoints != curation.checkpoints)
      throw ConfigError("train.checkpoints must equal curation.checkpoints");
    for (double f : eval.ood_expansions)
      if (f < 0.0) throw ConfigError("ood expansion factors must be >= 0");
    for (const auto& [tag, count] : mixture)
      if (count < 0) throw ConfigError("mixture counts must be >= 0");
  }

  std::string mixture_label() const {
    std::string s;
    for (const auto& [tag, count] : mixture) {
      if (!s.empty()) s += "/";
      s += std::string(to_string(tag)) + ":" + std::to_string(count);
    }
    return s;
  }
};

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json mix = nlohmann::json::array();
  for (const auto& [tag, count] : c.mixture) mix.push_back({to_string(tag), count});
  const auto& cur = c.curation;
  return nlohmann::json{
      {"env", env_config_to_json(c.env)},
      {"mixture", mix},
      {"train",
       {{"steps", c.train.steps},
        {"batch", c.train.batch},
        {"lr", c.train.lr},
        {"checkpoints", c.train.checkpoints},
        {"fine_tune", c.train.fine_tune}}},
      {"curation",
       {{"checkpoints", cur.checkpoints},
        {"rollouts_per_checkpoint", cur.rollouts_per_checkpoint},
        {"validation_rollouts", cur.validation_rollouts},
        {"classifier_epochs", cur.classifier_epochs},
        {"mode", cur.mode == CurationConfig::Mode::Chunk ? "chunk" : "episode"},
        {"chunk_width", cur.chunk_width},
        {"classifier_kind",
         cur.classifier_kind == CurationConfig::Kind::Trajectory ? "trajectory" : "step"},
        {"trajectory_prefix", cur.trajectory_prefix},
        {"checkpoint_strategy",
         cur.checkpoint_strategy == CurationConfig::CheckpointStrategy::Plateau
             ? "plateau"
             : "evenly_spaced"},
        {"cross_validation", cur.cross_validation},
        {"regularization", cur.regularization},
        {"fallback_top_quarter", cur.fallback_top_quarter},
        {"classifier_hidden", cur.classifier_hidden}}},
      {"method", to_string(c.method)},
      {"eval",
       {{"n", c.eval.n},
        {"seeds", c.eval.seeds},
        {"eval_seed", c.eval.eval_seed},
        {"ood_expansions", c.eval.ood_expansions}}},
      {"out_dir", c.out_dir}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("env")) c.env = env_config_from_json(j.at("env"));
    if (j.contains("mixture")) {
      c.mixture.clear();
      for (const auto& row : j.at("mixture"))
        c.mixture.emplace_back(strategy_from_string(row.at(0).get<std::string>()),
                               row.at(1).get<int>());
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.steps = t.value("steps", c.train.steps);
      c.train.batch = t.value("batch", c.train.batch);
      c.train.lr = t.value("lr", c.train.lr);
      c.train.checkpoints = t.value("checkpoints", c.train.checkpoints);
      c.train.fine_tune = t.value("fine_tune", c.train.fine_tune);
      c.curation.checkpoints = c.train.checkpoints;
    }
    if (j.contains("curation")) {
      const auto& u = j.at("curation");
      auto& cur = c.curation;
      cur.checkpoints = u.value("checkpoints", cur.checkpoints);
      cur.rollouts_per_checkpoint = u.value("rollouts_per_checkpoint", cur.rollouts_per_checkpoint);
      cur.validation_rollouts = u.value("validation_rollouts", cur.validation_rollouts);
      cur.classifier_epochs = u.value("classifier_epochs", cur.classifier_epochs);
      if (u.contains("mode")) {
        const std::string m = u.at("mode").get<std::string>();
        if (m == "episode") cur.mode = CurationConfig::Mode::Episode;
        else if (m == "chunk") cur.mode = CurationConfig::Mode::Chunk;
        else throw ConfigError("unknown curation mode: " + m);
      }
      cur.chunk_width = u.value("chunk_width", cur.chunk_width);
      if (u.contains("classifier_kind")) {
        const std::string k = u.at("classifier_kind").get<std::string>();
        if (k == "step") cur.classifier_kind = CurationConfig::Kind::Step;
        else if (k == "trajectory") cur.classifier_kind = CurationConfig::Kind::Trajectory;
        else throw ConfigError("unknown classifier kind: " + k);
      }
      cur.trajectory_prefix = u.value("trajectory_prefix", cur.trajectory_prefix);
      if (u.contains("checkpoint_strategy")) {
        const std::string s = u.at("checkpoint_strategy").get<std::string>();
        if (s == "evenly_spaced")
          cur.checkpoint_strategy = CurationConfig::CheckpointStrategy::EvenlySpaced;
        else if (s == "plateau")
          cur.checkpoint_strategy = CurationConfig::CheckpointStrategy::Plateau;
        else throw ConfigError("unknown checkpoint strategy: " + s);
      }
      cur.cross_validation = u.value("cross_validation", cur.cross_validation);
      cur.regularization = u.value("regularization", cur.regularization);
      cur.fallback_top_quarter = u.value("fallback_top_quarter", cur.fallback_top_quarter);
      if (u.contains("classifier_hidden"))
        cur.classifier_hidden = u.at("classifier_hidden").get<std::vector<int>>();
    }
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      c.eval.n = e.value("n", c.eval.n);
      if (e.contains("seeds")) c.eval.seeds = e.at("seeds").get<std::vector<std::uint64_t>>();
      c.eval.eval_seed = e.value("eval_seed", c.eval.eval_seed);
      if (e.contains("ood_expansions"))
        c.eval.ood_expansions = e.at("ood_expansions").get<std::vector<double>>();
    }
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace demoscore
