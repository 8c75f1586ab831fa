#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoscore/baselines.hpp"
#include "demoscore/config.hpp"
#include "demoscore/curator.hpp"
#include "demoscore/jsonl.hpp"
#include "demoscore/policy.hpp"

namespace demoscore {

struct PolicyEval {
  SuccessStats best;    // best checkpoint under the selection rollouts
  SuccessStats final;   // last checkpoint
  int best_checkpoint = 0;  // 1-based
  std::vector<double> selection_curve;
};

struct OodEval {
  double expansion = 0.0;
  SuccessStats base;
  SuccessStats final;
};

struct ReplicateResult {
  std::uint64_t seed = 0;
  PolicyEval base;
  PolicyEval final;
  bool has_curation = false;
  CurationResult curation;
  std::vector<double> initial_curve;  // per-checkpoint rollout success of the initial run
  std::vector<int> initial_curve_n;   // rollouts behind each point
  long episodes_rollouts = 0;         // C*M rollout-pool episodes
  long episodes_eval = 0;             // selection + headline evaluations
  long episodes_total = 0;
  int retrain_dataset_size = 0;
  std::vector<OodEval> ood;
  std::map<std::string, double> timings_s;
};

struct Report {
  int schema_version = 1;
  std::string method;
  std::string variant;  // ablation variant name, empty for plain runs
  std::string mixture_label;
  nlohmann::json config_echo;
  std::vector<ReplicateResult> replicates;
  SuccessStats pooled_base;
  SuccessStats pooled_final;
};

namespace detail {

template <typename F>
auto stage(const std::string& name, std::map<std::string, double>& timings, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto result = f();
    timings[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const DegenerateFilterError& e) {
    throw DegenerateFilterError("stage " + name + ": " + e.what(), e.histogram);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

}  // namespace detail

// Initial-run artifacts shared by every method and ablation variant at a
// given replicate seed: the demo mixture, the C checkpoints, and rollout
// pools. Pools grow on demand; per-episode seeds depend only on
// (checkpoint, episode index), so a longer pool is a superset of a shorter
// one.
struct SeedArtifacts {
  DemoDataset demos;
  TrainResult initial;
  std::vector<RolloutSet> pools;   // one per checkpoint, sized as requested
  long pool_episodes = 0;
};

class PipelineCache {
 public:
  std::shared_ptr<SeedArtifacts> get(const std::string& key) {
    auto it = store_.find(key);
    return it == store_.end() ? nullptr : it->second;
  }
  void put(const std::string& key, std::shared_ptr<SeedArtifacts> value) {
    store_[key] = std::move(value);
  }

 private:
  std::map<std::string, std::shared_ptr<SeedArtifacts>> store_;
};

namespace detail {

inline std::string artifact_key(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.mixture_label() + "|" + std::to_string(seed) + "|" +
         std::to_string(cfg.train.steps) + "|" + std::to_string(cfg.train.checkpoints) + "|" +
         env_config_to_json(cfg.env).dump();
}

inline std::vector<int> pool_sizes(const CurationConfig& cur) {
  std::vector<int> sizes(static_cast<std::size_t>(cur.checkpoints), cur.rollouts_per_checkpoint);
  sizes.back() = cur.validation_rollouts;
  return sizes;
}

inline std::string seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.out_dir + "/seed_" + std::to_string(seed);
}

// Loads initial-run artifacts (demo set, checkpoints, rollout pools) that a
// previous run left behind; returns nullptr when incomplete or mismatched.
inline std::shared_ptr<SeedArtifacts> load_artifacts(const ExperimentConfig& cfg,
                                                     std::uint64_t seed) {
  namespace fs = std::filesystem;
  const std::string dir = seed_dir(cfg, seed);
  try {
    if (!fs::exists(dir + "/demos.jsonl")) return nullptr;
    auto art = std::make_shared<SeedArtifacts>();
    art->demos = load_jsonl(dir + "/demos.jsonl").as_demo_dataset();
    for (int i = 1; i <= cfg.train.checkpoints; ++i) {
      const std::string path = dir + "/ckpt_" + std::to_string(i) + ".bin";
      if (!fs::exists(path)) return nullptr;
      art->initial.checkpoints.push_back(load_checkpoint(path));
      art->initial.checkpoint_steps.push_back(
          static_cast<int>(static_cast<long>(cfg.train.steps) * i / cfg.train.checkpoints));
    }
    std::ifstream meta(dir + "/train_meta.json");
    if (meta) {
      nlohmann::json j;
      meta >> j;
      art->initial.initial_loss = j.value("initial_loss", 0.0);
      art->initial.final_loss = j.value("final_loss", 0.0);
    }
    art->pools.resize(static_cast<std::size_t>(cfg.train.checkpoints));
    for (int i = 1; i <= cfg.train.checkpoints; ++i) {
      const std::string path = dir + "/rollouts_" + std::to_string(i) + ".jsonl";
      if (fs::exists(path)) art->pools[i - 1] = load_jsonl(path).as_rollout_set();
      art->pools[i - 1].checkpoint = i;
    }
    return art;
  } catch (const std::exception&) {
    return nullptr;  // fall back to recomputing
  }
}

inline void save_artifacts(const ExperimentConfig& cfg, std::uint64_t seed,
                           const SeedArtifacts& art) {
  namespace fs = std::filesystem;
  const std::string dir = seed_dir(cfg, seed);
  fs::create_directories(dir);
  save_jsonl(art.demos, cfg.env, dir + "/demos.jsonl");
  for (std::size_t i = 0; i < art.initial.checkpoints.size(); ++i)
    save_checkpoint(art.initial.checkpoints[i], dir + "/ckpt_" + std::to_string(i + 1) + ".bin");
  nlohmann::json meta{{"initial_loss", art.initial.initial_loss},
                      {"final_loss", art.initial.final_loss},
                      {"checkpoint_steps", art.initial.checkpoint_steps}};
  std::ofstream(dir + "/train_meta.json") << meta.dump(2) << "\n";
  for (std::size_t i = 0; i < art.pools.size(); ++i)
    if (!art.pools[i].trajectories.empty())
      save_jsonl(art.pools[i], cfg.env, dir + "/rollouts_" + std::to_string(i + 1) + ".jsonl");
}

// Build or extend the shared artifacts so every pool holds at least the
// requested number of episodes. Per-episode seeds depend only on
// (checkpoint, index), so extending a pool preserves its prefix.
inline std::shared_ptr<SeedArtifacts> ensure_artifacts(const ExperimentConfig& cfg,
                                                       std::uint64_t seed,
                                                       const std::vector<int>& sizes,
                                                       PipelineCache* cache,
                                                       std::map<std::string, double>& timings) {
  const std::string key = artifact_key(cfg, seed);
  std::shared_ptr<SeedArtifacts> art = cache ? cache->get(key) : nullptr;
  RngStream root(seed);
  bool fresh = false;
  if (!art && cfg.resume) art = load_artifacts(cfg, seed);
  if (!art) {
    art = std::make_shared<SeedArtifacts>();
    art->demos = stage("build_mixture", timings, [&] {
      return build_mixture(cfg.mixture, cfg.env, root.substream("mixture").seed);
    });
    art->initial = stage("initial_train", timings, [&] {
      return train_bc(art->demos, cfg.train, root.substream("train").seed);
    });
    fresh = true;
  }
  if (cache) cache->put(key, art);
  if (art->pools.empty()) art->pools.resize(static_cast<std::size_t>(cfg.train.checkpoints));
  bool pools_grew = false;
  for (std::size_t i = 0; i < art->pools.size(); ++i) {
    const int want = sizes[i];
    if (static_cast<int>(art->pools[i].trajectories.size()) >= want) continue;
    art->pool_episodes += want - static_cast<long>(art->pools[i].trajectories.size());
    art->pools[i] = stage("collect_rollouts", timings, [&] {
      return collect_rollouts(art->initial.checkpoints[i], cfg.env, want,
                              root.substream("rollouts", i + 1).seed, static_cast<int>(i) + 1);
    });
    pools_grew = true;
  }
  if ((fresh || pools_grew) && !cfg.out_dir.empty()) save_artifacts(cfg, seed, *art);
  return art;
}

inline std::vector<RolloutSet> sliced_pools(const SeedArtifacts& art,
                                            const std::vector<int>& sizes) {
  std::vector<RolloutSet> out;
  for (std::size_t i = 0; i < art.pools.size(); ++i) {
    RolloutSet s;
    s.checkpoint = art.pools[i].checkpoint;
    s.trajectories.assign(art.pools[i].trajectories.begin(),
                          art.pools[i].trajectories.begin() + sizes[i]);
    out.push_back(std::move(s));
  }
  return out;
}

// Evaluate a trained run the way the reports present it: rate every
// checkpoint with selection rollouts, evaluate the best and the final
// checkpoints with the full eval budget.
inline PolicyEval evaluate_run(const std::vector<MdnPolicy>& checkpoints, const EnvConfig& env,
                               int selection_m, int eval_n, RngStream eval_rng,
                               std::uint64_t selection_seed_base, long& episode_counter,
                               const std::vector<double>* precomputed_curve = nullptr) {
  PolicyEval out;
  if (precomputed_curve) {
    out.selection_curve = *precomputed_curve;
  } else {
    RngStream sel_root(selection_seed_base);
    std::vector<RolloutSet> sets;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      sets.push_back(collect_rollouts(checkpoints[i], env, selection_m,
                                      sel_root.substream("select", i + 1).seed,
                                      static_cast<int>(i) + 1));
      episode_counter += selection_m;
    }
    out.selection_curve = checkpoint_success_curve(sets);
  }
  const std::size_t best = best_checkpoint_index(out.selection_curve);
  out.best_checkpoint = static_cast<int>(best) + 1;
  out.best = evaluate_policy(checkpoints[best], env, eval_n, eval_rng.substream("best").seed);
  episode_counter += eval_n;
  if (best + 1 == checkpoints.size()) {
    out.final = out.best;
  } else {
    out.final =
        evaluate_policy(checkpoints.back(), env, eval_n, eval_rng.substream("final").seed);
    episode_counter += eval_n;
  }
  return out;
}

inline EnvConfig expanded_env(const EnvConfig& env, double factor) {
  EnvConfig out = env;
  out.start_y_range = env.start_y_range * (1.0 + factor);
  return out;
}

}  // namespace detail

// One Demo-SCORE replicate: train, rate checkpoints with rollouts, select a
// classifier by cross-validation, threshold, filter demos and rollouts,
// retrain on the union, evaluate.
inline ReplicateResult run_demo_score_replicate(const ExperimentConfig& cfg, std::uint64_t seed,
                                                PipelineCache* cache = nullptr) {
  ReplicateResult rep;
  rep.seed = seed;
  RngStream root(seed);
  RngStream eval_root = root.substream("eval", cfg.eval.eval_seed);

  const auto sizes = detail::pool_sizes(cfg.curation);
  auto art = detail::ensure_artifacts(cfg, seed, sizes, cache, rep.timings_s);
  const auto pools = detail::sliced_pools(*art, sizes);
  for (int m : sizes) rep.episodes_rollouts += m;
  rep.initial_curve = checkpoint_success_curve(pools);
  rep.initial_curve_n = sizes;

  ClassifierSelection sel = detail::stage("classifier", rep.timings_s, [&] {
    if (cfg.curation.cross_validation)
      return cross_validate_select(pools, cfg.curation, root.substream("classifier").seed);
    // no-cross-val protocol: a fresh pool of C*M rollouts from the best
    // initial checkpoint, split into random halves inside the selector
    const std::size_t best = best_checkpoint_index(rep.initial_curve);
    const int total = cfg.curation.rollouts_per_checkpoint * cfg.curation.checkpoints;
    RolloutSet pool = collect_rollouts(art->initial.checkpoints[best], cfg.env, total,
                                       root.substream("ncv_pool").seed,
                                       static_cast<int>(best) + 1);
    rep.episodes_rollouts += total;
    return cross_validate_select({pool}, cfg.curation, root.substream("classifier").seed);
  });

  const double gamma = detail::stage("threshold", rep.timings_s, [&] {
    return compute_threshold(sel.chosen, sel.training_set);
  });

  DemoDataset retrain_demos;
  CurationResult curation = detail::stage("filter", rep.timings_s, [&] {
    if (cfg.curation.mode == CurationConfig::Mode::Chunk) {
      ChunkFilterOutput out = filter_chunks(art->demos, sel.chosen, gamma,
                                            cfg.curation.chunk_width,
                                            cfg.curation.fallback_top_quarter);
      retrain_demos = std::move(out.chunked);
      return std::move(out.result);
    }
    CurationResult r =
        filter_episodes(art->demos, sel.chosen, gamma, cfg.curation.fallback_top_quarter);
    std::set<std::string> kept(r.kept.begin(), r.kept.end());
    for (const auto& t : art->demos.trajectories)
      if (kept.count(t.id)) retrain_demos.trajectories.push_back(t);
    return r;
  });
  curation.candidate_val_losses = sel.candidate_val_losses;

  const std::vector<Trajectory> kept_rollouts = detail::stage("filter_rollouts", rep.timings_s, [&] {
    return filter_rollouts(pools, sel.chosen, gamma);
  });
  for (const auto& t : kept_rollouts) {
    curation.kept_rollouts.push_back(t.id);
    retrain_demos.trajectories.push_back(t);
  }
  std::sort(curation.kept_rollouts.begin(), curation.kept_rollouts.end());
  rep.retrain_dataset_size = static_cast<int>(retrain_demos.trajectories.size());

  TrainResult retrained = detail::stage("retrain", rep.timings_s, [&] {
    if (retrain_demos.trajectories.empty())
      throw ContractError("filtered training set is empty");
    const MdnPolicy* init = cfg.train.fine_tune ? &art->initial.checkpoints.back() : nullptr;
    return train_bc(retrain_demos, cfg.train, root.substream("retrain").seed, {}, init);
  });

  detail::stage("evaluate", rep.timings_s, [&] {
    rep.base = detail::evaluate_run(art->initial.checkpoints, cfg.env, 0, cfg.eval.n,
                                    eval_root.substream("base"), 0, rep.episodes_eval,
                                    &rep.initial_curve);
    rep.final = detail::evaluate_run(retrained.checkpoints, cfg.env,
                                     cfg.curation.validation_rollouts, cfg.eval.n,
                                     eval_root.substream("method"),
                                     root.substream("final_select").seed, rep.episodes_eval);
    for (std::size_t k = 0; k < cfg.eval.ood_expansions.size(); ++k) {
      const double f = cfg.eval.ood_expansions[k];
      const EnvConfig ood_env = detail::expanded_env(cfg.env, f);
      OodEval ood;
      ood.expansion = f;
      ood.base = evaluate_policy(art->initial.checkpoints[best_checkpoint_index(rep.initial_curve)],
                                 ood_env, cfg.eval.n,
                                 eval_root.substream("ood_base", k).seed);
      ood.final = evaluate_policy(
          retrained.checkpoints[static_cast<std::size_t>(rep.final.best_checkpoint) - 1], ood_env,
          cfg.eval.n, eval_root.substream("ood_final", k).seed);
      rep.episodes_eval += 2 * cfg.eval.n;
      rep.ood.push_back(ood);
    }
    return 0;
  });

  rep.has_curation = true;
  rep.curation = std::move(curation);
  rep.episodes_total = rep.episodes_rollouts + rep.episodes_eval;
  return rep;
}

// Baseline replicates share the initial run; they differ in what they
// retrain on (or whether they retrain at all).
inline ReplicateResult run_baseline_replicate(const ExperimentConfig& cfg, std::uint64_t seed,
                                              PipelineCache* cache = nullptr) {
  ReplicateResult rep;
  rep.seed = seed;
  RngStream root(seed);
  RngStream eval_root = root.substream("eval", cfg.eval.eval_seed);

  const auto sizes = detail::pool_sizes(cfg.curation);
  auto art = detail::ensure_artifacts(cfg, seed, sizes, cache, rep.timings_s);
  const auto pools = detail::sliced_pools(*art, sizes);
  for (int m : sizes) rep.episodes_rollouts += m;
  rep.initial_curve = checkpoint_success_curve(pools);
  rep.initial_curve_n = sizes;
  rep.base = detail::evaluate_run(art->initial.checkpoints, cfg.env, 0, cfg.eval.n,
                                  eval_root.substream("base"), 0, rep.episodes_eval,
                                  &rep.initial_curve);

  if (cfg.method == Method::Base) {
    rep.final = rep.base;
    rep.episodes_total = rep.episodes_rollouts + rep.episodes_eval;
    return rep;
  }

  if (cfg.method == Method::Rcp) {
    RcpDataset ds = rcp_dataset(art->demos, pools);
    TrainingSet ts = training_set_from(ds);
    if (ts.input_dim != RcpDataset::kInputDim)
      throw ContractError("rcp input width must be 4");
    TrainResult res = detail::stage("retrain", rep.timings_s, [&] {
      return train_mdn(ts, cfg.train, root.substream("retrain").seed);
    });
    // conditioned evaluation with the return input pinned to 1
    RngStream sel_root(root.substream("final_select").seed);
    std::vector<RolloutSet> sets;
    for (std::size_t i = 0; i < res.checkpoints.size(); ++i) {
      sets.push_back(collect_rollouts_conditioned(res.checkpoints[i], cfg.env,
                                                  cfg.curation.validation_rollouts,
                                                  sel_root.substream("select", i + 1).seed,
                                                  static_cast<int>(i) + 1));
      rep.episodes_eval += cfg.curation.validation_rollouts;
    }
    rep.final.selection_curve = checkpoint_success_curve(sets);
    const std::size_t best = best_checkpoint_index(rep.final.selection_curve);
    rep.final.best_checkpoint = static_cast<int>(best) + 1;
    RngStream ev = eval_root.substream("method");
    rep.final.best = evaluate_policy_conditioned(res.checkpoints[best], cfg.env, cfg.eval.n,
                                                 ev.substream("best").seed);
    rep.episodes_eval += cfg.eval.n;
    if (best + 1 == res.checkpoints.size()) {
      rep.final.final = rep.final.best;
    } else {
      rep.final.final = evaluate_policy_conditioned(res.checkpoints.back(), cfg.env, cfg.eval.n,
                                                    ev.substream("final").seed);
      rep.episodes_eval += cfg.eval.n;
    }
    rep.episodes_total = rep.episodes_rollouts + rep.episodes_eval;
    return rep;
  }

  DemoDataset dataset;
  std::vector<double> weights;
  if (cfg.method == Method::AutoIl) {
    dataset = auto_il_dataset(art->demos, pools);
  } else if (cfg.method == Method::LossWeighting) {
    const std::size_t best = best_checkpoint_index(rep.initial_curve);
    WeightedDataset w = loss_weighting(art->demos, art->initial.checkpoints[best]);
    dataset = std::move(w.demos);
    weights = std::move(w.weights);
  } else {
    throw ConfigError("run_baseline_replicate does not handle this method");
  }
  rep.retrain_dataset_size = static_cast<int>(dataset.trajectories.size());

  TrainResult res = detail::stage("retrain", rep.timings_s, [&] {
    return train_bc(dataset, cfg.train, root.substream("retrain").seed, weights);
  });
  rep.final = detail::evaluate_run(res.checkpoints, cfg.env, cfg.curation.validation_rollouts,
                                   cfg.eval.n, eval_root.substream("method"),
                                   root.substream("final_select").seed, rep.episodes_eval);
  rep.episodes_total = rep.episodes_rollouts + rep.episodes_eval;
  return rep;
}

inline Report run_method(const ExperimentConfig& cfg, PipelineCache* cache = nullptr) {
  cfg.validate();
  Report report;
  report.method = to_string(cfg.method);
  report.mixture_label = cfg.mixture_label();
  report.config_echo = experiment_config_to_json(cfg);
  std::vector<SuccessStats> base_parts, final_parts;
  for (std::uint64_t seed : cfg.eval.seeds) {
    ReplicateResult rep = cfg.method == Method::DemoScore
                              ? run_demo_score_replicate(cfg, seed, cache)
                              : run_baseline_replicate(cfg, seed, cache);
    base_parts.push_back(rep.base.best);
    final_parts.push_back(rep.final.best);
    report.replicates.push_back(std::move(rep));
  }
  report.pooled_base = pool_stats(base_parts);
  report.pooled_final = pool_stats(final_parts);
  return report;
}

inline Report run_demo_score(const ExperimentConfig& cfg, PipelineCache* cache = nullptr) {
  ExperimentConfig c = cfg;
  c.method = Method::DemoScore;
  return run_method(c, cache);
}

inline Report run_baseline(const ExperimentConfig& cfg, PipelineCache* cache = nullptr) {
  if (cfg.method == Method::DemoScore) throw ConfigError("run_baseline got method demo_score");
  return run_method(cfg, cache);
}

// -- ablation suite --

struct AblationVariant {
  std::string name;
  CurationConfig curation;
};

inline AblationVariant make_variant(const std::string& name, const CurationConfig& base) {
  AblationVariant v{name, base};
  auto& cur = v.curation;
  if (name == "original") {
  } else if (name == "chunk") {
    cur.mode = CurationConfig::Mode::Chunk;
  } else if (name == "trajectory") {
    cur.classifier_kind = CurationConfig::Kind::Trajectory;
  } else if (name == "plateau") {
    cur.checkpoint_strategy = CurationConfig::CheckpointStrategy::Plateau;
  } else if (name == "no_reg") {
    cur.regularization = false;
  } else if (name == "no_crossval") {
    cur.cross_validation = false;
  } else if (name.rfind("rollouts_", 0) == 0) {
    cur.rollouts_per_checkpoint = std::stoi(name.substr(9));
  } else if (name.rfind("size_", 0) == 0) {
    cur.classifier_hidden.clear();
    std::string rest = name.substr(5);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      const std::size_t next = rest.find('_', pos);
      cur.classifier_hidden.push_back(std::stoi(rest.substr(pos, next - pos)));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
  } else {
    throw ConfigError("unknown ablation variant: " + name);
  }
  return v;
}

inline std::vector<std::string> ablation_suite_variants(const std::string& suite) {
  if (suite == "design")
    return {"original", "chunk", "trajectory", "plateau", "no_reg", "no_crossval"};
  if (suite == "budget") return {"rollouts_100", "rollouts_50", "rollouts_25", "rollouts_10"};
  if (suite == "size")
    return {"size_8_8", "size_8_8_8", "size_16_16", "size_16_16_16", "size_32_32",
            "size_32_32_32"};
  if (suite == "all") {
    auto v = ablation_suite_variants("design");
    for (const auto& s : ablation_suite_variants("budget")) v.push_back(s);
    for (const auto& s : ablation_suite_variants("size")) v.push_back(s);
    return v;
  }
  // a single variant name is also accepted
  return {make_variant(suite, CurationConfig{}).name};
}

// One Report per variant over shared replicate seeds and shared initial
// checkpoints; rollout-budget variants subsample the same pools.
inline std::vector<Report> run_ablation_suite(const ExperimentConfig& cfg,
                                              const std::string& suite,
                                              PipelineCache* cache = nullptr) {
  cfg.validate();
  PipelineCache local;
  if (!cache) cache = &local;
  std::vector<Report> reports;
  for (const std::string& name : ablation_suite_variants(suite)) {
    ExperimentConfig vcfg = cfg;
    vcfg.method = Method::DemoScore;
    vcfg.curation = make_variant(name, cfg.curation).curation;
    Report r = run_method(vcfg, cache);
    r.variant = name;
    reports.push_back(std::move(r));
  }
  return reports;
}

// -- calibration --

struct CalibrationSummary {
  CalibrationReport env_report;
  std::vector<double> wide_policy_success;    // per replicate seed, best checkpoint
  std::vector<double> narrow_policy_success;  // per replicate seed, best checkpoint
  bool demo_band_ok = false;
  bool wide_band_ok = false;    // >= 0.9 in a majority of seeds
  bool narrow_band_ok = false;  // <= 0.5 in a majority of seeds
  bool passed = false;
};

// Certifies the reliability asymmetry the environment is built around:
// near-perfect scripted demonstrators, a strong pure-wide policy, a weak
// pure-narrow policy.
inline CalibrationSummary run_calibration(const ExperimentConfig& cfg, int demo_trials = 1000,
                                          int policy_eval_n = 200) {
  cfg.validate();
  CalibrationSummary sum;
  sum.env_report = calibrate(cfg.env, demo_trials);
  const int demo_count = 100;
  for (std::uint64_t seed : cfg.eval.seeds) {
    for (StrategyTag tag : {StrategyTag::WideA, StrategyTag::NarrowB}) {
      RngStream root = RngStream(seed).substream(to_string(tag));
      DemoDataset demos =
          build_mixture({{tag, demo_count}}, cfg.env, root.substream("mixture").seed);
      TrainResult res = train_bc(demos, cfg.train, root.substream("train").seed);
      RngStream sel_root(root.substream("select").seed);
      std::vector<RolloutSet> sets;
      for (std::size_t i = 0; i < res.checkpoints.size(); ++i)
        sets.push_back(collect_rollouts(res.checkpoints[i], cfg.env, 50,
                                        sel_root.substream("select", i + 1).seed,
                                        static_cast<int>(i) + 1));
      const auto curve = checkpoint_success_curve(sets);
      const std::size_t best = best_checkpoint_index(curve);
      const double success =
          evaluate_policy(res.checkpoints[best], cfg.env, policy_eval_n,
                          root.substream("eval").seed)
              .p_hat;
      (tag == StrategyTag::WideA ? sum.wide_policy_success : sum.narrow_policy_success)
          .push_back(success);
    }
  }
  sum.demo_band_ok = sum.env_report.wide_first_attempt_rate >= 0.99 &&
                     sum.env_report.narrow_first_attempt_rate >= 0.99;
  int wide_ok = 0, narrow_ok = 0;
  for (double v : sum.wide_policy_success) wide_ok += v >= 0.9;
  for (double v : sum.narrow_policy_success) narrow_ok += v <= 0.5;
  sum.wide_band_ok = 2 * wide_ok > static_cast<int>(sum.wide_policy_success.size());
  sum.narrow_band_ok = 2 * narrow_ok > static_cast<int>(sum.narrow_policy_success.size());
  sum.passed = sum.demo_band_ok && sum.wide_band_ok && sum.narrow_band_ok;
  return sum;
}

}  // namespace demoscore
