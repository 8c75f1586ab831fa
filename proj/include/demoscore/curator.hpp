#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoscore/classifier.hpp"
#include "demoscore/data.hpp"
#include "demoscore/errors.hpp"
#include "demoscore/policy.hpp"

namespace demoscore {

struct CurationConfig {
  int checkpoints = 4;               // C
  int rollouts_per_checkpoint = 50;  // M, for the C-1 training checkpoints
  int validation_rollouts = 50;      // rollouts from the last checkpoint
  int classifier_epochs = 200;

  enum class Mode { Episode, Chunk };
  Mode mode = Mode::Episode;
  int chunk_width = 16;

  enum class Kind { Step, Trajectory };
  Kind classifier_kind = Kind::Step;
  int trajectory_prefix = 100;

  enum class CheckpointStrategy { EvenlySpaced, Plateau };
  CheckpointStrategy checkpoint_strategy = CheckpointStrategy::EvenlySpaced;

  bool cross_validation = true;
  bool regularization = true;
  bool fallback_top_quarter = false;
  std::vector<int> classifier_hidden{8, 8};

  void validate() const {
    if (checkpoints < 2) throw ConfigError("curation needs at least 2 checkpoints");
    if (rollouts_per_checkpoint < 1) throw ConfigError("rollouts_per_checkpoint must be >= 1");
    if (validation_rollouts < 1) throw ConfigError("validation_rollouts must be >= 1");
    if (chunk_width < 1) throw ConfigError("chunk_width must be >= 1");
    if (classifier_epochs < 0) throw ConfigError("classifier_epochs must be >= 0");
    for (int h : classifier_hidden)
      if (h < 1) throw ConfigError("classifier hidden widths must be >= 1");
  }

  // Regularization off matches the ablation protocol: no dropout and a
  // token 1e-4 weight decay.
  ClassifierTrainConfig classifier_train_config() const {
    ClassifierTrainConfig c;
    c.hidden = classifier_hidden;
    c.epochs = classifier_epochs;
    c.trajectory_prefix = trajectory_prefix;
    if (!regularization) {
      c.dropout = 0.0;
      c.weight_decay = 1e-4;
    }
    return c;
  }
};

struct ClassifierSelection {
  QualityClassifier chosen;
  int chosen_checkpoint = 0;  // i*, 1-based
  RolloutSet training_set;    // exactly the set the chosen classifier trained on
  std::vector<int> candidate_checkpoints;
  std::vector<double> candidate_val_losses;
  std::vector<std::vector<double>> candidate_histories;
};

namespace detail {

inline QualityClassifier train_kind(const RolloutSet& train, const RolloutSet& val,
                                    const CurationConfig& cfg, std::uint64_t seed) {
  const ClassifierTrainConfig tc = cfg.classifier_train_config();
  return cfg.classifier_kind == CurationConfig::Kind::Trajectory
             ? train_trajectory_classifier(train, val, tc, seed)
             : train_classifier(train, val, tc, seed);
}

}  // namespace detail

// Trains one classifier per training checkpoint (all of 1..C-1 when evenly
// spaced, the ones at or after the performance plateau otherwise),
// validates every candidate on the last checkpoint's rollouts, and returns
// the candidate with the lowest validation loss. With cross-validation off
// the rollout pool is merged and split into random halves instead.
inline ClassifierSelection cross_validate_select(const std::vector<RolloutSet>& pools,
                                                 const CurationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (pools.empty()) throw ConfigError("cross_validate_select needs rollout sets");
  if (cfg.cross_validation && pools.size() < 2)
    throw ConfigError("cross_validate_select needs at least 2 rollout sets");
  RngStream root(seed);
  ClassifierSelection sel;

  if (!cfg.cross_validation) {
    // Random half split of a single pool (merged if several were given).
    std::vector<Trajectory> all;
    for (const auto& p : pools)
      all.insert(all.end(), p.trajectories.begin(), p.trajectories.end());
    RngStream split_rng = root.substream("split");
    const auto perm = split_rng.permutation(all.size());
    RolloutSet train, val;
    train.checkpoint = pools.back().checkpoint;
    val.checkpoint = pools.back().checkpoint;
    for (std::size_t i = 0; i < perm.size(); ++i)
      (i < perm.size() / 2 ? train : val).trajectories.push_back(all[perm[i]]);
    QualityClassifier clf = detail::train_kind(train, val, cfg, root.substream("cls", 0).seed);
    sel.chosen_checkpoint = train.checkpoint;
    sel.training_set = std::move(train);
    sel.candidate_checkpoints = {sel.training_set.checkpoint};
    sel.candidate_val_losses = {clf.val_loss};
    sel.candidate_histories = {clf.val_history};
    sel.chosen = std::move(clf);
    return sel;
  }

  const RolloutSet& val = pools.back();
  std::size_t first_candidate = 0;
  if (cfg.checkpoint_strategy == CurationConfig::CheckpointStrategy::Plateau) {
    // Earliest checkpoint whose rollout success reaches 90% of the best.
    const auto curve = checkpoint_success_curve(pools);
    const double best = *std::max_element(curve.begin(), curve.end());
    for (std::size_t i = 0; i < curve.size(); ++i)
      if (curve[i] >= 0.9 * best) {
        first_candidate = i;
        break;
      }
    first_candidate = std::min(first_candidate, pools.size() - 2);
  }

  std::size_t best_idx = 0;
  for (std::size_t i = first_candidate; i + 1 < pools.size(); ++i) {
    QualityClassifier clf =
        detail::train_kind(pools[i], val, cfg, root.substream("cls", i).seed);
    sel.candidate_checkpoints.push_back(pools[i].checkpoint);
    sel.candidate_val_losses.push_back(clf.val_loss);
    sel.candidate_histories.push_back(clf.val_history);
    if (sel.candidate_val_losses.size() == 1 ||
        clf.val_loss < sel.candidate_val_losses[best_idx]) {
      best_idx = sel.candidate_val_losses.size() - 1;
      sel.chosen = std::move(clf);
      sel.training_set = pools[i];
    }
  }
  sel.chosen_checkpoint = sel.candidate_checkpoints[best_idx];
  return sel;
}

// Mean per-step probability for the step classifier; the pooled prefix
// score for the trajectory kind.
inline double episode_score(const QualityClassifier& clf, const Trajectory& t) {
  if (clf.kind == ClassifierKind::TrajectoryPooled) return trajectory_prob(clf, t);
  double total = 0.0;
  for (const auto& s : t.states) total += state_prob(clf, s);
  return total / static_cast<double>(t.states.size());
}

// Threshold: mean probability over all states of the chosen classifier's
// own training rollout set (state-weighted, not episode-weighted). The
// trajectory kind averages its per-trajectory scores instead.
inline double compute_threshold(const QualityClassifier& clf, const RolloutSet& training_set) {
  if (training_set.trajectories.empty())
    throw ContractError("compute_threshold on empty rollout set");
  if (clf.kind == ClassifierKind::TrajectoryPooled) {
    double total = 0.0;
    for (const auto& t : training_set.trajectories) total += trajectory_prob(clf, t);
    return total / static_cast<double>(training_set.trajectories.size());
  }
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : training_set.trajectories)
    for (const auto& s : t.states) {
      total += state_prob(clf, s);
      ++count;
    }
  return total / static_cast<double>(count);
}

struct CurationResult {
  int chosen_checkpoint = 0;
  double gamma = 0.0;
  std::vector<double> candidate_val_losses;
  std::vector<std::pair<std::string, double>> scores;  // id -> episode/chunk score, id order
  std::vector<std::string> kept;
  std::vector<std::string> discarded;
  std::vector<std::string> kept_rollouts;
  // diagnostics
  double kept_fraction = 0.0;
  std::map<std::string, std::pair<int, int>> per_tag;  // tag -> {kept, discarded}
  std::uint64_t normalizer_digest = 0;
  bool fallback_used = false;
  bool single_class_warning = false;
};

namespace detail {

inline std::vector<int> score_histogram(const std::vector<std::pair<std::string, double>>& scores) {
  std::vector<int> bins(10, 0);
  for (const auto& [id, q] : scores) {
    int b = static_cast<int>(q * 10.0);
    ++bins[std::clamp(b, 0, 9)];
  }
  return bins;
}

inline std::string histogram_text(const std::vector<int>& bins) {
  std::string s = "score histogram [0,1):";
  for (int b : bins) s += " " + std::to_string(b);
  return s;
}

// Keep rule shared by episode and chunk filtering: strict inequality, ties
// discard; degenerate keeps (<5%) abort unless the fallback selects the
// top quarter by score.
inline void apply_keep_rule(CurationResult& result, bool fallback_top_quarter) {
  const std::size_t n = result.scores.size();
  for (const auto& [id, q] : result.scores)
    (q > result.gamma ? result.kept : result.discarded).push_back(id);

  if (n > 0 && static_cast<double>(result.kept.size()) < 0.05 * static_cast<double>(n)) {
    if (!fallback_top_quarter) {
      const auto bins = score_histogram(result.scores);
      throw DegenerateFilterError(
          "degenerate filter: kept " + std::to_string(result.kept.size()) + " of " +
              std::to_string(n) + " (" + histogram_text(bins) + ")",
          bins);
    }
    result.fallback_used = true;
    result.kept.clear();
    result.discarded.clear();
    std::vector<std::pair<std::string, double>> order = result.scores;
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const std::size_t keep_n = (n + 3) / 4;  // top 25%, rounded up
    for (std::size_t i = 0; i < order.size(); ++i)
      (i < keep_n ? result.kept : result.discarded).push_back(order[i].first);
  }
  std::sort(result.kept.begin(), result.kept.end());
  std::sort(result.discarded.begin(), result.discarded.end());
  result.kept_fraction =
      n == 0 ? 0.0 : static_cast<double>(result.kept.size()) / static_cast<double>(n);
}

inline void fill_tag_composition(CurationResult& result,
                                 const std::map<std::string, StrategyTag>& id_tags) {
  for (const auto& id : result.kept) {
    auto it = id_tags.find(id);
    if (it != id_tags.end()) ++result.per_tag[to_string(it->second)].first;
  }
  for (const auto& id : result.discarded) {
    auto it = id_tags.find(id);
    if (it != id_tags.end()) ++result.per_tag[to_string(it->second)].second;
  }
}

}  // namespace detail

// Episode-level filtering: keep demos scoring strictly above the threshold.
inline CurationResult filter_episodes(const DemoDataset& demos, const QualityClassifier& clf,
                                      double gamma, bool fallback_top_quarter = false) {
  CurationResult result;
  result.gamma = gamma;
  result.chosen_checkpoint = clf.trained_on_checkpoint;
  result.normalizer_digest = clf.norm.digest();
  result.single_class_warning = clf.single_class_warning;
  std::map<std::string, StrategyTag> id_tags;
  for (const auto& t : demos.trajectories) {
    result.scores.emplace_back(t.id, episode_score(clf, t));
    if (t.source.kind == TrajectorySource::Kind::Demo) id_tags[t.id] = t.source.tag;
  }
  detail::apply_keep_rule(result, fallback_top_quarter);
  detail::fill_tag_composition(result, id_tags);
  return result;
}

// Splits a trajectory into non-overlapping windows; the final short window
// is kept as-is.
inline std::vector<Trajectory> chunk_trajectory(const Trajectory& t, int width) {
  if (width < 1) throw ContractError("chunk width must be >= 1");
  std::vector<Trajectory> chunks;
  for (std::size_t start = 0; start < t.states.size(); start += width) {
    const std::size_t stop = std::min(t.states.size(), start + width);
    Trajectory c;
    c.id = t.id + "#c" + std::to_string(start / width);
    c.states.assign(t.states.begin() + start, t.states.begin() + stop);
    c.actions.assign(t.actions.begin() + start, t.actions.begin() + stop);
    c.outcome = t.outcome;
    c.source = t.source;
    c.seed = t.seed;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

struct ChunkFilterOutput {
  CurationResult result;
  DemoDataset chunked;  // kept chunks as independent training sequences
};

// Chunk-level filtering: the same keep rule applied to fixed-width windows.
inline ChunkFilterOutput filter_chunks(const DemoDataset& demos, const QualityClassifier& clf,
                                       double gamma, int width, bool fallback_top_quarter = false) {
  ChunkFilterOutput out;
  out.result.gamma = gamma;
  out.result.chosen_checkpoint = clf.trained_on_checkpoint;
  out.result.normalizer_digest = clf.norm.digest();
  out.result.single_class_warning = clf.single_class_warning;
  std::vector<Trajectory> all_chunks;
  std::map<std::string, StrategyTag> id_tags;
  for (const auto& t : demos.trajectories)
    for (auto& c : chunk_trajectory(t, width)) {
      out.result.scores.emplace_back(c.id, episode_score(clf, c));
      if (c.source.kind == TrajectorySource::Kind::Demo) id_tags[c.id] = c.source.tag;
      all_chunks.push_back(std::move(c));
    }
  detail::apply_keep_rule(out.result, fallback_top_quarter);
  detail::fill_tag_composition(out.result, id_tags);

  std::set<std::string> kept_ids(out.result.kept.begin(), out.result.kept.end());
  for (auto& c : all_chunks)
    if (kept_ids.count(c.id)) out.chunked.trajectories.push_back(std::move(c));
  return out;
}

// Successful rollouts that pass the same threshold rule; they join the
// filtered demos for the final training run.
inline std::vector<Trajectory> filter_rollouts(const std::vector<RolloutSet>& pools,
                                               const QualityClassifier& clf, double gamma) {
  std::vector<Trajectory> kept;
  for (const auto& pool : pools)
    for (const auto& t : pool.trajectories)
      if (t.outcome >= 0.99 && episode_score(clf, t) > gamma) kept.push_back(t);
  return kept;
}

inline nlohmann::json curation_to_json(const CurationResult& r) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [id, q] : r.scores) scores[id] = q;
  nlohmann::json per_tag = nlohmann::json::object();
  for (const auto& [tag, counts] : r.per_tag)
    per_tag[tag] = {{"kept", counts.first}, {"discarded", counts.second}};
  return nlohmann::json{
      {"gamma", r.gamma},
      {"chosen_ckpt", r.chosen_checkpoint},
      {"val_losses", r.candidate_val_losses},
      {"scores", scores},
      {"kept", r.kept},
      {"discarded", r.discarded},
      {"kept_rollouts", r.kept_rollouts},
      {"diagnostics",
       {{"kept_fraction", r.kept_fraction},
        {"per_tag", per_tag},
        {"normalizer_digest", r.normalizer_digest},
        {"fallback_used", r.fallback_used},
        {"single_class_warning", r.single_class_warning}}}};
}

}  // namespace demoscore
