#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "demoscore/adamw.hpp"
#include "demoscore/data.hpp"
#include "demoscore/errors.hpp"
#include "demoscore/mlp.hpp"
#include "demoscore/rng.hpp"

namespace demoscore {

// Per-dimension z-normalization fitted on the classifier's training
// rollout states and applied identically everywhere after that.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-8

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stddev[i];
    return out;
  }

  std::uint64_t digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::vector<double>& v) {
      for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
          h ^= (bits >> (8 * b)) & 0xff;
          h *= 0x100000001b3ULL;
        }
      }
    };
    mix(mean);
    mix(stddev);
    return h;
  }
};

inline Normalizer fit_normalizer(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw ContractError("fit_normalizer on empty set");
  Normalizer n;
  n.mean.assign(3, 0.0);
  n.stddev.assign(3, 0.0);
  std::size_t count = 0;
  for (const auto& t : trajs)
    for (const auto& s : t.states) {
      const auto v = s.vec();
      for (int d = 0; d < 3; ++d) n.mean[d] += v[d];
      ++count;
    }
  for (int d = 0; d < 3; ++d) n.mean[d] /= static_cast<double>(count);
  for (const auto& t : trajs)
    for (const auto& s : t.states) {
      const auto v = s.vec();
      for (int d = 0; d < 3; ++d) n.stddev[d] += (v[d] - n.mean[d]) * (v[d] - n.mean[d]);
    }
  for (int d = 0; d < 3; ++d)
    n.stddev[d] = std::max(1e-8, std::sqrt(n.stddev[d] / static_cast<double>(count)));
  return n;
}

inline Normalizer fit_normalizer(const RolloutSet& set) { return fit_normalizer(set.trajectories); }

enum class ClassifierKind { Step, TrajectoryPooled };

struct ClassifierTrainConfig {
  std::vector<int> hidden{8, 8};
  double dropout = 0.3;
  double weight_decay = 0.1;
  double lr = 1e-3;
  int epochs = 200;
  int batch = 256;
  int trajectory_prefix = 100;
};

// Small MLP mapping a normalized state (or pooled trajectory prefix) to a
// success probability. Evaluation is deterministic: dropout only acts in
// training mode.
struct QualityClassifier {
  ClassifierKind kind = ClassifierKind::Step;
  Mlp net;  // sigmoid head
  Normalizer norm;
  int trained_on_checkpoint = 0;
  double val_loss = 0.0;                // best epoch's validation loss
  int best_epoch = 0;
  std::vector<double> val_history;      // epoch 0 (initial params) onward
  bool single_class_warning = false;
  int trajectory_prefix = 100;
};

// Pooled trajectory features: per-dimension mean, std, min, max over the
// first `prefix` normalized steps; shorter prefixes repeat the last state.
inline std::vector<double> pooled_features(const Normalizer& norm, const Trajectory& t,
                                           int prefix) {
  if (t.states.empty()) throw ContractError("pooled_features on empty trajectory");
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(prefix));
  for (int i = 0; i < prefix; ++i) {
    const std::size_t idx = std::min<std::size_t>(i, t.states.size() - 1);
    rows.push_back(norm.apply(t.states[idx].vec()));
  }
  const std::size_t dims = rows.front().size();
  std::vector<double> out;
  out.reserve(4 * dims);
  for (std::size_t d = 0; d < dims; ++d) {
    double mean = 0.0, lo = rows[0][d], hi = rows[0][d];
    for (const auto& r : rows) {
      mean += r[d];
      lo = std::min(lo, r[d]);
      hi = std::max(hi, r[d]);
    }
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto& r : rows) var += (r[d] - mean) * (r[d] - mean);
    out.push_back(mean);
    out.push_back(std::sqrt(var / static_cast<double>(rows.size())));
    out.push_back(lo);
    out.push_back(hi);
  }
  return out;
}

inline double state_prob(const QualityClassifier& clf, const Observation& obs) {
  return mlp_forward(clf.net, clf.norm.apply(obs.vec()), 0.0, nullptr, false)[0];
}

inline double trajectory_prob(const QualityClassifier& clf, const Trajectory& t) {
  return mlp_forward(clf.net, pooled_features(clf.norm, t, clf.trajectory_prefix), 0.0, nullptr,
                     false)[0];
}

namespace detail {

inline double bce(double q, double y) {
  const double qc = std::clamp(q, 1e-7, 1.0 - 1e-7);
  return -y * std::log(qc) - (1.0 - y) * std::log(1.0 - qc);
}

}  // namespace detail

// Per-step binary cross entropy averaged over the trajectory; the
// trajectory-pooled kind scores the prefix once instead.
inline double step_loss(const QualityClassifier& clf, const Trajectory& t, double y) {
  if (y < 0.0 || y > 1.0) throw ContractError("step_loss label outside [0,1]");
  if (clf.kind == ClassifierKind::TrajectoryPooled)
    return detail::bce(trajectory_prob(clf, t), y);
  double total = 0.0;
  for (const auto& s : t.states) total += detail::bce(state_prob(clf, s), y);
  return total / static_cast<double>(t.states.size());
}

// Mean loss over a rollout set, trajectories weighted equally.
inline double set_loss(const QualityClassifier& clf, const RolloutSet& set) {
  if (set.trajectories.empty()) throw ContractError("set_loss on empty rollout set");
  double total = 0.0;
  for (const auto& t : set.trajectories) total += step_loss(clf, t, t.outcome);
  return total / static_cast<double>(set.trajectories.size());
}

namespace detail {

struct LabeledRow {
  std::vector<double> x;
  double y;
};

inline QualityClassifier train_rows(std::vector<LabeledRow> rows, const RolloutSet& val,
                                    ClassifierKind kind, const Normalizer& norm,
                                    const ClassifierTrainConfig& cfg, std::uint64_t seed,
                                    int train_checkpoint) {
  if (rows.empty()) throw ContractError("classifier training set is empty");
  if (val.trajectories.empty()) throw ContractError("classifier validation set is empty");

  RngStream root(seed);
  std::vector<std::size_t> dims{rows.front().x.size()};
  for (int h : cfg.hidden) dims.push_back(static_cast<std::size_t>(h));
  dims.push_back(1);
  RngStream init_rng = root.substream("init");
  QualityClassifier clf;
  clf.kind = kind;
  clf.net = init_mlp(dims, Head::Sigmoid, init_rng);
  clf.norm = norm;
  clf.trained_on_checkpoint = train_checkpoint;
  clf.trajectory_prefix = cfg.trajectory_prefix;

  bool all_same = true;
  for (const auto& r : rows)
    if (r.y != rows.front().y) {
      all_same = false;
      break;
    }
  clf.single_class_warning = all_same;

  AdamWConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.weight_decay = cfg.weight_decay;
  AdamWState opt(clf.net, ocfg);
  RngStream dropout_rng = root.substream("dropout");

  Mlp best_net = clf.net;
  double best_loss = set_loss(clf, val);
  int best_epoch = 0;
  clf.val_history.push_back(best_loss);

  Gradients grads = zero_gradients(clf.net);
  ForwardCache cache;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream perm_rng = root.substream("epoch", epoch);
    const auto perm = perm_rng.permutation(rows.size());
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch) {
      const std::size_t stop = std::min(perm.size(), start + cfg.batch);
      for (auto& layer : grads) {
        layer.w.fill(0.0);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const LabeledRow& row = rows[perm[i]];
        const double q =
            mlp_forward(clf.net, row.x, cfg.dropout, &dropout_rng, true, &cache)[0];
        detail::backprop_accumulate(clf.net, cache, {q - row.y}, inv, grads);
      }
      adamw_step(clf.net, grads, opt);
    }
    const double vloss = set_loss(clf, val);
    clf.val_history.push_back(vloss);
    if (vloss < best_loss) {
      best_loss = vloss;
      best_net = clf.net;
      best_epoch = epoch;
    }
  }
  clf.net = std::move(best_net);
  clf.val_loss = best_loss;
  clf.best_epoch = best_epoch;
  return clf;
}

}  // namespace detail

// Step classifier: one labeled row per state, trained with dropout and
// decoupled weight decay; the epoch snapshot with the lowest validation
// loss is returned.
inline QualityClassifier train_classifier(const RolloutSet& train, const RolloutSet& val,
                                          const ClassifierTrainConfig& cfg, std::uint64_t seed) {
  if (train.trajectories.empty()) throw ContractError("train_classifier: empty training set");
  Normalizer norm = fit_normalizer(train);
  std::vector<detail::LabeledRow> rows;
  for (const auto& t : train.trajectories)
    for (const auto& s : t.states) rows.push_back({norm.apply(s.vec()), t.outcome});
  return detail::train_rows(std::move(rows), val, ClassifierKind::Step, norm, cfg, seed,
                            train.checkpoint);
}

// Trajectory classifier: one labeled row per trajectory over pooled
// prefix features.
inline QualityClassifier train_trajectory_classifier(const RolloutSet& train,
                                                     const RolloutSet& val,
                                                     const ClassifierTrainConfig& cfg,
                                                     std::uint64_t seed) {
  if (train.trajectories.empty())
    throw ContractError("train_trajectory_classifier: empty training set");
  Normalizer norm = fit_normalizer(train);
  std::vector<detail::LabeledRow> rows;
  for (const auto& t : train.trajectories)
    rows.push_back({pooled_features(norm, t, cfg.trajectory_prefix), t.outcome});
  return detail::train_rows(std::move(rows), val, ClassifierKind::TrajectoryPooled, norm, cfg,
                            seed, train.checkpoint);
}

}  // namespace demoscore
