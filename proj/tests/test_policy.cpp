#include <gtest/gtest.h>

#include <cmath>

#include "demoscore/jsonl.hpp"
#include "demoscore/policy.hpp"
#include "oracles.hpp"

using namespace demoscore;

namespace {

// Policy whose head outputs are exactly the given biases: zero weights
// everywhere, so the trunk contributes nothing.
MdnPolicy handcrafted_policy(int components, const std::vector<double>& head_bias) {
  MdnPolicy p;
  p.components = components;
  p.input_dim = 3;
  p.net.head = Head::Linear;
  p.net.layers.push_back({Mat(8, 3), std::vector<double>(8, 0.0)});
  p.net.layers.push_back({Mat(static_cast<std::size_t>(5 * components), 8),
                          head_bias});
  return p;
}

std::vector<double> mdn_bias(int k, std::vector<double> alpha, std::vector<double> mu,
                             std::vector<double> log_sigma) {
  std::vector<double> bias;
  bias.insert(bias.end(), alpha.begin(), alpha.end());
  bias.insert(bias.end(), mu.begin(), mu.end());
  bias.insert(bias.end(), log_sigma.begin(), log_sigma.end());
  EXPECT_EQ(bias.size(), static_cast<std::size_t>(5 * k));
  return bias;
}

DemoDataset one_demo_dataset() {
  EnvConfig cfg;
  return build_mixture({{StrategyTag::WideA, 1}}, cfg, 11);
}

}  // namespace

TEST(MdnNll, SingleComponentAtMeanClosedForm) {
  const double ls = std::log(0.1);
  MdnPolicy p = handcrafted_policy(1, mdn_bias(1, {0.0}, {0.03, -0.02}, {ls, ls}));
  const double nll = mdn_nll(p, std::vector<double>{0.1, 0.2, 0.3}, {0.03, -0.02});
  const double expected = 2.0 * std::log(0.1 * std::sqrt(2.0 * M_PI));
  EXPECT_NEAR(nll, expected, 1e-12);
}

TEST(MdnNll, DuplicateComponentsCollapseToSingle) {
  const double ls = std::log(0.05);
  MdnPolicy one = handcrafted_policy(1, mdn_bias(1, {0.0}, {0.01, 0.02}, {ls, ls}));
  MdnPolicy three = handcrafted_policy(
      3, mdn_bias(3, {0.7, -1.2, 0.4}, {0.01, 0.02, 0.01, 0.02, 0.01, 0.02},
                  {ls, ls, ls, ls, ls, ls}));
  const std::vector<double> state{0.0, 0.1, 0.5};
  const Action2 a{0.025, -0.04};
  EXPECT_NEAR(mdn_nll(one, state, a), mdn_nll(three, state, a), 1e-12);
}

TEST(MdnNll, MatchesDirectDensityFormula) {
  RngStream rng(606);
  for (int trial = 0; trial < 20; ++trial) {
    RngStream tr = rng.substream("nll", trial);
    MdnPolicy p = make_mdn_policy(3, 5, tr);
    std::vector<double> state{tr.gaussian(), tr.gaussian(), tr.uniform()};
    Action2 action{0.05 * tr.gaussian(), 0.05 * tr.gaussian()};

    auto out = mlp_forward(p.net, state, 0.0, nullptr, false);
    std::vector<double> logits(out.begin(), out.begin() + 5);
    std::vector<std::vector<double>> means, sigmas;
    for (int k = 0; k < 5; ++k) {
      means.push_back({out[5 + 2 * k], out[5 + 2 * k + 1]});
      sigmas.push_back({std::clamp(std::exp(out[15 + 2 * k]), p.sigma_min, p.sigma_max),
                        std::clamp(std::exp(out[15 + 2 * k + 1]), p.sigma_min, p.sigma_max)});
    }
    const double direct =
        oracles::direct_mixture_nll(logits, means, sigmas, {action.dx, action.dy});
    EXPECT_NEAR(mdn_nll(p, state, action), direct, 1e-10) << "trial " << trial;
  }
}

TEST(MdnNll, GradientMatchesFiniteDifferences) {
  RngStream rng(808);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    RngStream tr = rng.substream("g", trial);
    MdnPolicy p = make_mdn_policy(3, 3, tr, 0.05, {8, 8});
    std::vector<double> state{tr.gaussian(), tr.gaussian(), tr.uniform()};
    Action2 action{0.05 * tr.gaussian(), 0.05 * tr.gaussian()};

    ForwardCache cache;
    auto out = mlp_forward(p.net, state, 0.0, nullptr, false, &cache);
    auto view = detail::unpack_mixture(p, out);
    std::vector<double> head_grad;
    detail::mixture_nll(p, view, action, &head_grad);
    auto analytic = mlp_backward_preact(p.net, cache, head_grad);

    auto loss = [&]() { return mdn_nll(p, state, action); };
    auto numeric = oracles::fd_gradients(p.net, loss);
    worst = std::max(worst, oracles::max_rel_err(analytic, numeric));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(SampleAction, TightSigmaConcentratesOnMean) {
  MdnPolicy p = handcrafted_policy(
      1, mdn_bias(1, {0.0}, {0.02, -0.03}, {std::log(1e-9), std::log(1e-9)}));
  RngStream rng(4);
  for (int i = 0; i < 100; ++i) {
    Action2 a = sample_action(p, std::vector<double>{0, 0, 0}, rng);
    EXPECT_NEAR(a.dx, 0.02, 0.01);
    EXPECT_NEAR(a.dy, -0.03, 0.01);
  }
}

TEST(SampleAction, FixedSeedIsDeterministic) {
  RngStream init(5);
  MdnPolicy p = make_mdn_policy(3, 5, init);
  RngStream a(99), b(99);
  Action2 s1 = sample_action(p, std::vector<double>{0.1, 0.2, 0.3}, a);
  Action2 s2 = sample_action(p, std::vector<double>{0.1, 0.2, 0.3}, b);
  EXPECT_DOUBLE_EQ(s1.dx, s2.dx);
  EXPECT_DOUBLE_EQ(s1.dy, s2.dy);
}

TEST(SampleAction, ComponentFrequenciesFollowSoftmax) {
  const double ls = std::log(1e-3);
  MdnPolicy p = handcrafted_policy(
      2, mdn_bias(2, {0.2, -0.3}, {0.04, 0.04, -0.04, -0.04}, {ls, ls, ls, ls}));
  const double pi0 = std::exp(0.2) / (std::exp(0.2) + std::exp(-0.3));
  RngStream rng(2025);
  int first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Action2 a = sample_action(p, std::vector<double>{0, 0, 0}, rng);
    if (a.dx > 0.0) ++first;
  }
  EXPECT_NEAR(static_cast<double>(first) / n, pi0, 0.02);
}

TEST(SampleAction, ClampedToActionCap) {
  MdnPolicy p = handcrafted_policy(
      1, mdn_bias(1, {0.0}, {0.2, -0.2}, {std::log(0.1), std::log(0.1)}));
  RngStream rng(6);
  for (int i = 0; i < 50; ++i) {
    Action2 a = sample_action(p, std::vector<double>{0, 0, 0}, rng);
    EXPECT_LE(std::fabs(a.dx), p.action_cap);
    EXPECT_LE(std::fabs(a.dy), p.action_cap);
  }
}

TEST(TrainBc, MemorizesSingleDemo) {
  DemoDataset ds = one_demo_dataset();
  TrainRun run;
  run.steps = 4000;
  run.batch = 32;
  TrainResult res = train_bc(ds, run, 7);
  EXPECT_LT(res.final_loss, res.initial_loss);
  EXPECT_LE(res.final_loss, 0.2 * res.initial_loss);
  EXPECT_EQ(res.checkpoints.size(), 4u);
  EXPECT_EQ(res.checkpoint_steps.back(), run.steps);
}

TEST(TrainBc, ZeroWeightsLeaveParametersUntouched) {
  DemoDataset ds = one_demo_dataset();
  RngStream init(9);
  MdnPolicy p0 = make_mdn_policy(3, 5, init);
  TrainRun run;
  run.steps = 50;
  run.batch = 8;
  TrainResult res = train_bc(ds, run, 1, std::vector<double>(ds.trajectories.size(), 0.0), &p0);
  std::vector<unsigned char> before, after;
  append_param_bytes(p0.net, before);
  append_param_bytes(res.checkpoints.back().net, after);
  EXPECT_EQ(before, after);
}

TEST(TrainBc, EmptyDatasetThrows) {
  DemoDataset empty;
  EXPECT_THROW(train_bc(empty, TrainRun{}, 1), ContractError);
}

TEST(TrainBc, FewerThanTwoCheckpointsRejected) {
  DemoDataset ds = one_demo_dataset();
  TrainRun run;
  run.steps = 10;
  run.checkpoints = 1;
  EXPECT_THROW(train_bc(ds, run, 1), ConfigError);
}

TEST(TrainBc, CheckpointScheduleIsExact) {
  DemoDataset ds = one_demo_dataset();
  TrainRun run;
  run.steps = 20;
  run.batch = 4;
  run.checkpoints = 4;
  TrainResult res = train_bc(ds, run, 3);
  EXPECT_EQ(res.checkpoint_steps, (std::vector<int>{5, 10, 15, 20}));
}

TEST(TrainBc, DeterministicParameterBytes) {
  EnvConfig cfg;
  DemoDataset ds = build_mixture({{StrategyTag::WideA, 3}, {StrategyTag::NarrowB, 3}}, cfg, 2);
  TrainRun run;
  run.steps = 300;
  run.batch = 16;
  auto bytes = [&](std::uint64_t seed) {
    TrainResult r = train_bc(ds, run, seed);
    std::vector<unsigned char> b;
    for (const auto& c : r.checkpoints) append_param_bytes(c.net, b);
    return b;
  };
  EXPECT_EQ(bytes(42), bytes(42));
  EXPECT_NE(bytes(42), bytes(43));
}

TEST(CollectRollouts, FixedSeedReproducesTrajectory) {
  EnvConfig cfg;
  RngStream init(12);
  MdnPolicy p = make_mdn_policy(3, 5, init);
  RolloutSet a = collect_rollouts(p, cfg, 1, 123, 2);
  RolloutSet b = collect_rollouts(p, cfg, 1, 123, 2);
  ASSERT_EQ(a.trajectories.size(), 1u);
  EXPECT_EQ(trajectory_to_jsonl_line(a.trajectories[0]), trajectory_to_jsonl_line(b.trajectories[0]));
}

TEST(CollectRollouts, EpisodeSeedsAreUnique) {
  EnvConfig cfg;
  RngStream init(13);
  MdnPolicy p = make_mdn_policy(3, 5, init);
  RolloutSet set = collect_rollouts(p, cfg, 50, 9, 1);
  EXPECT_EQ(set.trajectories.size(), 50u);
  std::set<std::uint64_t> seeds;
  for (const auto& t : set.trajectories) seeds.insert(t.seed);
  EXPECT_EQ(seeds.size(), 50u);
  set.validate(cfg.max_steps);
}

TEST(EvaluatePolicy, WilsonZeroSuccesses) {
  auto stats = success_stats(std::vector<double>(30, 0.0));
  auto [lo, hi] = oracles::wilson_roots(0.0, 30.0, kZ90);
  EXPECT_DOUBLE_EQ(stats.p_hat, 0.0);
  EXPECT_NEAR(stats.lo, lo, 1e-10);
  EXPECT_NEAR(stats.hi, hi, 1e-10);
  EXPECT_DOUBLE_EQ(stats.lo, 0.0);
  EXPECT_NEAR(stats.hi, 0.083, 5e-4);
}

TEST(EvaluatePolicy, WilsonAllSuccesses) {
  auto stats = success_stats(std::vector<double>(25, 1.0));
  EXPECT_DOUBLE_EQ(stats.hi, 1.0);
  EXPECT_LT(stats.lo, 1.0);
}

TEST(EvaluatePolicy, WilsonMatchesIndependentFormula) {
  std::vector<double> outcomes(30, 0.0);
  for (int i = 0; i < 24; ++i) outcomes[i] = 1.0;
  auto stats = success_stats(outcomes);
  auto [lo, hi] = oracles::wilson_roots(24.0, 30.0, kZ90);
  EXPECT_NEAR(stats.lo, lo, 1e-10);
  EXPECT_NEAR(stats.hi, hi, 1e-10);
}

TEST(EvaluatePolicy, FractionalOutcomesUseNormalInterval) {
  auto stats = success_stats({0.2, 0.4, 0.6, 0.8});
  EXPECT_TRUE(stats.fractional);
  EXPECT_DOUBLE_EQ(stats.p_hat, 0.5);
  EXPECT_LT(stats.lo, 0.5);
  EXPECT_GT(stats.hi, 0.5);
}

TEST(EvaluatePolicy, RunsAndIsDeterministic) {
  EnvConfig cfg;
  RngStream init(77);
  MdnPolicy p = make_mdn_policy(3, 5, init);
  SuccessStats a = evaluate_policy(p, cfg, 32, 5);
  SuccessStats b = evaluate_policy(p, cfg, 32, 5);
  EXPECT_EQ(a.successes, b.successes);
  EXPECT_EQ(a.n, 32);
}

TEST(Checkpoint, RoundtripIsBitExact) {
  RngStream init(31);
  MdnPolicy p = make_mdn_policy(3, 5, init);
  const std::string blob = checkpoint_bytes(p);
  MdnPolicy q = checkpoint_from_bytes(blob);
  EXPECT_EQ(checkpoint_bytes(q), blob);
  EXPECT_EQ(q.components, p.components);
  EXPECT_EQ(q.input_dim, p.input_dim);

  const std::string path = std::string(::testing::TempDir()) + "/ckpt.bin";
  save_checkpoint(p, path);
  MdnPolicy r = load_checkpoint(path);
  EXPECT_EQ(checkpoint_bytes(r), blob);
}

TEST(Checkpoint, CorruptBlobRejected) {
  EXPECT_THROW(checkpoint_from_bytes("nonsense"), ParseError);
}

TEST(Route, ClassifiesCrossingHeight) {
  EnvConfig cfg;
  std::vector<Observation> narrow{{-0.05, 0.0, 0.1}, {0.05, 0.01, 0.2}};
  std::vector<Observation> wide{{-0.05, 0.8, 0.1}, {0.05, 0.82, 0.2}};
  std::vector<Observation> none{{-0.5, 0.0, 0.1}, {-0.4, 0.0, 0.2}};
  EXPECT_EQ(classify_route(cfg, narrow), Route::Narrow);
  EXPECT_EQ(classify_route(cfg, wide), Route::Wide);
  EXPECT_EQ(classify_route(cfg, none), Route::None);
}
