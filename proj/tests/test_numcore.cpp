#include <gtest/gtest.h>

#include <cmath>

#include "demoscore/adamw.hpp"
#include "demoscore/mlp.hpp"
#include "demoscore/rng.hpp"
#include "oracles.hpp"

using namespace demoscore;

TEST(Rng, SameSeedSameSequence) {
  RngStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  RngStream c(42), d(43);
  EXPECT_NE(c.next_u64(), d.next_u64());
}

TEST(Rng, CounterIsResumable) {
  RngStream a(7);
  (void)a.uniform_vec(17);
  RngStream b(7);
  b.counter = a.counter;
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformMoments) {
  RngStream rng(123);
  auto u = rng.uniform_vec(100000);
  double mean = 0.0;
  for (double v : u) {
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    mean += v;
  }
  mean /= static_cast<double>(u.size());
  EXPECT_NEAR(mean, 0.5, 0.01);
}

TEST(Rng, GaussianMoments) {
  RngStream rng(321);
  auto g = rng.gaussian_vec(100000);
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  var /= static_cast<double>(g.size());
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(Rng, SubstreamsDivergeByTag) {
  RngStream root(5);
  RngStream a = root.substream("rollout");
  RngStream b = root.substream("train");
  RngStream c = root.substream("rollout", 3);
  RngStream d = root.substream("rollout", 4);
  EXPECT_NE(a.next_u64(), b.next_u64());
  EXPECT_NE(c.next_u64(), d.next_u64());
  // Derivation is pure: same tag twice gives the same stream.
  RngStream e = root.substream("rollout");
  RngStream f = root.substream("rollout");
  EXPECT_EQ(e.next_u64(), f.next_u64());
}

TEST(MlpForward, ZeroNetSigmoidGivesHalf) {
  Mlp net;
  net.head = Head::Sigmoid;
  net.layers.push_back({Mat(1, 2), {0.0}});
  auto out = mlp_forward(net, std::vector<double>{0.3, -0.8}, 0.0, nullptr, false);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
}

TEST(MlpForward, SingleLinearLayer) {
  Mlp net;
  net.layers.push_back({Mat(1, 1), {1.0}});
  net.layers[0].w(0, 0) = 2.0;
  auto out = mlp_forward(net, std::vector<double>{3.0}, 0.0, nullptr, false);
  EXPECT_DOUBLE_EQ(out[0], 7.0);
}

TEST(MlpForward, MatchesDirectArithmetic) {
  RngStream rng(99);
  Mlp net = init_mlp({2, 8, 8, 1}, Head::Sigmoid, rng);
  std::vector<double> input{0.1, 0.2};
  auto got = mlp_forward(net, input, 0.0, nullptr, false);
  auto want = oracles::direct_forward(net, input);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
}

TEST(MlpForward, DimensionMismatchNamesLayer) {
  RngStream rng(1);
  Mlp net = init_mlp({3, 4, 2}, Head::Linear, rng);
  try {
    mlp_forward(net, std::vector<double>{1.0, 2.0}, 0.0, nullptr, false);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(MlpForward, EvalModeIgnoresDropout) {
  RngStream rng(7);
  Mlp net = init_mlp({3, 16, 2}, Head::Linear, rng);
  std::vector<double> in{0.5, -0.25, 1.0};
  RngStream r1(1);
  auto a = mlp_forward(net, in, 0.4, &r1, false);
  auto b = mlp_forward(net, in, 0.0, nullptr, false);
  EXPECT_EQ(a, b);
  EXPECT_EQ(r1.counter, 0u);  // eval mode must not consume randomness
}

TEST(MlpForward, DropoutExpectationMatchesEval) {
  // Single hidden layer + linear head: inverted dropout is unbiased, so the
  // mask average must approach the eval output.
  Mlp net;
  net.layers.push_back({Mat(32, 3), std::vector<double>(32, 0.0)});
  net.layers.push_back({Mat(1, 32), {0.0}});
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 3; ++c) net.layers[0].w(r, c) = 0.3 + 0.01 * static_cast<double>(r);
    net.layers[0].b[r] = -0.5 + 0.03 * static_cast<double>(r);
    net.layers[1].w(0, r) = 0.7;
  }
  std::vector<double> in{0.4, -0.2, 0.9};
  const double eval_out = mlp_forward(net, in, 0.0, nullptr, false)[0];
  RngStream rng(2024);
  double mean = 0.0;
  const int masks = 10000;
  for (int i = 0; i < masks; ++i) mean += mlp_forward(net, in, 0.3, &rng, true)[0];
  mean /= masks;
  EXPECT_LE(std::fabs(mean - eval_out) / std::fabs(eval_out), 0.02);
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradients) {
  RngStream rng(11);
  Mlp net = init_mlp({4, 8, 3}, Head::Linear, rng);
  ForwardCache cache;
  mlp_forward(net, std::vector<double>{1, 2, 3, 4}, 0.0, nullptr, false, &cache);
  auto g = mlp_backward(net, cache, std::vector<double>{0, 0, 0});
  for (const auto& layer : g) {
    for (double v : layer.w.data) EXPECT_EQ(v, 0.0);
    for (double v : layer.b) EXPECT_EQ(v, 0.0);
  }
}

TEST(MlpBackward, LinearNeuronClosedForm) {
  // Squared error 0.5*(pred-target)^2 on w*x+b: dL/dw = (pred-target)*x.
  Mlp net;
  net.layers.push_back({Mat(1, 1), {0.5}});
  net.layers[0].w(0, 0) = 1.5;
  const double x = 2.0, target = 1.0;
  ForwardCache cache;
  const double pred = mlp_forward(net, std::vector<double>{x}, 0.0, nullptr, false, &cache)[0];
  auto g = mlp_backward(net, cache, std::vector<double>{pred - target});
  EXPECT_DOUBLE_EQ(g[0].w(0, 0), (pred - target) * x);
  EXPECT_DOUBLE_EQ(g[0].b[0], pred - target);
}

TEST(MlpBackward, MatchesFiniteDifferences) {
  RngStream rng(314);
  for (int trial = 0; trial < 25; ++trial) {
    RngStream tr = rng.substream("trial", trial);
    const std::size_t in_dim = 1 + tr.next_u64() % 5;
    const std::size_t hid = 2 + tr.next_u64() % 7;
    const Head head = (tr.next_u64() % 2) ? Head::Sigmoid : Head::Linear;
    Mlp net = init_mlp({in_dim, hid, hid, 2}, head, tr);
    std::vector<double> input(in_dim), coeff(2);
    for (auto& v : input) v = tr.gaussian();
    for (auto& v : coeff) v = tr.gaussian();

    auto loss = [&]() {
      auto out = mlp_forward(net, input, 0.0, nullptr, false);
      return coeff[0] * out[0] + coeff[1] * out[1];
    };
    ForwardCache cache;
    mlp_forward(net, input, 0.0, nullptr, false, &cache);
    auto analytic = mlp_backward(net, cache, coeff);
    auto numeric = oracles::fd_gradients(net, loss);
    EXPECT_LE(oracles::max_rel_err(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(MlpBackward, PreactPathMatchesBceFiniteDifferences) {
  RngStream rng(2718);
  for (int trial = 0; trial < 10; ++trial) {
    RngStream tr = rng.substream("bce", trial);
    Mlp net = init_mlp({3, 8, 8, 1}, Head::Sigmoid, tr);
    std::vector<double> input{tr.gaussian(), tr.gaussian(), tr.gaussian()};
    const double y = (trial % 2) ? 1.0 : 0.0;
    auto loss = [&]() {
      const double q = mlp_forward(net, input, 0.0, nullptr, false)[0];
      return -y * std::log(q) - (1.0 - y) * std::log(1.0 - q);
    };
    ForwardCache cache;
    const double q = mlp_forward(net, input, 0.0, nullptr, false, &cache)[0];
    auto analytic = mlp_backward_preact(net, cache, std::vector<double>{q - y});
    auto numeric = oracles::fd_gradients(net, loss);
    EXPECT_LE(oracles::max_rel_err(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(MlpBackward, DropoutTrainModeGradientsMatchFd) {
  // With a frozen mask (same rng state each call) the dropped net is an
  // ordinary deterministic function and FD must agree.
  RngStream rng(555);
  Mlp net = init_mlp({3, 6, 6, 1}, Head::Linear, rng);
  std::vector<double> input{0.2, -0.4, 0.6};
  auto loss = [&]() {
    RngStream mask_rng(77);
    return mlp_forward(net, input, 0.3, &mask_rng, true)[0];
  };
  ForwardCache cache;
  RngStream mask_rng(77);
  mlp_forward(net, input, 0.3, &mask_rng, true, &cache);
  auto analytic = mlp_backward(net, cache, std::vector<double>{1.0});
  auto numeric = oracles::fd_gradients(net, loss);
  EXPECT_LE(oracles::max_rel_err(analytic, numeric), 1e-4);
}

TEST(AdamW, ZeroGradZeroDecayLeavesParamsAlone) {
  RngStream rng(8);
  Mlp net = init_mlp({2, 4, 1}, Head::Linear, rng);
  Mlp before = net;
  AdamWState state(net, {});
  auto zeros = zero_gradients(net);
  for (int i = 0; i < 5; ++i) adamw_step(net, zeros, state);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    EXPECT_EQ(net.layers[l].w.data, before.layers[l].w.data);
    EXPECT_EQ(net.layers[l].b, before.layers[l].b);
  }
  EXPECT_EQ(state.step, 5u);
}

TEST(AdamW, FirstStepIsSignedLearningRate) {
  Mlp net;
  net.layers.push_back({Mat(1, 2), {0.0}});
  net.layers[0].w(0, 0) = 1.0;
  net.layers[0].w(0, 1) = -1.0;
  Gradients g = zero_gradients(net);
  g[0].w(0, 0) = 0.37;
  g[0].w(0, 1) = -2.4;
  g[0].b[0] = 1e-3;
  AdamWConfig cfg;
  cfg.lr = 0.01;
  AdamWState state(net, cfg);
  adamw_step(net, g, state);
  EXPECT_NEAR(net.layers[0].w(0, 0), 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(net.layers[0].w(0, 1), -1.0 + 0.01, 1e-6);
  EXPECT_NEAR(net.layers[0].b[0], -0.01, 1e-4);
}

TEST(AdamW, MatchesScalarReferenceOnQuadratic) {
  // Minimize 0.5*(x-3)^2 from x=0; gradient is x-3.
  Mlp net;
  net.layers.push_back({Mat(1, 1), std::vector<double>(1, 0.0)});
  AdamWConfig cfg;
  cfg.lr = 0.1;
  AdamWState state(net, cfg);
  oracles::ScalarAdam ref(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, 0.0);
  double x_ref = 0.0;
  for (int i = 0; i < 100; ++i) {
    Gradients g = zero_gradients(net);
    g[0].w(0, 0) = net.layers[0].w(0, 0) - 3.0;
    const double g_ref = x_ref - 3.0;
    adamw_step(net, g, state);
    x_ref = ref.step(x_ref, g_ref);
    ASSERT_NEAR(net.layers[0].w(0, 0), x_ref, 1e-12);
  }
  EXPECT_LT(std::fabs(net.layers[0].w(0, 0) - 3.0) / 3.0, 1e-2);
}

TEST(AdamW, DecaySkipsBiases) {
  Mlp net;
  net.layers.push_back({Mat(1, 1), {2.0}});
  net.layers[0].w(0, 0) = 2.0;
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamWState state(net, cfg);
  adamw_step(net, zero_gradients(net), state);
  EXPECT_NEAR(net.layers[0].w(0, 0), 2.0 * (1.0 - 0.1 * 0.5), 1e-12);
  EXPECT_DOUBLE_EQ(net.layers[0].b[0], 2.0);
}

TEST(AdamW, NonFiniteGradientNamesLayer) {
  RngStream rng(3);
  Mlp net = init_mlp({2, 3, 1}, Head::Linear, rng);
  Gradients g = zero_gradients(net);
  g[1].w(0, 0) = std::nan("");
  AdamWState state(net, {});
  try {
    adamw_step(net, g, state);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
}

TEST(Determinism, InitAndTrainStepsAreBitIdentical) {
  auto build = []() {
    RngStream rng(909);
    Mlp net = init_mlp({3, 16, 16, 4}, Head::Linear, rng);
    AdamWState st(net, {});
    RngStream data = rng.substream("data");
    for (int step = 0; step < 50; ++step) {
      std::vector<double> in{data.gaussian(), data.gaussian(), data.gaussian()};
      ForwardCache cache;
      auto out = mlp_forward(net, in, 0.0, nullptr, false, &cache);
      auto g = mlp_backward(net, cache, std::vector<double>(out.size(), 0.25));
      adamw_step(net, g, st);
    }
    std::vector<unsigned char> bytes;
    append_param_bytes(net, bytes);
    return bytes;
  };
  EXPECT_EQ(build(), build());
}
