#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "demoscore/data.hpp"
#include "demoscore/jsonl.hpp"

using namespace demoscore;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string(::testing::TempDir()) + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Trajectory tiny_demo(const std::string& id, StrategyTag tag) {
  Trajectory t;
  t.id = id;
  t.states = {{-0.8, 0.1, 0.0}, {-0.75, 0.05, 1.0 / 150.0}};
  t.actions = {{0.05, -0.05}, {0.05, -0.05}};
  t.outcome = 1.0;
  t.source.kind = TrajectorySource::Kind::Demo;
  t.source.tag = tag;
  t.seed = 42;
  return t;
}

}  // namespace

TEST(Jsonl, EmptyDatasetRoundtrips) {
  EnvConfig cfg;
  const std::string path = tmp_path("empty.jsonl");
  DemoDataset ds;
  const std::size_t bytes = save_jsonl(ds, cfg, path);
  EXPECT_GT(bytes, 0u);
  LoadedJsonl back = load_jsonl(path);
  EXPECT_TRUE(back.trajectories.empty());
  EXPECT_DOUBLE_EQ(back.env.narrow_gap_half_width, cfg.narrow_gap_half_width);
  // header-only: exactly one line
  const std::string text = slurp(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

TEST(Jsonl, SingleTrajectoryBitExactFloats) {
  EnvConfig cfg;
  Trajectory t = tiny_demo("demo_WideA_0", StrategyTag::WideA);
  t.states[0].x = 0.1;  // no exact binary representation
  t.states[0].y = -1.0 / 3.0;
  const std::string path = tmp_path("one.jsonl");
  save_jsonl(std::vector<Trajectory>{t}, cfg, path);
  LoadedJsonl back = load_jsonl(path);
  ASSERT_EQ(back.trajectories.size(), 1u);
  const Trajectory& r = back.trajectories[0];
  EXPECT_EQ(r.id, t.id);
  EXPECT_EQ(r.seed, t.seed);
  EXPECT_EQ(std::memcmp(&r.states[0].x, &t.states[0].x, sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(&r.states[0].y, &t.states[0].y, sizeof(double)), 0);
  EXPECT_EQ(r.actions[1].dy, t.actions[1].dy);
}

TEST(Jsonl, DoubleRoundtripIsByteIdentical) {
  EnvConfig cfg;
  DemoDataset ds = build_mixture({{StrategyTag::WideA, 20}, {StrategyTag::NarrowB, 20}}, cfg, 5);
  const std::string p1 = tmp_path("round1.jsonl");
  const std::string p2 = tmp_path("round2.jsonl");
  save_jsonl(ds, cfg, p1);
  LoadedJsonl back = load_jsonl(p1);
  save_jsonl(back.trajectories, back.env, p2);
  EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST(Jsonl, MalformedLineReportsLineNumber) {
  const std::string path = tmp_path("bad.jsonl");
  {
    std::ofstream f(path);
    f << "{\"schema_version\": 1, \"env_config\": {}}\n";
    f << "{not json\n";
  }
  try {
    load_jsonl(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 2u);
  }
}

TEST(Jsonl, InvariantViolationOnLoadIsValidationError) {
  const std::string path = tmp_path("badlen.jsonl");
  {
    std::ofstream f(path);
    f << "{\"schema_version\": 1, \"env_config\": {}}\n";
    f << "{\"id\": \"x\", \"source\": {\"kind\": \"demo\", \"tag\": \"WideA\"}, \"seed\": 1, "
         "\"outcome\": 1, \"states\": [[0,0,0]], \"actions\": []}\n";
  }
  EXPECT_THROW(load_jsonl(path), ValidationError);
}

TEST(Jsonl, DuplicateIdsRejected) {
  EnvConfig cfg;
  auto t = tiny_demo("same", StrategyTag::WideA);
  const std::string path = tmp_path("dup.jsonl");
  save_jsonl(std::vector<Trajectory>{t, t}, cfg, path);
  EXPECT_THROW(load_jsonl(path), ValidationError);
}

TEST(BuildMixture, CountsPerTagAreExact) {
  EnvConfig cfg;
  DemoDataset ds = build_mixture({{StrategyTag::WideA, 50}, {StrategyTag::NarrowB, 50}}, cfg, 1);
  EXPECT_EQ(ds.trajectories.size(), 100u);
  auto stats = dataset_stats(ds.trajectories);
  EXPECT_EQ(stats.counts["demo:WideA"], 50u);
  EXPECT_EQ(stats.counts["demo:NarrowB"], 50u);
  ds.validate(cfg.max_steps);
}

TEST(BuildMixture, LopsidedHistogram) {
  EnvConfig cfg;
  DemoDataset ds = build_mixture({{StrategyTag::WideA, 8}, {StrategyTag::NarrowB, 2}}, cfg, 3);
  auto stats = dataset_stats(ds.trajectories);
  EXPECT_EQ(stats.counts["demo:WideA"], 8u);
  EXPECT_EQ(stats.counts["demo:NarrowB"], 2u);
}

TEST(BuildMixture, EmptySpecGivesEmptyDataset) {
  EnvConfig cfg;
  DemoDataset ds = build_mixture({{StrategyTag::WideA, 0}, {StrategyTag::NarrowB, 0}}, cfg, 3);
  EXPECT_TRUE(ds.trajectories.empty());
}

TEST(BuildMixture, DeterministicAcrossRuns) {
  EnvConfig cfg;
  DemoDataset a = build_mixture({{StrategyTag::WideA, 5}, {StrategyTag::NarrowB, 5}}, cfg, 77);
  DemoDataset b = build_mixture({{StrategyTag::WideA, 5}, {StrategyTag::NarrowB, 5}}, cfg, 77);
  ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    EXPECT_EQ(a.trajectories[i].id, b.trajectories[i].id);
    EXPECT_EQ(trajectory_to_jsonl_line(a.trajectories[i]),
              trajectory_to_jsonl_line(b.trajectories[i]));
  }
  DemoDataset c = build_mixture({{StrategyTag::WideA, 5}, {StrategyTag::NarrowB, 5}}, cfg, 78);
  EXPECT_NE(trajectory_to_jsonl_line(a.trajectories[0]), trajectory_to_jsonl_line(c.trajectories[0]));
}

TEST(DatasetStats, OutcomeMeanAndQuantiles) {
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 4; ++i) {
    Trajectory t = tiny_demo("t" + std::to_string(i), StrategyTag::WideA);
    t.source.kind = TrajectorySource::Kind::Rollout;
    t.source.checkpoint = 2;
    t.outcome = (i % 2 == 0) ? 1.0 : 0.0;
    trajs.push_back(t);
  }
  auto stats = dataset_stats(trajs);
  EXPECT_DOUBLE_EQ(stats.outcome_mean, 0.5);
  EXPECT_EQ(stats.counts["rollout:2"], 4u);
  EXPECT_EQ(stats.len_min, 2u);
  EXPECT_EQ(stats.len_max, 2u);
}

TEST(DatasetStats, AllSuccessDemoSetMeansOne) {
  EnvConfig cfg;
  DemoDataset ds = build_mixture({{StrategyTag::WideA, 10}}, cfg, 9);
  EXPECT_DOUBLE_EQ(dataset_stats(ds.trajectories).outcome_mean, 1.0);
}

TEST(DemoDataset, RejectsFailedDemo) {
  DemoDataset ds;
  Trajectory t = tiny_demo("bad", StrategyTag::WideA);
  t.outcome = 0.0;
  ds.trajectories.push_back(t);
  EXPECT_THROW(ds.validate(), ValidationError);
}
