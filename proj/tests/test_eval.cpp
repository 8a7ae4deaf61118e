// Copyright 2026 The fovlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "fovlab/errors.hpp"
#include "fovlab/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fovlab::eval {
namespace {

using testing::random_bits;
using testing::random_values;

std::vector<std::uint8_t> bits_of(unsigned v, int n) {
  std::vector<std::uint8_t> b(n);
  for (int i = 0; i < n; ++i) b[i] = (v >> i) & 1u;
  return b;
}

void expect_metrics(const Metrics& got, const oracle::Scores& want) {
  EXPECT_NEAR(got.precision, want.precision, 1e-12);
  EXPECT_NEAR(got.recall, want.recall, 1e-12);
  EXPECT_NEAR(got.accuracy, want.accuracy, 1e-12);
  EXPECT_NEAR(got.f1, want.f1, 1e-12);
}

// ---- metrics -----------------------------------------------------------------

TEST(Metrics, ExhaustiveSmallInstances) {
  for (int n = 1; n <= 8; ++n) {
    for (unsigned p = 0; p < (1u << n); ++p) {
      for (unsigned t = 0; t < (1u << n); ++t) {
        const auto pred = bits_of(p, n), truth = bits_of(t, n);
        expect_metrics(metrics(confusion(pred, truth)), oracle::metrics(pred, truth));
      }
    }
  }
}

TEST(Metrics, HandValuesAndZeroConvention) {
  const ConfusionCounts c{3, 1, 4, 2};
  const Metrics m = metrics(c);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(m.f1, 2 * 0.75 * 0.6 / 1.35);
  const Metrics z = metrics(ConfusionCounts{0, 0, 5, 0});
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
  EXPECT_EQ(z.accuracy, 1.0);
  EXPECT_EQ(metrics(ConfusionCounts{}).accuracy, 0.0);
}

TEST(Metrics, PredEqualsTruthIsPerfect) {
  const auto t = random_bits(500, 1);
  const Metrics m = metrics(confusion(t, t));
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Metrics, ShapeMismatchIsDataError) {
  EXPECT_THROW(confusion(FovMask(GridSpec{75, 8}), FovMask(GridSpec{75, 16})), DataError);
}

// ---- AUPRC -------------------------------------------------------------------

TEST(Auprc, ExhaustiveThreeLevelScores) {
  const double levels[3] = {0.1, 0.5, 0.9};
  for (int n = 1; n <= 6; ++n) {
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= 3;
    for (int s = 0; s < combos; ++s) {
      std::vector<double> scores(n);
      for (int i = 0, v = s; i < n; ++i, v /= 3) scores[i] = levels[v % 3];
      for (unsigned t = 1; t < (1u << n); ++t) {
        const auto labels = bits_of(t, n);
        EXPECT_NEAR(auprc(scores, labels), oracle::auprc(scores, labels), 1e-12);
      }
    }
  }
}

TEST(Auprc, RandomLargerInstances) {
  for (std::uint64_t k = 0; k < 200; ++k) {
    const std::size_t n = 13 + k % 90;
    auto scores = random_values(n, k);
    if (k % 2) {
      for (auto& s : scores) s = std::round(s * 4) / 4;  // force ties
    }
    auto labels = random_bits(n, k + 7);
    labels[0] = 1;
    EXPECT_NEAR(auprc(scores, labels), oracle::auprc(scores, labels), 1e-12);
  }
}

TEST(Auprc, ClosedFormCases) {
  const std::vector<std::uint8_t> labels = {1, 0, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.9, 0.1, 0.8, 0.2, 0.3}, labels), 1.0);
  // A constant score gives the prevalence.
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>(5, 0.4), labels), 0.4);
  // Worst ordering: positives last.
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.1, 0.9, 0.2, 0.8, 0.7}, labels),
                   0.5 * (1.0 / 4) + 0.5 * (2.0 / 5));
  EXPECT_THROW(auprc(std::vector<double>{0.5}, std::vector<std::uint8_t>{0}), DataError);
}

TEST(Accumulator, PoolsCountsAndScores) {
  Accumulator acc;
  const auto p1 = random_bits(50, 1), t1 = random_bits(50, 2);
  const auto p2 = random_bits(30, 3), t2 = random_bits(30, 4);
  const auto s1 = random_values(50, 5), s2 = random_values(30, 6);
  acc.add(p1, s1, t1);
  acc.add(p2, s2, t2);
  EXPECT_EQ(acc.frames(), 2u);
  std::vector<std::uint8_t> p(p1), t(t1);
  p.insert(p.end(), p2.begin(), p2.end());
  t.insert(t.end(), t2.begin(), t2.end());
  std::vector<double> s(s1);
  s.insert(s.end(), s2.begin(), s2.end());
  EXPECT_EQ(acc.counts(), confusion(p, t));
  EXPECT_NEAR(acc.auprc(), oracle::auprc(s, t), 1e-12);
  Accumulator empty;
  empty.add(std::vector<std::uint8_t>(4, 1), std::vector<double>(4, 1.0),
            std::vector<std::uint8_t>(4, 0));
  EXPECT_TRUE(std::isnan(empty.auprc()));
}

TEST(Records, OutputFiles) {
  testing::TempDir dir;
  Accumulator acc;
  acc.add(std::vector<std::uint8_t>{1, 0, 1}, std::vector<double>{1, 0, 1},
          std::vector<std::uint8_t>{1, 1, 0});
  nlohmann::ordered_json labels;
  labels["estimator"] = "rayq";
  labels["spoof_count"] = 25;
  const std::vector<MetricRecord> rows = {make_record(labels, acc)};
  write_jsonl(dir.path() / "m.jsonl", rows);
  write_csv(dir.path() / "m.csv", rows);
  write_long_csv(dir.path() / "m_long.csv", rows);
  std::ifstream j(dir.path() / "m.jsonl");
  std::string line;
  std::getline(j, line);
  const auto parsed = nlohmann::json::parse(line);
  EXPECT_EQ(parsed["estimator"], "rayq");
  EXPECT_DOUBLE_EQ(parsed["precision"].get<double>(), 0.5);
  std::ifstream c(dir.path() / "m.csv");
  std::getline(c, line);
  EXPECT_EQ(line.rfind("estimator,spoof_count,", 0), 0u) << line;
  std::ifstream l(dir.path() / "m_long.csv");
  int n = 0;
  while (std::getline(l, line)) ++n;
  EXPECT_GE(n, 5);
  EXPECT_NE(format_table(rows).find("rayq"), std::string::npos);
}

TEST(Timing, MedianAndP95) {
  std::vector<double> s;
  for (int i = 1; i <= 20; ++i) s.push_back(i * 0.01);
  const TimingStats t = summarize_timings(s);
  EXPECT_EQ(t.samples, 20u);
  EXPECT_NEAR(t.median_seconds, 0.105, 1e-12);
  EXPECT_NEAR(t.p95_seconds, 0.19, 1e-12);
  EXPECT_NEAR(t.median_hz, 1 / 0.105, 1e-9);
  EXPECT_THROW(summarize_timings({}), DataError);
}

// ---- estimators --------------------------------------------------------------

TEST(Estimators, ParseNamesAndTypos) {
  for (const char* n : {"rayq", "rayc", "concave", "mle", "mcd"}) {
    EXPECT_EQ(estimator_name(parse_estimator(n)), n);
  }
  EXPECT_THROW(parse_estimator("rayqq"), ConfigError);
  EXPECT_THROW(parse_estimator("MLE"), ConfigError);
  EXPECT_TRUE(is_classical(Estimator::kConcave));
  EXPECT_FALSE(is_classical(Estimator::kMcd));
}

TEST(Estimators, DegenerateInputGivesEmptyMask) {
  const GridSpec g{75, 32};
  for (auto e : {Estimator::kRayQ, Estimator::kRayC, Estimator::kConcave}) {
    EXPECT_EQ(estimate_classical(e, Points2{}, g, EstimatorParams{}).count(), 0u);
  }
}

TEST(Estimators, MaskContains) {
  const GridSpec g{75, 8};
  FovMask a(g), b(g);
  a.visible[3] = a.visible[4] = 1;
  b.visible[3] = 1;
  EXPECT_TRUE(mask_contains(a, b));
  EXPECT_FALSE(mask_contains(b, a));
}

// ---- cross-validation ----------------------------------------------------------

TEST(FoldSplit, PartitionsDeterministically) {
  for (std::size_t n : {5u, 17u, 100u}) {
    const auto f = fold_split(n, 5, 3);
    ASSERT_EQ(f.size(), 5u);
    std::set<std::size_t> all;
    std::size_t lo = n, hi = 0;
    for (const auto& fold : f) {
      all.insert(fold.begin(), fold.end());
      lo = std::min(lo, fold.size());
      hi = std::max(hi, fold.size());
    }
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);
    EXPECT_LE(hi - lo, 1u);
    EXPECT_EQ(fold_split(n, 5, 3), f);
  }
  EXPECT_NE(fold_split(100, 5, 3), fold_split(100, 5, 4));
  EXPECT_THROW(fold_split(3, 5, 0), DataError);
  EXPECT_THROW(fold_split(10, 1, 0), ConfigError);
}

TEST(CrossVal, StandardGridShape) {
  const auto grid = standard_grid(segnet::NetConfig{}, segnet::TrainConfig{});
  EXPECT_EQ(grid.size(), 36u);
  EXPECT_NO_THROW(validate_grid(grid));
  auto bad = grid;
  bad[0].train.learning_rate = 5e-3;
  EXPECT_THROW(validate_grid(bad), ConfigError);
}

TEST(CrossVal, FindsPlantedOptimum) {
  const auto grid = standard_grid(segnet::NetConfig{}, segnet::TrainConfig{});
  std::set<std::pair<std::size_t, int>> calls;
  const auto r = crossval_with(grid, 50, 5, 1,
                               [&](std::size_t c, int f, std::span<const std::size_t> tr,
                                   std::span<const std::size_t> va) {
                                 calls.insert({c, f});
                                 EXPECT_EQ(tr.size() + va.size(), 50u);
                                 const auto& k = grid[c];
                                 return std::abs(k.net.base_channels - 16) +
                                        std::abs(std::log10(k.train.learning_rate) + 3) +
                                        0.01 * f;
                               });
  EXPECT_EQ(calls.size(), 36u * 5);
  EXPECT_EQ(r.folds.size(), 36u * 5);
  const auto& best = r.candidates[r.best];
  EXPECT_EQ(best.net.base_channels, 16);
  EXPECT_DOUBLE_EQ(best.train.learning_rate, 1e-3);
  // All dropout rates tie; the first in grid order is kept.
  EXPECT_DOUBLE_EQ(best.net.dropout_rate, 0.05);
  EXPECT_EQ(fold_table(r).size(), r.folds.size());
}

TEST(CrossVal, TiesPreferFewerParameters) {
  std::vector<CvCandidate> c(2);
  c[0].net.base_channels = 32;
  c[1].net.base_channels = 8;
  const auto r = crossval_with(c, 10, 2, 0, [](auto, auto, auto, auto) { return 1.0; });
  EXPECT_EQ(r.best, 1u);
}

TEST(CrossVal, RealTrainingOnTinyData) {
  std::vector<segnet::Sample> data;
  for (int i = 0; i < 6; ++i) {
    const auto v = random_values(256, i);
    segnet::Sample s;
    s.input.assign(v.begin(), v.end());
    for (double x : v) s.target.push_back(x > 0.5);
    data.push_back(s);
  }
  std::vector<CvCandidate> c(2);
  for (auto& k : c) {
    k.net = segnet::NetConfig{3, 4, 0.05, 16};
    k.train = segnet::TrainConfig{1e-2, 3, 2, 3, 0};
  }
  c[1].train.learning_rate = 1e-4;
  const auto a = crossval(data, c, 3, 5);
  const auto b = crossval(data, c, 3, 5);
  EXPECT_EQ(a.mean_val_loss, b.mean_val_loss);
  EXPECT_EQ(a.folds.size(), 6u);
}

// ---- transfer matrix -------------------------------------------------------------

TestSet constant_set(const std::string& fam, const std::string& var, double prevalence) {
  TestSet t{fam, var, {}};
  const GridSpec g{75, 16};
  for (int i = 0; i < 3; ++i) {
    EvalFrame f{BevImage(g), FovMask(g)};
    const auto bits = random_bits(g.cells(), i + 10, prevalence);
    f.truth.visible.assign(bits.begin(), bits.end());
    t.frames.push_back(std::move(f));
  }
  return t;
}

TEST(Transfer, RowOrderAndConstantModel) {
  std::map<ModelKey, segnet::Network> models;
  const segnet::NetConfig cfg{3, 4, 0.1, 16};
  models.emplace(ModelKey{"a", "benign"}, segnet::Network::zeros(cfg));
  models.emplace(ModelKey{"b", "benign"}, segnet::Network::zeros(cfg));
  const std::vector<TestSet> tests = {constant_set("a", "benign", 0.3),
                                      constant_set("b", "benign", 0.6)};
  InferenceOptions opt;
  opt.threshold = 0.4;  // the zero network predicts 0.5 everywhere
  opt.mcd_passes = 3;
  const auto rows = transfer_matrix(models, {"a", "b"}, {"benign"}, tests, opt);
  ASSERT_EQ(rows.size(), 8u);
  const char* order[8][3] = {{"a", "a", "mle"}, {"a", "a", "mcd"}, {"a", "b", "mle"},
                             {"a", "b", "mcd"}, {"b", "a", "mle"}, {"b", "a", "mcd"},
                             {"b", "b", "mle"}, {"b", "b", "mcd"}};
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(rows[i].labels["train"], order[i][0]);
    EXPECT_EQ(rows[i].labels["test"], order[i][1]);
    EXPECT_EQ(rows[i].labels["model"], order[i][2]);
    EXPECT_EQ(rows[i].metrics.recall, 1.0);
    EXPECT_EQ(rows[i].frames, 3u);
  }
  // A constant map's AUPRC is the prevalence of the pooled test set.
  Accumulator a;
  for (const auto& f : tests[0].frames) a.add(f.truth, f.truth);
  const double prevalence =
      static_cast<double>(a.counts().tp) / static_cast<double>(a.counts().total());
  EXPECT_NEAR(rows[0].auprc, prevalence, 1e-12);
  EXPECT_NEAR(rows[0].metrics.precision, prevalence, 1e-12);
}

TEST(Transfer, MissingModelNamesTheCell) {
  std::map<ModelKey, segnet::Network> models;
  models.emplace(ModelKey{"a", "benign"}, segnet::Network::zeros(segnet::NetConfig{3, 4, 0.1, 16}));
  const std::vector<TestSet> tests = {constant_set("a", "benign", 0.3),
                                      constant_set("a", "adv", 0.3)};
  try {
    transfer_matrix(models, {"a"}, {"benign", "adv"}, tests, InferenceOptions{});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("adv"), std::string::npos) << e.what();
  }
}

// ---- security sweep --------------------------------------------------------------

std::vector<SweepFrame> sweep_frames(int n) {
  std::vector<SweepFrame> out;
  for (int i = 0; i < n; ++i) {
    SweepFrame f;
    f.id = "f" + std::to_string(i);
    f.scene = generate_scene(SceneFamily::preset("outdoor-sparse"), 100 + i);
    f.cloud = simulate_lidar(f.scene, LidarModel{}, i);
    out.push_back(std::move(f));
  }
  return out;
}

SweepOptions small_sweep() {
  SweepOptions o;
  o.spoof_counts = {0, 50, 150};
  o.grid = GridSpec{75, 128};
  o.net_grid = GridSpec{75, 16};
  o.params.n_bins = 720;
  o.seed = 4;
  return o;
}

TEST(Sweep, CountZeroEqualsBenign) {
  const auto frames = sweep_frames(3);
  const auto opt = small_sweep();
  const auto rows = security_sweep(frames, {Estimator::kRayQ}, opt, {});
  ASSERT_EQ(rows.size(), 3u);
  Accumulator acc;
  for (const auto& f : frames) {
    const FovMask m = estimate_classical(Estimator::kRayQ, estimator_points(f.cloud, opt.filter),
                                         opt.grid, opt.params);
    acc.add(m, ground_truth_fov(f.scene, opt.lidar, opt.grid));
  }
  EXPECT_EQ(rows[0].labels["spoof_count"], 0);
  EXPECT_EQ(rows[0].metrics.precision, acc.metrics().precision);
  EXPECT_EQ(rows[0].metrics.recall, acc.metrics().recall);
  EXPECT_LT(rows[2].metrics.precision, rows[0].metrics.precision);
}

TEST(Sweep, SpoofSetsAreNestedAndRayqMasksGrow) {
  const auto frames = sweep_frames(3);
  const auto opt = small_sweep();
  for (const auto& f : frames) {
    std::optional<FovMask> prev;
    std::optional<PointCloud> prev_cloud;
    for (int c : {0, 25, 50, 100, 150}) {
      const PointCloud cloud = sweep_cloud(f, opt, c);
      ASSERT_EQ(cloud.points.size(), f.cloud.points.size() + c);
      if (prev_cloud) {
        for (std::size_t i = 0; i < prev_cloud->points.size(); ++i) {
          ASSERT_EQ(cloud.points[i], prev_cloud->points[i]);
        }
      }
      const FovMask m = estimate_classical(
          Estimator::kRayQ, estimator_points(cloud, opt.filter), opt.grid, opt.params);
      if (prev) EXPECT_TRUE(mask_contains(m, *prev)) << f.id << " count " << c;
      prev = m;
      prev_cloud = cloud;
    }
  }
}

TEST(Sweep, Validation) {
  const auto frames = sweep_frames(1);
  auto opt = small_sweep();
  EXPECT_THROW(security_sweep(frames, {Estimator::kMle}, opt, {}), ConfigError);
  opt.spoof_counts = {0, 200};
  EXPECT_THROW(security_sweep(frames, {Estimator::kRayQ}, opt, {}), ConfigError);
}

TEST(Sweep, LearnedEstimatorsRun) {
  const auto frames = sweep_frames(2);
  auto opt = small_sweep();
  opt.params.mcd_passes = 2;
  const segnet::Network net(segnet::NetConfig{3, 4, 0.1, 16}, 1);
  const auto rows = security_sweep(frames, {Estimator::kMle, Estimator::kMcd}, opt,
                                   SweepModels{&net, &net});
  EXPECT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[1].labels["estimator"], "mcd");
}

// ---- parametric study -----------------------------------------------------------

TEST(Parametric, InvalidCombinationsAreReported) {
  ParametricOptions opt;
  opt.widths = {4, 8};
  opt.depths = {3, 5};
  opt.resolutions = {16};
  opt.train_models = false;
  opt.timing_frames = 2;
  int calls = 0;
  const auto rows = parametric_study(opt, [&](int res) {
    ++calls;
    StudyData d;
    segnet::Sample s;
    const auto v = random_values(res * res, 1);
    s.input.assign(v.begin(), v.end());
    s.target = random_bits(res * res, 2);
    d.test = {s, s};
    return d;
  });
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(calls, 1);
  for (const auto& r : rows) {
    if (r.depth == 5) {
      EXPECT_FALSE(r.valid);
      EXPECT_NE(r.reason.find("divisible"), std::string::npos);
    } else {
      EXPECT_TRUE(r.valid);
      EXPECT_EQ(r.parameters, (segnet::NetConfig{r.depth, r.width, 0.1, 16}.parameter_count()));
      EXPECT_GT(r.median_seconds, 0.0);
    }
  }
}

}  // namespace
}  // namespace fovlab::eval
