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

#include <cmath>
#include <cstdlib>
#include <limits>

#include <gtest/gtest.h>

#include "fovlab/errors.hpp"
#include "fovlab/segnet/train.hpp"
#include "test_util.hpp"

namespace fovlab::segnet {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(EarlyStopping, StopsAfterPatienceStaleEpochs) {
  EarlyStopping s(3);
  EXPECT_TRUE(s.update(0, 1.0));
  EXPECT_TRUE(s.update(1, 0.9));
  EXPECT_FALSE(s.update(2, 0.95));
  EXPECT_FALSE(s.update(3, 0.9));  // ties do not count as improvement
  EXPECT_FALSE(s.should_stop());
  EXPECT_FALSE(s.update(4, 0.91));
  EXPECT_TRUE(s.should_stop());
  EXPECT_EQ(s.best_epoch(), 1);
  EXPECT_EQ(s.best_loss(), 0.9);
}

TEST(EarlyStopping, ImprovementResetsTheCounter) {
  EarlyStopping s(2);
  s.update(0, 1.0);
  s.update(1, 1.1);
  s.update(2, 0.5);
  s.update(3, 0.6);
  EXPECT_FALSE(s.should_stop());
  s.update(4, 0.6);
  EXPECT_TRUE(s.should_stop());
  EXPECT_THROW(EarlyStopping(0), ConfigError);
}

// Oracle: Adam recurrences evaluated by hand for one parameter.
TEST(Adam, MatchesHandComputedSteps) {
  Adam adam(1, 0.1);
  std::vector<float> p{1.0f};
  const double g1 = 0.5, g2 = -0.25;
  std::vector<float> g{static_cast<float>(g1)};
  adam.step(p, g);
  // Bias-corrected m and v equal g and g^2 after one step.
  double want = 1.0 - 0.1 * g1 / (std::abs(g1) + 1e-8);
  EXPECT_NEAR(p[0], want, 1e-6);

  g[0] = static_cast<float>(g2);
  adam.step(p, g);
  const double m = 0.9 * (0.1 * g1) + 0.1 * g2;
  const double v = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  want -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  EXPECT_NEAR(p[0], want, 1e-6);
  EXPECT_EQ(adam.steps(), 2);
}

TEST(Adam, SizeMismatchIsDataError) {
  Adam adam(2, 0.1);
  std::vector<float> p(2), g(3);
  EXPECT_THROW(adam.step(p, g), DataError);
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{1e-2, 7, 3, 2, 9};
  const auto r = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(r.learning_rate, c.learning_rate);
  EXPECT_EQ(r.max_epochs, 7);
  EXPECT_EQ(r.batch_size, 3);
  EXPECT_EQ(r.patience, 2);
  EXPECT_EQ(r.seed, 9u);
  auto j = train_config_to_json(c);
  j["epochs"] = 3;
  EXPECT_THROW(train_config_from_json(j), ConfigError);
}

TEST(MakeSample, GridMismatchIsDataError) {
  EXPECT_THROW(make_sample(BevImage(GridSpec{75, 16}), FovMask(GridSpec{75, 32})), DataError);
  BevImage img(GridSpec{75, 16});
  img.counts[3] = 4;
  FovMask m(GridSpec{75, 16});
  m.visible[3] = 1;
  const Sample s = make_sample(img, m);
  EXPECT_EQ(s.input[3], 1.0f);
  EXPECT_EQ(s.target, m.visible);
}

// Target = "input above 0.5", a local rule a small UNet can memorize.
std::vector<Sample> toy_samples(int n, std::uint64_t seed) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const auto v = testing::random_values(256, seed * 1000 + i);
    Sample s;
    s.input.assign(v.begin(), v.end());
    for (double x : v) s.target.push_back(x > 0.5 ? 1 : 0);
    out.push_back(std::move(s));
  }
  return out;
}

const NetConfig kToy{3, 4, 0.05, 16};

TEST(Train, OverfitsTenImages) {
  const auto data = toy_samples(10, 1);
  const Network net(kToy, 3);
  const double initial = evaluate_loss(net, data);
  TrainConfig cfg{1e-2, 150, 5, 150, 4};
  const auto r = train(net, data, data, cfg);
  EXPECT_LT(r.best_val_loss, 0.1 * initial) << "initial " << initial;
  EXPECT_NEAR(evaluate_loss(r.net, data), r.best_val_loss, 1e-9);
}

TEST(Train, ReturnsBestEpochAndIsDeterministic) {
  const auto tr = toy_samples(12, 2);
  const auto va = toy_samples(4, 3);
  TrainConfig cfg{3e-3, 8, 4, 3, 11};
  std::vector<EpochRecord> seen;
  const auto a = train(Network(kToy, 1), tr, va, cfg, [&](const EpochRecord& r) {
    seen.push_back(r);
  });
  ASSERT_EQ(seen.size(), a.history.size());
  double best = kInf;
  int best_epoch = -1;
  for (const auto& h : a.history) {
    if (h.val_loss < best) {
      best = h.val_loss;
      best_epoch = h.epoch;
    }
  }
  EXPECT_EQ(a.best_epoch, best_epoch);
  EXPECT_EQ(a.best_val_loss, best);
  EXPECT_NEAR(evaluate_loss(a.net, va), best, 1e-9);

  setenv("FOVLAB_THREADS", "3", 1);
  const auto b = train(Network(kToy, 1), tr, va, cfg);
  unsetenv("FOVLAB_THREADS");
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
  }
  EXPECT_TRUE(std::equal(a.net.parameters().begin(), a.net.parameters().end(),
                         b.net.parameters().begin()));
}

TEST(Train, EarlyStopsOnFlatValidation) {
  const auto tr = toy_samples(4, 5);
  const auto va = toy_samples(2, 6);
  // A vanishing learning rate leaves the validation loss essentially fixed.
  TrainConfig cfg{1e-12, 50, 4, 2, 0};
  const auto r = train(Network(kToy, 1), tr, va, cfg);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.history.size(), 50u);
}

TEST(Train, NonFiniteInputIsNumericError) {
  auto tr = toy_samples(3, 7);
  tr[1].input[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train(Network(kToy, 1), tr, toy_samples(1, 8), TrainConfig{}), NumericError);
}

TEST(Train, EmptySplitIsDataError) {
  EXPECT_THROW(train(Network(kToy, 1), {}, toy_samples(1, 8), TrainConfig{}), DataError);
}

}  // namespace
}  // namespace fovlab::segnet
