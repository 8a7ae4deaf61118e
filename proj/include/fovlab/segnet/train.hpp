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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "json.hpp"

#include "fovlab/grid.hpp"
#include "fovlab/segnet/unet.hpp"

namespace fovlab::segnet {

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 30;
  int batch_size = 10;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// A normalized network input paired with its binary target.
struct Sample {
  std::vector<float> input;
  std::vector<std::uint8_t> target;
};

// Throws DataError when image and mask grids differ.
Sample make_sample(const BevImage& image, const FovMask& mask);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

nlohmann::json epoch_to_json(const EpochRecord& r);

struct TrainResult {
  Network net;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

// Tracks the best validation loss; should_stop() turns true once `patience`
// consecutive epochs fail to strictly improve on it.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  // Returns true when this epoch set a new best.
  bool update(int epoch, double val_loss);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = -1;
  double best_ = std::numeric_limits<double>::infinity();
};

class Adam {
 public:
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(std::span<float> params, std::span<const float> grad);
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

// Mean loss over `data` with dropout off.
double evaluate_loss(const Network& net, std::span<const Sample> data);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam with dropout active; returns the parameters of the best
// validation epoch. Throws NumericError on a non-finite loss.
TrainResult train(Network net, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace fovlab::segnet
