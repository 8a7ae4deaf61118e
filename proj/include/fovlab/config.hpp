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
#include <optional>
#include <string>

#include "json.hpp"

#include "fovlab/attacks.hpp"
#include "fovlab/geometry.hpp"
#include "fovlab/grid.hpp"
#include "fovlab/scene.hpp"
#include "fovlab/segnet/train.hpp"
#include "fovlab/segnet/unet.hpp"

namespace fovlab {

nlohmann::json grid_to_json(const GridSpec& g);
GridSpec grid_from_json(const nlohmann::json& j);
nlohmann::json filter_to_json(const FilterSpec& f);
FilterSpec filter_from_json(const nlohmann::json& j);
nlohmann::json lidar_to_json(const LidarModel& m);
LidarModel lidar_from_json(const nlohmann::json& j);
nlohmann::json family_to_json(const SceneFamily& f);
// Accepts a preset name or an object whose "name" selects the preset that
// the remaining keys override.
SceneFamily family_from_json(const nlohmann::json& j);

struct FrameCounts {
  int train = 400;
  int val = 100;
  int test = 100;
};

struct EstimatorParams {
  int n_bins = 360;
  int hull_k = 16;
  int mcd_passes = 20;
  double threshold = 0.7;
  double quantile = 0.99;
};

struct ExperimentConfig {
  SceneFamily family = SceneFamily::preset("outdoor-sparse");
  LidarModel lidar;
  GridSpec grid;
  FilterSpec filter;
  std::optional<AttackSpec> attack;
  std::optional<DefenseSpec> defense;
  segnet::NetConfig net;
  segnet::TrainConfig train;
  FrameCounts frames;
  EstimatorParams estimators;
  std::uint64_t seed = 0;
  std::string output_dir;

  void validate() const;
  // Grid used by the network: same extent, network resolution.
  GridSpec net_grid() const { return GridSpec{grid.extent, net.resolution}; }
};

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
// Unknown keys anywhere raise ConfigError; missing keys keep defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

}  // namespace fovlab
