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
#include <string>
#include <vector>

#include "json.hpp"

#include "fovlab/geometry.hpp"
#include "fovlab/grid.hpp"

namespace fovlab {

// Planar world: convex CCW obstacles around a sensor.
struct Scene {
  std::vector<Points2> obstacles;  // world frame, meters
  Pose sensor;
  double bounds = 75.0;

  // Throws DataError on non-convex/degenerate obstacles or a sensor inside one.
  void validate() const;
};

struct LidarModel {
  int n_beams = 720;
  double max_range = 75.0;
  double range_noise_sigma = 0.0;
  double dropout_prob = 0.0;

  void validate() const;
};

struct IntRange {
  int min = 0;
  int max = 0;
};

struct RealRange {
  double min = 0.0;
  double max = 0.0;
};

// Synthetic environment regime. The optional perimeter encloses the sensor
// with four wall slabs whose half-widths are drawn from `perimeter`.
struct SceneFamily {
  std::string name = "outdoor-sparse";
  IntRange obstacle_count{3, 8};
  RealRange obstacle_size{1.5, 6.0};
  RealRange perimeter{35.0, 55.0};  // max <= 0 disables the enclosure
  double bounds = 60.0;
  double sensor_clearance = 1.5;
  std::uint64_t seed = 0;

  bool has_perimeter() const { return perimeter.max > 0.0; }
  void validate() const;

  // One of "outdoor-sparse", "outdoor-dense", "indoor".
  static SceneFamily preset(const std::string& name);
  static const std::vector<std::string>& preset_names();
};

// Deterministic in (family, seed). Throws DataError after 10,000 rejected
// obstacle draws.
Scene generate_scene(const SceneFamily& family, std::uint64_t seed);

// One first-hit return per beam; beams sit at azimuths (i + 1/2) * 2pi / n
// in the sensor frame. Returned points are in the sensor frame with z = 0.
PointCloud simulate_lidar(const Scene& scene, const LidarModel& model,
                          std::uint64_t seed);

// Range of the first obstacle hit along a world-frame ray, if any.
std::optional<double> cast_ray(const Scene& scene, const Vec2& origin,
                               const Vec2& dir);

// Cell-center visibility: within max_range and the sensor-to-center segment
// touches no obstacle. Grid is sensor-centered with world-aligned axes.
FovMask ground_truth_fov(const Scene& scene, const LidarModel& model,
                         const GridSpec& spec);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace fovlab
