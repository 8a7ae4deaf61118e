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
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "fovlab/grid.hpp"

namespace fovlab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Points2 = std::vector<Vec2>;
using Points3 = std::vector<Vec3>;

// Sensor pose. The attitude rotates sensor-frame vectors into the
// gravity-aligned frame.
struct Pose {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();

  // Throws ConfigError unless |q| = 1 within 1e-9.
  void validate() const;
  static Pose from_yaw(double yaw, const Vec3& position = Vec3::Zero());
};

struct PointCloud {
  Points3 points;  // sensor frame, meters
  Pose pose;
  std::int64_t frame_id = 0;
};

struct FilterSpec {
  double max_range = 75.0;
  double z_min = -3.0;
  double z_max = 3.0;

  void validate() const;
};

struct PolarPoint {
  double azimuth;  // [0, 2pi)
  double range;
};

// Rotates every point into the gravity-aligned frame; returns (x, y, z) with
// z retained. Translation to world is applied only when `to_world` is set.
Points3 project_to_bev(const PointCloud& cloud, bool to_world = false);

// Inverse of project_to_bev (rotation only): gravity-aligned -> sensor frame.
Points3 unproject_from_bev(std::span<const Vec3> points, const Pose& pose);

// Keeps points with planar range <= max_range and z in [z_min, z_max].
Points3 filter_points(std::span<const Vec3> points, const FilterSpec& spec);

Points2 planar(std::span<const Vec3> points);

BevImage quantize(std::span<const Vec2> points, const GridSpec& spec);
BevImage quantize(std::span<const Vec3> points, const GridSpec& spec);

double normalize_azimuth(double a);

// Points exactly at the origin are dropped.
std::vector<PolarPoint> to_polar(std::span<const Vec2> points);
Points2 from_polar(std::span<const PolarPoint> polar);

// project -> filter -> quantize.
BevImage preprocess(const PointCloud& cloud, const FilterSpec& filter,
                    const GridSpec& grid);

}  // namespace fovlab
