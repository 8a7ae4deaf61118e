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

#include "fovlab/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fovlab/errors.hpp"

namespace fovlab {

std::optional<std::pair<int, int>> GridSpec::cell_of(double x,
                                                     double y) const {
  if (!(x >= -extent && x < extent && y >= -extent && y < extent)) {
    return std::nullopt;
  }
  const double cs = cell_size();
  const int ix = static_cast<int>(std::floor((x + extent) / cs));
  const int iy = static_cast<int>(std::floor((y + extent) / cs));
  if (ix < 0 || iy < 0 || ix >= resolution || iy >= resolution) {
    return std::nullopt;
  }
  return std::make_pair(ix, iy);
}

void GridSpec::validate() const {
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw ConfigError("grid extent must be positive, got " +
                      std::to_string(extent));
  }
  if (resolution < 8) {
    throw ConfigError("grid resolution must be >= 8, got " +
                      std::to_string(resolution));
  }
}

std::uint64_t BevImage::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::size_t FovMask::count() const {
  std::size_t s = 0;
  for (auto v : visible) s += v != 0;
  return s;
}

void Pose::validate() const {
  const auto& q = attitude;
  const double n = std::sqrt(q.w() * q.w() + q.x() * q.x() + q.y() * q.y() +
                             q.z() * q.z());
  if (!(std::abs(n - 1.0) <= 1e-9)) {
    throw ConfigError("pose quaternion is not unit norm (|q| = " +
                      std::to_string(n) + ")");
  }
  if (!position.allFinite()) throw ConfigError("pose position is not finite");
}

Pose Pose::from_yaw(double yaw, const Vec3& position) {
  Pose p;
  p.position = position;
  p.attitude = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  return p;
}

void FilterSpec::validate() const {
  if (!(max_range > 0.0)) throw ConfigError("filter max_range must be > 0");
  if (!(z_min < z_max)) throw ConfigError("filter requires z_min < z_max");
}

Points3 project_to_bev(const PointCloud& cloud, bool to_world) {
  cloud.pose.validate();
  const Eigen::Matrix3d r = cloud.pose.attitude.toRotationMatrix();
  Points3 out;
  out.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    Vec3 q = r * p;
    if (to_world) q += cloud.pose.position;
    out.push_back(q);
  }
  return out;
}

Points3 unproject_from_bev(std::span<const Vec3> points, const Pose& pose) {
  pose.validate();
  const Eigen::Matrix3d rt = pose.attitude.toRotationMatrix().transpose();
  Points3 out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(rt * p);
  return out;
}

Points3 filter_points(std::span<const Vec3> points, const FilterSpec& spec) {
  Points3 out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const double r = std::hypot(p.x(), p.y());
    if (r <= spec.max_range && p.z() >= spec.z_min && p.z() <= spec.z_max) {
      out.push_back(p);
    }
  }
  return out;
}

Points2 planar(std::span<const Vec3> points) {
  Points2 out;
  out.reserve(points.size());
  for (const auto& p : points) out.emplace_back(p.x(), p.y());
  return out;
}

BevImage quantize(std::span<const Vec2> points, const GridSpec& spec) {
  spec.validate();
  BevImage img(spec);
  for (const auto& p : points) {
    if (auto cell = spec.cell_of(p.x(), p.y())) {
      ++img.counts[spec.index(cell->first, cell->second)];
    }
  }
  return img;
}

BevImage quantize(std::span<const Vec3> points, const GridSpec& spec) {
  const Points2 flat = planar(points);
  return quantize(std::span<const Vec2>(flat), spec);
}

double normalize_azimuth(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  if (a >= two_pi) a = 0.0;
  return a;
}

std::vector<PolarPoint> to_polar(std::span<const Vec2> points) {
  std::vector<PolarPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (p.x() == 0.0 && p.y() == 0.0) continue;
    out.push_back({normalize_azimuth(std::atan2(p.y(), p.x())),
                   std::hypot(p.x(), p.y())});
  }
  return out;
}

Points2 from_polar(std::span<const PolarPoint> polar) {
  Points2 out;
  out.reserve(polar.size());
  for (const auto& p : polar) {
    out.emplace_back(p.range * std::cos(p.azimuth),
                     p.range * std::sin(p.azimuth));
  }
  return out;
}

BevImage preprocess(const PointCloud& cloud, const FilterSpec& filter,
                    const GridSpec& grid) {
  const Points3 projected = project_to_bev(cloud);
  const Points3 kept = filter_points(projected, filter);
  return quantize(std::span<const Vec3>(kept), grid);
}

}  // namespace fovlab
