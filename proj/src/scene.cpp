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

#include "fovlab/scene.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fovlab/errors.hpp"
#include "fovlab/cloud_io.hpp"
#include "fovlab/polygon.hpp"
#include "fovlab/random.hpp"

namespace fovlab {

namespace {

constexpr int kMaxDraws = 10'000;
constexpr double kWallThickness = 1.0;

Points2 rectangle(const Vec2& center, double length, double width,
                  double angle) {
  const Vec2 u(std::cos(angle), std::sin(angle));
  const Vec2 v(-u.y(), u.x());
  const Vec2 hu = 0.5 * length * u;
  const Vec2 hv = 0.5 * width * v;
  return {center - hu - hv, center + hu - hv, center + hu + hv,
          center - hu + hv};
}

Points2 axis_box(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

Points2 regular_polygon(const Vec2& center, double radius, int sides,
                        double phase) {
  Points2 out;
  for (int i = 0; i < sides; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * i / sides;
    out.emplace_back(center.x() + radius * std::cos(a),
                     center.y() + radius * std::sin(a));
  }
  return out;
}

double distance_to_polygon(const Vec2& p, const Points2& ring) {
  if (poly::contains(ring, p, 0.0)) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    d = std::min(d, poly::distance_to_segment(p, ring[j], ring[i]));
  }
  return d;
}

Vec2 planar_direction(const Pose& pose, double sensor_azimuth) {
  const Vec3 d = pose.attitude *
                 Vec3(std::cos(sensor_azimuth), std::sin(sensor_azimuth), 0.0);
  return Vec2(d.x(), d.y()).normalized();
}

}  // namespace

void Scene::validate() const {
  sensor.validate();
  const Vec2 s(sensor.position.x(), sensor.position.y());
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& o = obstacles[i];
    if (o.size() < 3) {
      throw DataError("obstacle " + std::to_string(i) +
                      " has fewer than 3 vertices");
    }
    if (!poly::is_convex_ccw(o)) {
      throw DataError("obstacle " + std::to_string(i) +
                      " is not convex counterclockwise");
    }
    if (poly::contains(o, s, 0.0)) {
      throw DataError("sensor lies inside obstacle " + std::to_string(i));
    }
  }
}

void LidarModel::validate() const {
  if (n_beams < 8) throw ConfigError("lidar n_beams must be >= 8");
  if (!(max_range > 0.0)) throw ConfigError("lidar max_range must be > 0");
  if (!(range_noise_sigma >= 0.0)) {
    throw ConfigError("lidar range_noise_sigma must be >= 0");
  }
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) {
    throw ConfigError("lidar dropout_prob must be in [0, 1)");
  }
}

void SceneFamily::validate() const {
  if (obstacle_count.min < 0 || obstacle_count.max < obstacle_count.min) {
    throw ConfigError("family obstacle_count range is empty");
  }
  if (!(obstacle_size.min > 0.0) || obstacle_size.max < obstacle_size.min) {
    throw ConfigError("family obstacle_size range is empty");
  }
  if (has_perimeter() &&
      (!(perimeter.min > 0.0) || perimeter.max < perimeter.min)) {
    throw ConfigError("family perimeter range is empty");
  }
  if (!(bounds > 0.0)) throw ConfigError("family bounds must be > 0");
  if (!(sensor_clearance >= 0.0)) {
    throw ConfigError("family sensor_clearance must be >= 0");
  }
}

SceneFamily SceneFamily::preset(const std::string& name) {
  SceneFamily f;
  f.name = name;
  if (name == "outdoor-sparse") {
    f.obstacle_count = {3, 8};
    f.obstacle_size = {1.5, 6.0};
    f.perimeter = {35.0, 55.0};
    f.bounds = 60.0;
  } else if (name == "outdoor-dense") {
    f.obstacle_count = {10, 22};
    f.obstacle_size = {1.5, 5.0};
    f.perimeter = {30.0, 50.0};
    f.bounds = 55.0;
  } else if (name == "indoor") {
    f.obstacle_count = {4, 12};
    f.obstacle_size = {0.8, 3.0};
    f.perimeter = {12.0, 28.0};
    f.bounds = 30.0;
    f.sensor_clearance = 1.0;
  } else {
    throw ConfigError("unknown scene family \"" + name + "\"");
  }
  return f;
}

const std::vector<std::string>& SceneFamily::preset_names() {
  static const std::vector<std::string> names = {"outdoor-sparse",
                                                 "outdoor-dense", "indoor"};
  return names;
}

Scene generate_scene(const SceneFamily& family, std::uint64_t seed) {
  family.validate();
  Rng rng(derive_seed(seed, {label_hash(family.name)}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Scene scene;
  scene.bounds = family.bounds;
  scene.sensor = Pose::from_yaw(uniform(-std::numbers::pi, std::numbers::pi),
                                Vec3(0.0, 0.0, 1.8));
  const Vec2 sensor_xy = Vec2::Zero();

  double west = family.bounds, east = family.bounds;
  double south = family.bounds, north = family.bounds;
  if (family.has_perimeter()) {
    west = uniform(family.perimeter.min, family.perimeter.max);
    east = uniform(family.perimeter.min, family.perimeter.max);
    south = uniform(family.perimeter.min, family.perimeter.max);
    north = uniform(family.perimeter.min, family.perimeter.max);
  }

  std::uniform_int_distribution<int> count_dist(family.obstacle_count.min,
                                                family.obstacle_count.max);
  const int count = count_dist(rng);
  int draws = 0;
  for (int placed = 0; placed < count;) {
    if (++draws > kMaxDraws) {
      throw DataError("generate_scene: rejection sampling failed after " +
                      std::to_string(kMaxDraws) + " draws");
    }
    const double size_a = uniform(family.obstacle_size.min, family.obstacle_size.max);
    const double size_b = uniform(family.obstacle_size.min, family.obstacle_size.max);
    const double margin = 0.5 * std::max(size_a, size_b);
    const Vec2 center(uniform(-west + margin, east - margin),
                      uniform(-south + margin, north - margin));
    const double angle = uniform(0.0, std::numbers::pi);
    const bool rect = unit(rng) < 0.75;
    const int sides = 3 + static_cast<int>(unit(rng) * 6.0);
    Points2 shape = rect ? rectangle(center, size_a, size_b, angle)
                         : regular_polygon(center, 0.5 * size_a, sides, angle);
    if (distance_to_polygon(sensor_xy, shape) <= family.sensor_clearance) {
      continue;
    }
    scene.obstacles.push_back(std::move(shape));
    ++placed;
  }

  if (family.has_perimeter()) {
    const double t = kWallThickness;
    scene.obstacles.push_back(axis_box(east, -south - t, east + t, north + t));
    scene.obstacles.push_back(axis_box(-west - t, -south - t, -west, north + t));
    scene.obstacles.push_back(axis_box(-west - t, north, east + t, north + t));
    scene.obstacles.push_back(axis_box(-west - t, -south - t, east + t, -south));
  }
  return scene;
}

std::optional<double> cast_ray(const Scene& scene, const Vec2& origin,
                               const Vec2& dir) {
  std::optional<double> best;
  for (const auto& o : scene.obstacles) {
    for (std::size_t i = 0, j = o.size() - 1; i < o.size(); j = i++) {
      if (auto t = poly::ray_hit(origin, dir, o[j], o[i])) {
        if (!best || *t < *best) best = t;
      }
    }
  }
  return best;
}

PointCloud simulate_lidar(const Scene& scene, const LidarModel& model,
                          std::uint64_t seed) {
  model.validate();
  scene.sensor.validate();
  Rng rng(derive_seed(seed, {label_hash("lidar")}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  PointCloud cloud;
  cloud.pose = scene.sensor;
  const Vec2 origin(scene.sensor.position.x(), scene.sensor.position.y());
  for (int i = 0; i < model.n_beams; ++i) {
    // Draw both variates for every beam so the stream stays aligned.
    const double u = unit(rng);
    const double n = noise(rng);
    const double az = (i + 0.5) * 2.0 * std::numbers::pi / model.n_beams;
    const auto hit = cast_ray(scene, origin, planar_direction(scene.sensor, az));
    if (!hit || *hit > model.max_range || u < model.dropout_prob) continue;
    const double r = std::max(0.1, *hit + model.range_noise_sigma * n);
    cloud.points.emplace_back(r * std::cos(az), r * std::sin(az), 0.0);
  }
  return cloud;
}

FovMask ground_truth_fov(const Scene& scene, const LidarModel& model,
                         const GridSpec& spec) {
  spec.validate();
  model.validate();
  FovMask mask(spec);
  const Vec2 origin(scene.sensor.position.x(), scene.sensor.position.y());

  // Per-obstacle bounding boxes let most segments skip the edge tests.
  struct Box {
    Vec2 lo, hi;
  };
  std::vector<Box> boxes;
  for (const auto& o : scene.obstacles) {
    Box b{o.front(), o.front()};
    for (const auto& v : o) {
      b.lo = b.lo.cwiseMin(v);
      b.hi = b.hi.cwiseMax(v);
    }
    boxes.push_back(b);
  }

  for (int iy = 0; iy < spec.resolution; ++iy) {
    for (int ix = 0; ix < spec.resolution; ++ix) {
      const Vec2 c = spec.cell_center(ix, iy);
      if (c.norm() > model.max_range) continue;
      const Vec2 w = origin + c;
      const Vec2 lo = origin.cwiseMin(w);
      const Vec2 hi = origin.cwiseMax(w);
      bool blocked = false;
      for (std::size_t k = 0; k < scene.obstacles.size() && !blocked; ++k) {
        const Box& b = boxes[k];
        if (b.hi.x() < lo.x() || b.lo.x() > hi.x() || b.hi.y() < lo.y() ||
            b.lo.y() > hi.y()) {
          continue;
        }
        blocked = poly::segment_hits_convex(origin, w, scene.obstacles[k]);
      }
      mask.visible[spec.index(ix, iy)] = blocked ? 0 : 1;
    }
  }
  return mask;
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : scene.obstacles) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& v : o) ring.push_back({v.x(), v.y()});
    obstacles.push_back(std::move(ring));
  }
  return {{"bounds", scene.bounds},
          {"sensor", pose_to_json(scene.sensor)},
          {"obstacles", std::move(obstacles)}};
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  try {
    scene.bounds = j.at("bounds").get<double>();
    scene.sensor = pose_from_json(j.at("sensor"));
    for (const auto& ring : j.at("obstacles")) {
      Points2 o;
      for (const auto& v : ring) {
        const auto xy = v.get<std::vector<double>>();
        if (xy.size() != 2) throw DataError("obstacle vertex must be [x, y]");
        o.emplace_back(xy[0], xy[1]);
      }
      scene.obstacles.push_back(std::move(o));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid scene JSON: ") + e.what());
  }
  scene.validate();
  return scene;
}

}  // namespace fovlab
