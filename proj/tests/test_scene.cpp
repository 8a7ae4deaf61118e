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
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "fovlab/errors.hpp"
#include "fovlab/polygon.hpp"
#include "fovlab/scene.hpp"

namespace fovlab {
namespace {

Scene empty_scene() {
  Scene s;
  s.sensor = Pose::from_yaw(0.0, Vec3(0, 0, 1.8));
  return s;
}

Points2 box(double x0, double y0, double x1, double y1) {
  return {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
}

TEST(Scene, GenerationIsDeterministic) {
  const auto fam = SceneFamily::preset("outdoor-dense");
  const Scene a = generate_scene(fam, 42);
  const Scene b = generate_scene(fam, 42);
  ASSERT_EQ(a.obstacles.size(), b.obstacles.size());
  for (std::size_t i = 0; i < a.obstacles.size(); ++i) EXPECT_EQ(a.obstacles[i], b.obstacles[i]);
  EXPECT_TRUE(a.sensor.attitude.coeffs() == b.sensor.attitude.coeffs());
  const Scene c = generate_scene(fam, 43);
  EXPECT_FALSE(c.obstacles == a.obstacles);
}

TEST(Scene, ZeroObstacleFamily) {
  auto fam = SceneFamily::preset("outdoor-sparse");
  fam.obstacle_count = {0, 0};
  fam.perimeter = {0, 0};
  EXPECT_TRUE(generate_scene(fam, 1).obstacles.empty());
}

TEST(Scene, ObstacleCountsWithinFamilyRanges) {
  for (const auto& name : SceneFamily::preset_names()) {
    const auto fam = SceneFamily::preset(name);
    const int walls = fam.has_perimeter() ? 4 : 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Scene s = generate_scene(fam, seed);
      const int n = static_cast<int>(s.obstacles.size()) - walls;
      EXPECT_GE(n, fam.obstacle_count.min) << name;
      EXPECT_LE(n, fam.obstacle_count.max) << name;
      EXPECT_NO_THROW(s.validate());
      for (const auto& o : s.obstacles) {
        EXPECT_GE(o.size(), 3u);
        EXPECT_TRUE(poly::is_convex_ccw(o));
        EXPECT_FALSE(poly::contains(o, Vec2::Zero()));
      }
    }
  }
}

TEST(Scene, InvalidFamilyRejected) {
  auto fam = SceneFamily::preset("indoor");
  fam.obstacle_count = {5, 2};
  EXPECT_THROW(generate_scene(fam, 0), ConfigError);
  EXPECT_THROW(SceneFamily::preset("underwater"), ConfigError);
}

TEST(Scene, RejectionFailureIsReported) {
  auto fam = SceneFamily::preset("indoor");
  fam.obstacle_count = {5, 5};
  fam.sensor_clearance = 1e6;  // nothing can be placed
  EXPECT_THROW(generate_scene(fam, 0), DataError);
}

TEST(Scene, ValidateRejectsSensorInsideObstacle) {
  Scene s = empty_scene();
  s.obstacles.push_back(box(-1, -1, 1, 1));
  EXPECT_THROW(s.validate(), DataError);
}

TEST(Lidar, EmptySceneHasNoReturns) {
  const auto cloud = simulate_lidar(empty_scene(), LidarModel{}, 0);
  EXPECT_TRUE(cloud.points.empty());
}

// Oracle: perpendicular wall at x = 10 returns exactly 10 on the beam
// closest to azimuth 0, and 10 / cos(az) on the others.
TEST(Lidar, PerpendicularWallRange) {
  Scene s = empty_scene();
  s.obstacles.push_back(box(10, -20, 11, 20));
  LidarModel m;
  m.n_beams = 720;
  const auto cloud = simulate_lidar(s, m, 0);
  ASSERT_FALSE(cloud.points.empty());
  for (const auto& p : cloud.points) {
    const double az = std::atan2(p.y(), p.x());
    EXPECT_NEAR(p.x(), 10.0, 1e-9);
    EXPECT_NEAR(p.head<2>().norm(), 10.0 / std::cos(az), 1e-9);
    EXPECT_EQ(p.z(), 0.0);
  }
  const auto& first = cloud.points.front();  // beam 0 at half a bin past 0
  EXPECT_NEAR(first.head<2>().norm(), 10.0 / std::cos(std::numbers::pi / 720), 1e-9);
}

TEST(Lidar, SensorYawRotatesReturnsIntoSensorFrame) {
  Scene s = empty_scene();
  s.sensor = Pose::from_yaw(std::numbers::pi / 2, Vec3(0, 0, 1.8));
  s.obstacles.push_back(box(-20, 10, 20, 11));  // wall north of the sensor
  const auto cloud = simulate_lidar(s, LidarModel{}, 0);
  ASSERT_FALSE(cloud.points.empty());
  for (const auto& p : cloud.points) EXPECT_GT(p.x(), 0.0);  // ahead in the sensor frame
}

TEST(Lidar, OccludedObstacleNeverReturns) {
  Scene s = empty_scene();
  const Points2 front = box(10, -5, 11, 5);
  const Points2 back = box(20, -2, 21, 2);
  s.obstacles = {front, back};
  const auto cloud = simulate_lidar(s, LidarModel{}, 0);
  for (const auto& p : cloud.points) {
    const Vec2 q = p.head<2>();
    double d = 1e9;
    for (std::size_t i = 0, j = back.size() - 1; i < back.size(); j = i++) {
      d = std::min(d, poly::distance_to_segment(q, back[j], back[i]));
    }
    EXPECT_GT(d, 1e-6);
  }
}

TEST(Lidar, DropoutAndNoise) {
  const Scene s = generate_scene(SceneFamily::preset("outdoor-sparse"), 3);
  LidarModel m;
  const auto clean = simulate_lidar(s, m, 1);
  EXPECT_EQ(clean.points.size(), 720u);  // perimeter closes every beam
  m.dropout_prob = 0.5;
  const auto dropped = simulate_lidar(s, m, 1);
  EXPECT_LT(dropped.points.size(), 500u);
  EXPECT_GT(dropped.points.size(), 220u);
  m.dropout_prob = 0;
  m.range_noise_sigma = 0.2;
  const auto noisy = simulate_lidar(s, m, 1);
  ASSERT_EQ(noisy.points.size(), clean.points.size());
  double sq = 0;
  for (std::size_t i = 0; i < noisy.points.size(); ++i) {
    const double dr = noisy.points[i].norm() - clean.points[i].norm();
    sq += dr * dr;
  }
  EXPECT_NEAR(std::sqrt(sq / noisy.points.size()), 0.2, 0.03);
  EXPECT_EQ(simulate_lidar(s, m, 9).points, simulate_lidar(s, m, 9).points);
}

TEST(Lidar, ModelValidation) {
  LidarModel m;
  m.n_beams = 4;
  EXPECT_THROW(m.validate(), ConfigError);
  m = LidarModel{};
  m.dropout_prob = 1.0;
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(GroundTruth, EmptySceneIsDisk) {
  const GridSpec g{75, 128};
  LidarModel m;
  m.max_range = 40;
  const FovMask mask = ground_truth_fov(empty_scene(), m, g);
  for (int iy = 0; iy < g.resolution; ++iy) {
    for (int ix = 0; ix < g.resolution; ++ix) {
      EXPECT_EQ(mask.visible[g.index(ix, iy)], g.cell_center(ix, iy).norm() <= 40.0 ? 1 : 0);
    }
  }
}

TEST(GroundTruth, CellBehindWallIsInvisible) {
  Scene s = empty_scene();
  s.obstacles.push_back(box(10, -5, 11, 5));
  const GridSpec g{75, 150};  // 1 m cells, centers at half-integers
  const FovMask mask = ground_truth_fov(s, LidarModel{}, g);
  auto at = [&](double x, double y) {
    auto c = g.cell_of(x, y);
    return mask.visible[g.index(c->first, c->second)];
  };
  EXPECT_EQ(at(5.5, 0.5), 1);
  EXPECT_EQ(at(10.5, 0.5), 0);  // inside the wall
  EXPECT_EQ(at(20.5, 0.5), 0);  // shadow
  EXPECT_EQ(at(-20.5, 0.5), 1);
}

// Cell centers (p, q) * (2m + 1) * cs / 2 lie on one ray from the sensor for
// odd p, q; along each such ray visibility must switch off at most once.
TEST(GroundTruth, VisibilityIsStarShaped) {
  const GridSpec g{75, 256};
  const double cs = g.cell_size();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_scene(SceneFamily::preset("outdoor-dense"), seed);
    const LidarModel m;
    const FovMask mask = ground_truth_fov(s, m, g);
    for (int p = -7; p <= 7; p += 2) {
      for (int q = -7; q <= 7; q += 2) {
        if (std::gcd(std::abs(p), std::abs(q)) != 1) continue;
        bool blocked = false;
        for (int k = 1;; k += 2) {
          const double x = p * k * cs / 2, y = q * k * cs / 2;
          const auto cell = g.cell_of(x, y);
          if (!cell || std::hypot(x, y) > m.max_range) break;
          const bool vis = mask.visible[g.index(cell->first, cell->second)];
          if (blocked) {
            EXPECT_FALSE(vis) << "seed " << seed << " dir " << p << "," << q;
          }
          if (!vis) blocked = true;
        }
      }
    }
  }
}

// Noiseless returns pulled 1% toward the sensor must be visible by the
// segment criterion that defines ground truth.
TEST(GroundTruth, HitPointsAreVisible) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(SceneFamily::preset("outdoor-sparse"), seed);
    const auto cloud = simulate_lidar(s, LidarModel{}, seed);
    const Eigen::Matrix3d r = s.sensor.attitude.toRotationMatrix();
    for (const auto& p : cloud.points) {
      const Vec3 w = r * (0.99 * p);
      const Vec2 end(w.x(), w.y());
      for (const auto& o : s.obstacles) {
        EXPECT_FALSE(poly::segment_hits_convex(Vec2::Zero(), end, o));
      }
    }
  }
}

TEST(GroundTruth, VisibleAreaShrinksAsObstaclesAreAdded) {
  const GridSpec g{75, 128};
  const Scene full = generate_scene(SceneFamily::preset("outdoor-dense"), 17);
  Scene partial = empty_scene();
  partial.sensor = full.sensor;
  FovMask prev = ground_truth_fov(partial, LidarModel{}, g);
  for (const auto& o : full.obstacles) {
    partial.obstacles.push_back(o);
    const FovMask next = ground_truth_fov(partial, LidarModel{}, g);
    for (std::size_t i = 0; i < next.visible.size(); ++i) {
      EXPECT_LE(next.visible[i], prev.visible[i]);
    }
    prev = next;
  }
}

TEST(GroundTruth, IndependentOfNoiseSettings) {
  const Scene s = generate_scene(SceneFamily::preset("indoor"), 4);
  LidarModel a, b;
  b.range_noise_sigma = 0.5;
  b.dropout_prob = 0.3;
  const GridSpec g{75, 64};
  EXPECT_EQ(ground_truth_fov(s, a, g), ground_truth_fov(s, b, g));
}

TEST(SceneJson, RoundTrip) {
  const Scene s = generate_scene(SceneFamily::preset("indoor"), 8);
  const Scene t = scene_from_json(scene_to_json(s));
  EXPECT_EQ(t.obstacles, s.obstacles);
  EXPECT_EQ(t.bounds, s.bounds);
  EXPECT_TRUE(t.sensor.attitude.coeffs() == s.sensor.attitude.coeffs());
  EXPECT_EQ(t.sensor.position, s.sensor.position);
}

TEST(SceneJson, MalformedInputIsDataError) {
  EXPECT_THROW(scene_from_json(nlohmann::json::object()), DataError);
  auto j = scene_to_json(generate_scene(SceneFamily::preset("indoor"), 8));
  j["obstacles"][0][0] = {1.0, 2.0, 3.0};
  EXPECT_THROW(scene_from_json(j), DataError);
}

}  // namespace
}  // namespace fovlab
