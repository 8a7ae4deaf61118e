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
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fovlab/classical.hpp"
#include "fovlab/errors.hpp"
#include "fovlab/polygon.hpp"
#include "fovlab/random.hpp"
#include "fovlab/scene.hpp"

namespace fovlab {
namespace {

constexpr double kPi = std::numbers::pi;

// Oracle: Andrew's monotone chain convex hull.
Points2 convex_hull(Points2 p) {
  std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  Points2 h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && poly::cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && poly::cross(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  return h;
}

Points2 scene_returns(const Scene& s) {
  const auto cloud = simulate_lidar(s, LidarModel{}, 0);
  return planar(project_to_bev(cloud));
}

TEST(RayTraceQuantized, KeepsFarthestReturnPerBin) {
  const Points2 pts = {Vec2(5, 0.01), Vec2(9, 0.02), Vec2(0, 3), Vec2(-4, 0.001)};
  const PolarFov fov = raytrace_quantized(pts, 8);
  ASSERT_EQ(fov.n_bins(), 8);
  EXPECT_NEAR(fov.max_range_per_bin[0], std::hypot(9, 0.02), 1e-12);
  EXPECT_NEAR(fov.max_range_per_bin[2], 3.0, 1e-12);  // azimuth pi/2 opens bin 2
  EXPECT_NEAR(fov.max_range_per_bin[3], 4.0, 1e-6);   // just below pi
  EXPECT_EQ(fov.max_range_per_bin[5], 0.0);
}

TEST(RayTraceQuantized, RejectsTooFewBins) {
  EXPECT_THROW(raytrace_quantized(Points2{}, 7), ConfigError);
}

TEST(RayTraceQuantized, EmptyInputGivesEmptyMask) {
  const auto mask = polar_to_mask(raytrace_quantized(Points2{}, 360), GridSpec{75, 64});
  EXPECT_EQ(mask.count(), 0u);
}

TEST(RayTraceQuantized, BinOfWrapsAround) {
  PolarFov fov;
  fov.max_range_per_bin.assign(4, 0.0);
  EXPECT_EQ(fov.bin_of(0.0), 0);
  EXPECT_EQ(fov.bin_of(-1e-9), 3);
  EXPECT_EQ(fov.bin_of(kPi / 2), 1);
  EXPECT_EQ(fov.bin_of(2 * kPi - 1e-12), 3);
}

// Oracle: per-cell evaluation of the bin rule.
TEST(PolarToMask, MatchesPerCellRule) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0, 60);
  PolarFov fov;
  for (int i = 0; i < 90; ++i) fov.max_range_per_bin.push_back(u(rng));
  const GridSpec g{75, 96};
  const FovMask m = polar_to_mask(fov, g);
  for (int iy = 0; iy < g.resolution; ++iy) {
    for (int ix = 0; ix < g.resolution; ++ix) {
      const Vec2 c = g.cell_center(ix, iy);
      double az = std::atan2(c.y(), c.x());
      if (az < 0) az += 2 * kPi;
      const int b = std::min(89, static_cast<int>(az / (2 * kPi / 90)));
      EXPECT_EQ(m.visible[g.index(ix, iy)], c.norm() <= fov.max_range_per_bin[b] ? 1 : 0);
    }
  }
}

TEST(RayTraceQuantized, MaskGrowsWhenPointsAreAdded) {
  const Scene s = generate_scene(SceneFamily::preset("outdoor-dense"), 2);
  Points2 pts = scene_returns(s);
  const GridSpec g{75, 128};
  Rng rng(1);
  std::uniform_real_distribution<double> u(-75, 75);
  FovMask prev = polar_to_mask(raytrace_quantized(pts, 360), g);
  for (int step = 0; step < 10; ++step) {
    for (int i = 0; i < 15; ++i) pts.emplace_back(u(rng), u(rng));
    const FovMask next = polar_to_mask(raytrace_quantized(pts, 360), g);
    for (std::size_t i = 0; i < next.visible.size(); ++i) EXPECT_GE(next.visible[i], prev.visible[i]);
    prev = next;
  }
}

TEST(RayTraceContinuous, OrdersByAzimuthAndMergesDuplicates) {
  const Points2 pts = {Vec2(0, 2), Vec2(3, 0), Vec2(-1, 0), Vec2(0, -4), Vec2(6, 0)};
  const FovPolygon p = raytrace_continuous(pts);
  ASSERT_EQ(p.vertices.size(), 4u);
  EXPECT_NEAR((p.vertices[0] - Vec2(6, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((p.vertices[1] - Vec2(0, 2)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((p.vertices[2] - Vec2(-1, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((p.vertices[3] - Vec2(0, -4)).norm(), 0.0, 1e-12);
  EXPECT_GT(poly::signed_area(p.vertices), 0.0);
}

TEST(RayTraceContinuous, MergesAcrossTheWrap) {
  const Points2 pts = {Vec2(5, 0), Vec2(7, -1e-11), Vec2(0, 3), Vec2(-2, 0)};
  const FovPolygon p = raytrace_continuous(pts);
  ASSERT_EQ(p.vertices.size(), 3u);
  EXPECT_NEAR(p.vertices[0].norm(), 7.0, 1e-9);
}

TEST(RayTraceContinuous, DegenerateInput) {
  EXPECT_THROW(raytrace_continuous(Points2{}), DataError);
  EXPECT_THROW(raytrace_continuous(Points2{Vec2(1, 0), Vec2(2, 0)}), DataError);
  EXPECT_THROW(raytrace_continuous(Points2{Vec2(1, 0), Vec2(0, 1)}), DataError);
}

TEST(RayTraceContinuous, PolygonPassesThroughEveryReturn) {
  const Scene s = generate_scene(SceneFamily::preset("outdoor-sparse"), 6);
  const Points2 pts = scene_returns(s);
  const FovPolygon p = raytrace_continuous(pts);
  EXPECT_EQ(p.vertices.size(), pts.size());
  EXPECT_TRUE(poly::is_simple(p.vertices));
  for (const auto& q : pts) EXPECT_TRUE(poly::contains(p.vertices, q));
}

TEST(ConcaveHull, ParameterAndInputValidation) {
  const Points2 tri = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  EXPECT_THROW(concave_hull(tri, 2), ConfigError);
  EXPECT_THROW(concave_hull(Points2{Vec2(0, 0), Vec2(1, 1)}, 3), DataError);
  EXPECT_THROW(concave_hull(Points2{Vec2(0, 0), Vec2(1, 1), Vec2(2, 2), Vec2(3, 3)}, 3),
               DataError);
  EXPECT_THROW(concave_hull(Points2{Vec2(0, 0), Vec2(0, 0), Vec2(0, 0)}, 3), DataError);
  const auto h = concave_hull(tri, 3);
  EXPECT_EQ(h.vertices.size(), 3u);
}

TEST(ConcaveHull, ConvexInputReproducesConvexHull) {
  Points2 pts;
  for (int i = 0; i < 40; ++i) {
    const double a = 2 * kPi * i / 40;
    pts.emplace_back(10 * std::cos(a), 10 * std::sin(a));
  }
  const auto h = concave_hull(pts, 5);
  EXPECT_NEAR(poly::area(h.vertices), poly::area(convex_hull(pts)), 1e-9);
}

TEST(ConcaveHull, EnclosesPointsAndIsTighterThanConvexHull) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_scene(SceneFamily::preset("outdoor-dense"), seed);
    const Points2 pts = scene_returns(s);
    const auto h = concave_hull(pts, 16);
    EXPECT_TRUE(poly::is_simple(h.vertices)) << seed;
    EXPECT_GT(poly::signed_area(h.vertices), 0.0);
    for (const auto& q : pts) EXPECT_TRUE(poly::contains(h.vertices, q)) << seed;
    EXPECT_LE(poly::area(h.vertices), poly::area(convex_hull(pts)) + 1e-9);
  }
}

TEST(ConcaveHull, SmallerKIsNoLooser) {
  Rng rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  Points2 pts;
  // C-shaped cloud.
  for (int i = 0; i < 400; ++i) {
    const double a = kPi * 0.25 + 1.5 * kPi * (i / 400.0);
    const double r = 10 + u(rng);
    pts.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  const double loose = poly::area(concave_hull(pts, 60).vertices);
  const double tight = poly::area(concave_hull(pts, 8).vertices);
  EXPECT_LT(tight, poly::area(convex_hull(pts)));
  EXPECT_LE(tight, loose + 1e-9);
}

// Oracle: cell-center containment via the even-odd test, skipping centers
// within 1e-9 of an edge where rounding decides.
TEST(Rasterize, MatchesPointInPolygonOracle) {
  Rng rng(21);
  std::uniform_real_distribution<double> r(8, 40);
  const GridSpec g{50, 100};
  for (int trial = 0; trial < 10; ++trial) {
    Points2 star;
    for (int i = 0; i < 24; ++i) {
      const double a = 2 * kPi * (i + 0.3) / 24;
      const double rr = r(rng);
      star.emplace_back(rr * std::cos(a), rr * std::sin(a));
    }
    const FovMask m = rasterize_polygon(FovPolygon{star}, g);
    for (int iy = 0; iy < g.resolution; ++iy) {
      for (int ix = 0; ix < g.resolution; ++ix) {
        const Vec2 c = g.cell_center(ix, iy);
        double d = 1e9;
        for (std::size_t i = 0, j = star.size() - 1; i < star.size(); j = i++) {
          d = std::min(d, poly::distance_to_segment(c, star[j], star[i]));
        }
        if (d < 1e-9) continue;
        EXPECT_EQ(m.visible[g.index(ix, iy)], poly::contains(star, c) ? 1 : 0);
      }
    }
  }
}

TEST(Rasterize, AxisAlignedSquareHitsExactCells) {
  const GridSpec g{10, 10};  // 2 m cells, centers at odd coordinates
  const FovMask m = rasterize_polygon(
      FovPolygon{{Vec2(-3, -3), Vec2(3, -3), Vec2(3, 3), Vec2(-3, 3)}}, g);
  // Centers at -3, -1, 1, 3 on each axis, edges inclusive.
  EXPECT_EQ(m.count(), 16u);
  EXPECT_TRUE(m.visible[g.index(3, 3)]);
  EXPECT_TRUE(m.visible[g.index(6, 6)]);
  EXPECT_FALSE(m.visible[g.index(7, 6)]);
}

TEST(Rasterize, ConvexAreaWithinPerimeterBound) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(-60, 60);
  const GridSpec g{75, 256};
  const double cs = g.cell_size();
  for (int trial = 0; trial < 50; ++trial) {
    Points2 pts;
    for (int i = 0; i < 12; ++i) pts.emplace_back(u(rng), u(rng));
    const Points2 hull = convex_hull(pts);
    const double a = poly::area(hull);
    if (a < 100.0) continue;
    const double got = rasterize_polygon(FovPolygon{hull}, g).count() * cs * cs;
    EXPECT_LE(std::abs(got - a) / a, poly::perimeter(hull) * cs / a) << trial;
  }
}

TEST(PolarToMask, ConstantRangeIsADisk) {
  PolarFov fov;
  fov.max_range_per_bin.assign(720, 30.0);
  const GridSpec g{75, 128};
  const FovMask m = polar_to_mask(fov, g);
  for (int iy = 0; iy < g.resolution; ++iy) {
    for (int ix = 0; ix < g.resolution; ++ix) {
      EXPECT_EQ(m.visible[g.index(ix, iy)], g.cell_center(ix, iy).norm() <= 30.0 ? 1 : 0);
    }
  }
}

TEST(Rasterize, DegeneratePolygonIsEmpty) {
  EXPECT_EQ(rasterize_polygon(FovPolygon{{Vec2(0, 0), Vec2(1, 1)}}, GridSpec{10, 10}).count(), 0u);
}

}  // namespace
}  // namespace fovlab
