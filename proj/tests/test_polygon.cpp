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
#include <random>

#include <gtest/gtest.h>

#include "fovlab/polygon.hpp"
#include "fovlab/random.hpp"

namespace fovlab {
namespace {

Points2 regular(int n, double r, const Vec2& c = Vec2::Zero(), double phase = 0.0) {
  Points2 out;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2 * std::numbers::pi * i / n;
    out.push_back(c + r * Vec2(std::cos(a), std::sin(a)));
  }
  return out;
}

TEST(Polygon, SquareAreaAndPerimeter) {
  const Points2 sq = {Vec2(0, 0), Vec2(2, 0), Vec2(2, 3), Vec2(0, 3)};
  EXPECT_DOUBLE_EQ(poly::signed_area(sq), 6.0);
  const Points2 cw(sq.rbegin(), sq.rend());
  EXPECT_DOUBLE_EQ(poly::signed_area(cw), -6.0);
  EXPECT_DOUBLE_EQ(poly::area(cw), 6.0);
  EXPECT_DOUBLE_EQ(poly::perimeter(sq), 10.0);
}

// Oracle: regular n-gon area (n/2) r^2 sin(2 pi / n).
TEST(Polygon, RegularPolygonAreaMatchesClosedForm) {
  for (int n = 3; n <= 40; ++n) {
    const double r = 1.0 + 0.1 * n;
    const double expected = 0.5 * n * r * r * std::sin(2 * std::numbers::pi / n);
    EXPECT_NEAR(poly::area(regular(n, r, Vec2(3, -4))), expected, 1e-10 * expected);
  }
}

TEST(Polygon, ContainsCountsBoundaryAsInside) {
  const Points2 sq = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  EXPECT_TRUE(poly::contains(sq, Vec2(0.5, 0.5)));
  EXPECT_TRUE(poly::contains(sq, Vec2(0.0, 0.5)));
  EXPECT_TRUE(poly::contains(sq, Vec2(1.0, 1.0)));
  EXPECT_FALSE(poly::contains(sq, Vec2(1.0001, 0.5)));
  EXPECT_FALSE(poly::contains(sq, Vec2(-0.5, -0.5)));
}

// Oracle: winding number of a simple polygon.
int winding(const Points2& ring, const Vec2& p) {
  int w = 0;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Vec2& a = ring[j];
    const Vec2& b = ring[i];
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && poly::cross(a, b, p) > 0) ++w;
    } else if (b.y() <= p.y() && poly::cross(a, b, p) < 0) {
      --w;
    }
  }
  return w;
}

TEST(Polygon, ContainsMatchesWindingNumberOnStarPolygon) {
  Points2 star;
  for (int i = 0; i < 10; ++i) {
    const double r = i % 2 ? 2.0 : 5.0;
    const double a = 2 * std::numbers::pi * i / 10;
    star.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  Rng rng(2);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int i = 0; i < 20000; ++i) {
    const Vec2 p(u(rng), u(rng));
    bool near_edge = false;
    for (std::size_t k = 0, j = star.size() - 1; k < star.size(); j = k++) {
      near_edge |= poly::distance_to_segment(p, star[j], star[k]) < 1e-6;
    }
    if (near_edge) continue;
    EXPECT_EQ(poly::contains(star, p), winding(star, p) != 0);
  }
}

TEST(Polygon, SegmentIntersectionCases) {
  EXPECT_TRUE(poly::segments_intersect(Vec2(0, 0), Vec2(2, 2), Vec2(0, 2), Vec2(2, 0)));
  EXPECT_FALSE(poly::segments_intersect(Vec2(0, 0), Vec2(1, 1), Vec2(2, 2), Vec2(3, 0)));
  // Touching endpoint counts.
  EXPECT_TRUE(poly::segments_intersect(Vec2(0, 0), Vec2(1, 0), Vec2(1, 0), Vec2(1, 5)));
  // Collinear overlap and collinear disjoint.
  EXPECT_TRUE(poly::segments_intersect(Vec2(0, 0), Vec2(2, 0), Vec2(1, 0), Vec2(3, 0)));
  EXPECT_FALSE(poly::segments_intersect(Vec2(0, 0), Vec2(1, 0), Vec2(2, 0), Vec2(3, 0)));
}

TEST(Polygon, SimpleAndConvexChecks) {
  const Points2 sq = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  const Points2 bow = {Vec2(0, 0), Vec2(1, 1), Vec2(1, 0), Vec2(0, 1)};
  EXPECT_TRUE(poly::is_simple(sq));
  EXPECT_FALSE(poly::is_simple(bow));
  EXPECT_TRUE(poly::is_convex_ccw(sq));
  EXPECT_FALSE(poly::is_convex_ccw(Points2(sq.rbegin(), sq.rend())));
  const Points2 dart = {Vec2(0, 0), Vec2(2, 1), Vec2(4, 0), Vec2(2, 3)};
  EXPECT_TRUE(poly::is_simple(dart));
  EXPECT_FALSE(poly::is_convex_ccw(dart));
}

// Oracle: analytic intersection of a ray with the line x = d.
TEST(Polygon, RayHitAnalytic) {
  const Vec2 a(10, -5), b(10, 5);
  auto t = poly::ray_hit(Vec2::Zero(), Vec2(1, 0), a, b);
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, 10.0, 1e-12);
  for (double ang = -0.4; ang <= 0.4; ang += 0.05) {
    auto s = poly::ray_hit(Vec2::Zero(), Vec2(std::cos(ang), std::sin(ang)), a, b);
    ASSERT_TRUE(s);
    EXPECT_NEAR(*s, 10.0 / std::cos(ang), 1e-9);
  }
  EXPECT_FALSE(poly::ray_hit(Vec2::Zero(), Vec2(-1, 0), a, b));
  EXPECT_FALSE(poly::ray_hit(Vec2::Zero(), Vec2(0, 1), a, b));
}

TEST(Polygon, SegmentHitsConvex) {
  const Points2 sq = {Vec2(4, -1), Vec2(6, -1), Vec2(6, 1), Vec2(4, 1)};
  EXPECT_TRUE(poly::segment_hits_convex(Vec2(0, 0), Vec2(10, 0), sq));
  EXPECT_TRUE(poly::segment_hits_convex(Vec2(0, 0), Vec2(5, 0), sq));   // ends inside
  EXPECT_TRUE(poly::segment_hits_convex(Vec2(0, 0), Vec2(4, 0), sq));   // ends on boundary
  EXPECT_FALSE(poly::segment_hits_convex(Vec2(0, 0), Vec2(3.9, 0), sq));
  EXPECT_FALSE(poly::segment_hits_convex(Vec2(0, 2), Vec2(10, 2), sq));
}

TEST(Polygon, DistanceToSegment) {
  EXPECT_DOUBLE_EQ(poly::distance_to_segment(Vec2(0, 1), Vec2(-1, 0), Vec2(1, 0)), 1.0);
  EXPECT_DOUBLE_EQ(poly::distance_to_segment(Vec2(3, 4), Vec2(-1, 0), Vec2(0, 0)), 5.0);
}

}  // namespace
}  // namespace fovlab
