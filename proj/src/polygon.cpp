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

#include "fovlab/polygon.hpp"

#include <algorithm>
#include <cmath>

namespace fovlab::poly {

double signed_area(std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    s += ring[j].x() * ring[i].y() - ring[i].x() * ring[j].y();
  }
  return 0.5 * s;
}

double area(std::span<const Vec2> ring) { return std::abs(signed_area(ring)); }

double perimeter(std::span<const Vec2> ring) {
  double s = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    s += (ring[i] - ring[j]).norm();
  }
  return s;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double eps) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm() <= eps;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (a + t * ab - p).norm() <= eps;
}

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                        const Vec2& d) {
  const int o1 = sign(cross(a, b, c));
  const int o2 = sign(cross(a, b, d));
  const int o3 = sign(cross(c, d, a));
  const int o4 = sign(cross(c, d, b));
  if (o1 != o2 && o3 != o4) return true;
  auto within = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
           std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
  };
  if (o1 == 0 && within(a, b, c)) return true;
  if (o2 == 0 && within(a, b, d)) return true;
  if (o3 == 0 && within(c, d, a)) return true;
  if (o4 == 0 && within(c, d, b)) return true;
  return false;
}

bool contains(std::span<const Vec2> ring, const Vec2& p, double boundary_eps) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[j];
    const Vec2& b = ring[i];
    if (on_segment(a, b, p, boundary_eps)) return true;
    if ((b.y() > p.y()) != (a.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

bool is_simple(std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(a, b, ring[j], ring[(j + 1) % n])) return false;
    }
  }
  return true;
}

bool is_convex_ccw(std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (cross(ring[i], ring[(i + 1) % n], ring[(i + 2) % n]) <= 0.0) {
      return false;
    }
  }
  return signed_area(ring) > 0.0;
}

bool segment_hits_convex(const Vec2& a, const Vec2& b,
                         std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (segments_intersect(a, b, ring[j], ring[i])) return true;
  }
  // No edge contact: the segment is either fully inside or fully outside.
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (cross(ring[j], ring[i], a) < 0.0) return false;
  }
  return true;
}

std::optional<double> ray_hit(const Vec2& origin, const Vec2& dir,
                              const Vec2& a, const Vec2& b) {
  const Vec2 e = b - a;
  const double denom = dir.x() * e.y() - dir.y() * e.x();
  const Vec2 w = a - origin;
  if (denom == 0.0) {
    // Parallel. A collinear edge is met at its nearer endpoint.
    if (w.x() * dir.y() - w.y() * dir.x() != 0.0) return std::nullopt;
    const double dd = dir.squaredNorm();
    const double ta = w.dot(dir) / dd;
    const double tb = (b - origin).dot(dir) / dd;
    if (ta < 0.0 && tb < 0.0) return std::nullopt;
    if (ta <= 0.0 || tb <= 0.0) return 0.0;
    return std::min(ta, tb);
  }
  const double t = (w.x() * e.y() - w.y() * e.x()) / denom;
  const double u = (w.x() * dir.y() - w.y() * dir.x()) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

}  // namespace fovlab::poly
