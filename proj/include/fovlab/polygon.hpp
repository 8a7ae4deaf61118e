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

#include <optional>
#include <span>

#include "fovlab/geometry.hpp"

namespace fovlab::poly {

// z-component of (b - a) x (c - a).
inline double cross(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Shoelace; positive for counterclockwise vertex order.
double signed_area(std::span<const Vec2> ring);
double area(std::span<const Vec2> ring);
double perimeter(std::span<const Vec2> ring);

// True when p lies on the closed segment [a, b] within `eps`.
bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p,
                double eps = 1e-12);

// Closed-segment intersection test; touching counts.
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                        const Vec2& d);

// Even-odd point-in-polygon; points on the boundary count as inside.
bool contains(std::span<const Vec2> ring, const Vec2& p,
              double boundary_eps = 1e-9);

// Non-adjacent edges never touch.
bool is_simple(std::span<const Vec2> ring);
bool is_convex_ccw(std::span<const Vec2> ring);

// Does the closed segment [a, b] meet the closed convex polygon?
bool segment_hits_convex(const Vec2& a, const Vec2& b,
                         std::span<const Vec2> ring);

// Smallest t >= 0 with origin + t*dir on segment [a, b].
std::optional<double> ray_hit(const Vec2& origin, const Vec2& dir,
                              const Vec2& a, const Vec2& b);

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace fovlab::poly
