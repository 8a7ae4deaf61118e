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

#include <span>
#include <vector>

#include "fovlab/geometry.hpp"
#include "fovlab/grid.hpp"

namespace fovlab {

// Maximum observed range per azimuth bin. Bin i covers
// [2*pi*i/n, 2*pi*(i+1)/n).
struct PolarFov {
  std::vector<double> max_range_per_bin;

  int n_bins() const { return static_cast<int>(max_range_per_bin.size()); }
  int bin_of(double azimuth) const;
};

struct FovPolygon {
  Points2 vertices;  // sensor frame, meters
};

// Empty bins keep range 0 (invisible).
PolarFov raytrace_quantized(std::span<const Vec2> points, int n_bins = 360);

// Connects azimuth-sorted points, keeping the farthest point among azimuths
// equal within 1e-9. Throws DataError("degenerate input") with < 3 azimuths.
FovPolygon raytrace_continuous(std::span<const Vec2> points);

// k-nearest-neighbour gift wrapping: walks the boundary counterclockwise
// from the lowest point, each step taking the sharpest right turn among the
// k nearest unused points that keeps the boundary simple. k grows by one
// whenever a walk gets stuck or leaves points outside.
// Throws DataError for collinear input or when k exceeds the point count.
FovPolygon concave_hull(std::span<const Vec2> points, int k = 16);

// Even-odd fill on cell centers; centers on the boundary are visible.
FovMask rasterize_polygon(const FovPolygon& polygon, const GridSpec& spec);

// Cell visible iff its center range <= the range of its azimuth bin.
FovMask polar_to_mask(const PolarFov& fov, const GridSpec& spec);

}  // namespace fovlab
