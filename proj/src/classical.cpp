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

#include "fovlab/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>

#include "fovlab/errors.hpp"
#include "fovlab/polygon.hpp"

namespace fovlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// CCW angle from `back` to `v`, in (0, 2pi]. Going straight back maps to 2pi.
double turn_angle(const Vec2& back, const Vec2& v) {
  double a = std::atan2(back.x() * v.y() - back.y() * v.x(), back.dot(v));
  if (a <= 0.0) a += kTwoPi;
  return a;
}

std::optional<Points2> knn_walk(const Points2& pts, int k) {
  const std::size_t n = pts.size();
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (pts[i].y() < pts[first].y() ||
        (pts[i].y() == pts[first].y() && pts[i].x() < pts[first].x())) {
      first = i;
    }
  }

  std::vector<char> used(n, 0);
  std::vector<std::size_t> hull{first};
  used[first] = 1;
  Vec2 back(-1.0, 0.0);
  bool closed = false;

  std::vector<std::size_t> cand;
  std::vector<double> angle(n);
  cand.reserve(n);
  while (!closed) {
    const Vec2& cur = pts[hull.back()];
    cand.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i]) cand.push_back(i);
    }
    if (hull.size() >= 3) cand.push_back(first);
    if (cand.empty()) return std::nullopt;

    auto nearer = [&](std::size_t a, std::size_t b) {
      const double da = (pts[a] - cur).squaredNorm();
      const double db = (pts[b] - cur).squaredNorm();
      return da < db || (da == db && a < b);
    };
    const std::size_t kk = std::min<std::size_t>(k, cand.size());
    std::nth_element(cand.begin(), cand.begin() + (kk - 1), cand.end(), nearer);
    cand.resize(kk);
    for (std::size_t c : cand) angle[c] = turn_angle(back, pts[c] - cur);
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
      if (angle[a] != angle[b]) return angle[a] < angle[b];
      return nearer(a, b);
    });

    std::optional<std::size_t> chosen;
    const std::size_t h = hull.size();
    for (std::size_t c : cand) {
      const bool closing = c == first;
      bool crosses = false;
      // Skip the last edge (shares `cur`) and, when closing, the first edge.
      for (std::size_t m = closing ? 1 : 0; m + 2 < h && !crosses; ++m) {
        crosses = poly::segments_intersect(cur, pts[c], pts[hull[m]],
                                           pts[hull[m + 1]]);
      }
      if (!crosses) {
        chosen = c;
        break;
      }
    }
    if (!chosen) return std::nullopt;
    if (*chosen == first) {
      closed = true;
      break;
    }
    back = cur - pts[*chosen];
    hull.push_back(*chosen);
    used[*chosen] = 1;
  }

  Points2 ring;
  ring.reserve(hull.size());
  for (std::size_t i : hull) ring.push_back(pts[i]);
  if (ring.size() < 3) return std::nullopt;
  for (const auto& p : pts) {
    if (!poly::contains(ring, p)) return std::nullopt;
  }
  return ring;
}

}  // namespace

int PolarFov::bin_of(double azimuth) const {
  const int n = n_bins();
  int b = static_cast<int>(std::floor(normalize_azimuth(azimuth) / (kTwoPi / n)));
  return std::clamp(b, 0, n - 1);
}

PolarFov raytrace_quantized(std::span<const Vec2> points, int n_bins) {
  if (n_bins < 8) throw ConfigError("raytrace n_bins must be >= 8");
  PolarFov fov;
  fov.max_range_per_bin.assign(n_bins, 0.0);
  for (const auto& p : to_polar(points)) {
    double& r = fov.max_range_per_bin[fov.bin_of(p.azimuth)];
    r = std::max(r, p.range);
  }
  return fov;
}

FovPolygon raytrace_continuous(std::span<const Vec2> points) {
  auto polar = to_polar(points);
  std::sort(polar.begin(), polar.end(), [](const PolarPoint& a, const PolarPoint& b) {
    return a.azimuth < b.azimuth || (a.azimuth == b.azimuth && a.range > b.range);
  });
  std::vector<PolarPoint> kept;
  for (const auto& p : polar) {
    if (!kept.empty() && p.azimuth - kept.back().azimuth <= 1e-9) {
      kept.back().range = std::max(kept.back().range, p.range);
      continue;
    }
    kept.push_back(p);
  }
  // Wrap-around: azimuths near 2pi and near 0 describe the same direction.
  if (kept.size() > 1 &&
      kept.front().azimuth + kTwoPi - kept.back().azimuth <= 1e-9) {
    kept.front().range = std::max(kept.front().range, kept.back().range);
    kept.pop_back();
  }
  if (kept.size() < 3) throw DataError("degenerate input");
  return FovPolygon{from_polar(kept)};
}

FovPolygon concave_hull(std::span<const Vec2> points, int k) {
  if (k < 3) throw ConfigError("concave hull k must be >= 3");
  Points2 pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) {
    throw DataError("concave hull needs at least 3 distinct points");
  }
  const bool collinear = std::all_of(pts.begin() + 2, pts.end(), [&](const Vec2& p) {
    return poly::cross(pts[0], pts[1], p) == 0.0;
  });
  if (collinear) throw DataError("concave hull input is collinear");

  const int n = static_cast<int>(pts.size());
  for (int kk = std::min(k, n - 1); kk <= n - 1; ++kk) {
    if (auto ring = knn_walk(pts, kk)) return FovPolygon{std::move(*ring)};
  }
  throw DataError("concave hull did not close before k reached the point count (" +
                  std::to_string(n) + ")");
}

FovMask rasterize_polygon(const FovPolygon& polygon, const GridSpec& spec) {
  spec.validate();
  FovMask mask(spec);
  const auto& v = polygon.vertices;
  const std::size_t n = v.size();
  if (n < 3) return mask;
  const double cs = spec.cell_size();
  const double e = spec.extent;
  auto center_x = [&](int ix) { return (ix + 0.5) * cs - e; };

  auto mark_span = [&](int iy, double xl, double xr) {
    int lo = static_cast<int>(std::ceil((xl + e) / cs - 0.5));
    int hi = static_cast<int>(std::floor((xr + e) / cs - 0.5));
    lo = std::max(lo, 0);
    hi = std::min(hi, spec.resolution - 1);
    while (lo > 0 && center_x(lo - 1) >= xl) --lo;
    while (lo <= hi && center_x(lo) < xl) ++lo;
    while (hi < spec.resolution - 1 && center_x(hi + 1) <= xr) ++hi;
    while (hi >= lo && center_x(hi) > xr) --hi;
    for (int ix = lo; ix <= hi; ++ix) mask.visible[spec.index(ix, iy)] = 1;
  };

  std::vector<double> xs;
  for (int iy = 0; iy < spec.resolution; ++iy) {
    const double yc = (iy + 0.5) * cs - e;
    xs.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vec2& a = v[j];
      const Vec2& b = v[i];
      if ((a.y() > yc) != (b.y() > yc)) {
        xs.push_back(a.x() + (yc - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
      } else if (a.y() == yc && b.y() == yc) {
        mark_span(iy, std::min(a.x(), b.x()), std::max(a.x(), b.x()));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      mark_span(iy, xs[i], xs[i + 1]);
    }
  }
  // Vertices that coincide with cell centers (local maxima escape the fill).
  for (const auto& p : v) {
    if (auto cell = spec.cell_of(p.x(), p.y())) {
      if (spec.cell_center(cell->first, cell->second) == p) {
        mask.visible[spec.index(cell->first, cell->second)] = 1;
      }
    }
  }
  return mask;
}

FovMask polar_to_mask(const PolarFov& fov, const GridSpec& spec) {
  spec.validate();
  FovMask mask(spec);
  if (fov.n_bins() == 0) return mask;
  for (int iy = 0; iy < spec.resolution; ++iy) {
    for (int ix = 0; ix < spec.resolution; ++ix) {
      const Vec2 c = spec.cell_center(ix, iy);
      const double r = c.norm();
      const int b = r == 0.0 ? 0 : fov.bin_of(std::atan2(c.y(), c.x()));
      mask.visible[spec.index(ix, iy)] = r <= fov.max_range_per_bin[b] ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace fovlab
