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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace fovlab {

// Square sensor-centered raster over [-extent, extent]^2. Cell (ix, iy) is
// stored at index iy * resolution + ix; ix grows with x, iy grows with y.
struct GridSpec {
  double extent = 75.0;
  int resolution = 256;

  double cell_size() const { return 2.0 * extent / resolution; }
  std::size_t cells() const {
    return static_cast<std::size_t>(resolution) * resolution;
  }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * resolution + ix;
  }
  Eigen::Vector2d cell_center(int ix, int iy) const {
    const double cs = cell_size();
    return {(ix + 0.5) * cs - extent, (iy + 0.5) * cs - extent};
  }
  // Floor-based cell lookup. Points on the +extent edge or outside are dropped.
  std::optional<std::pair<int, int>> cell_of(double x, double y) const;

  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

// Quantized point counts; the network input.
struct BevImage {
  GridSpec spec;
  std::vector<std::uint32_t> counts;

  explicit BevImage(GridSpec s = {}) : spec(s), counts(s.cells(), 0) {}
  std::uint64_t total() const;
};

// Binary visibility raster; 1 = visible.
struct FovMask {
  GridSpec spec;
  std::vector<std::uint8_t> visible;

  explicit FovMask(GridSpec s = {}) : spec(s), visible(s.cells(), 0) {}
  std::size_t count() const;
  bool operator==(const FovMask&) const = default;
};

// Per-cell visibility probability in [0, 1].
struct ProbMap {
  GridSpec spec;
  std::vector<double> values;

  explicit ProbMap(GridSpec s = {}) : spec(s), values(s.cells(), 0.0) {}
};

// Per-cell standard deviation across Monte Carlo dropout passes.
struct ConfidenceMap {
  GridSpec spec;
  std::vector<double> sigma;

  explicit ConfidenceMap(GridSpec s = {}) : spec(s), sigma(s.cells(), 0.0) {}
};

}  // namespace fovlab
