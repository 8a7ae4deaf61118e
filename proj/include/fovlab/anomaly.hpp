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
#include <span>
#include <vector>

#include "json.hpp"

#include "fovlab/grid.hpp"

namespace fovlab {

inline constexpr std::size_t kMinCalibrationMaps = 20;

struct AnomalyModel {
  double tau_cell = 0.0;   // per-cell sigma threshold
  double tau_image = 0.0;  // threshold on the exceedance fraction
  double quantile = 0.99;
  std::size_t calibration_size = 0;

  void validate() const;
};

nlohmann::json anomaly_to_json(const AnomalyModel& m);
AnomalyModel anomaly_from_json(const nlohmann::json& j);

// Fraction of cells whose sigma strictly exceeds tau_cell.
double anomaly_score(const ConfidenceMap& conf, double tau_cell);

// ceil(q * n)-th smallest value (1-based, at least the first).
double nearest_rank_quantile(std::vector<double> values, double q);

// Throws DataError on fewer than kMinCalibrationMaps maps and ConfigError
// unless 0 < q < 1.
AnomalyModel calibrate(std::span<const ConfidenceMap> benign, double q = 0.99);

struct Detection {
  double score = 0.0;
  bool flagged = false;
};

Detection detect(const ConfidenceMap& conf, const AnomalyModel& model);

struct RankTest {
  double u = 0.0;        // Mann-Whitney U of the first sample
  double z = 0.0;
  double p_value = 1.0;  // one-sided: first sample stochastically greater
};

// Normal approximation with tie correction and continuity correction.
RankTest mann_whitney_greater(std::span<const double> first,
                              std::span<const double> second);

}  // namespace fovlab
