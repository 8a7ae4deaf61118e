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

#include "fovlab/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fovlab/errors.hpp"
#include "fovlab/json_util.hpp"

namespace fovlab {

void AnomalyModel::validate() const {
  if (!(tau_cell >= 0.0)) throw ConfigError("anomaly tau_cell must be >= 0");
  if (!(tau_image >= 0.0 && tau_image <= 1.0)) {
    throw ConfigError("anomaly tau_image must be in [0, 1]");
  }
  if (!(quantile > 0.0 && quantile < 1.0)) {
    throw ConfigError("anomaly quantile must be in (0, 1)");
  }
}

nlohmann::json anomaly_to_json(const AnomalyModel& m) {
  return {{"tau_cell", m.tau_cell},
          {"tau_image", m.tau_image},
          {"quantile", m.quantile},
          {"calibration_size", m.calibration_size}};
}

AnomalyModel anomaly_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "anomaly";
  jsonutil::check_keys(j, {"tau_cell", "tau_image", "quantile", "calibration_size"}, where);
  AnomalyModel m;
  jsonutil::read(j, "tau_cell", m.tau_cell, where);
  jsonutil::read(j, "tau_image", m.tau_image, where);
  jsonutil::read(j, "quantile", m.quantile, where);
  jsonutil::read(j, "calibration_size", m.calibration_size, where);
  m.validate();
  return m;
}

double anomaly_score(const ConfidenceMap& conf, double tau_cell) {
  if (conf.sigma.empty()) return 0.0;
  const auto above = std::count_if(conf.sigma.begin(), conf.sigma.end(),
                                   [&](double s) { return s > tau_cell; });
  return static_cast<double>(above) / static_cast<double>(conf.sigma.size());
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty set");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile must be in (0, 1)");
  const double n = static_cast<double>(values.size());
  // The small slack keeps q * n from rounding up past an exact integer rank.
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  auto it = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), it, values.end());
  return *it;
}

AnomalyModel calibrate(std::span<const ConfidenceMap> benign, double q) {
  if (benign.size() < kMinCalibrationMaps) {
    throw DataError("calibration needs at least " + std::to_string(kMinCalibrationMaps) +
                    " benign maps, got " + std::to_string(benign.size()));
  }
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("calibration quantile must be in (0, 1)");
  std::vector<double> pooled;
  for (const auto& c : benign) pooled.insert(pooled.end(), c.sigma.begin(), c.sigma.end());
  AnomalyModel m;
  m.quantile = q;
  m.calibration_size = benign.size();
  m.tau_cell = nearest_rank_quantile(std::move(pooled), q);
  std::vector<double> scores;
  scores.reserve(benign.size());
  for (const auto& c : benign) scores.push_back(anomaly_score(c, m.tau_cell));
  m.tau_image = nearest_rank_quantile(std::move(scores), q);
  return m;
}

Detection detect(const ConfidenceMap& conf, const AnomalyModel& model) {
  Detection d;
  d.score = anomaly_score(conf, model.tau_cell);
  d.flagged = d.score > model.tau_image;
  return d;
}

RankTest mann_whitney_greater(std::span<const double> first,
                              std::span<const double> second) {
  const std::size_t n1 = first.size();
  const std::size_t n2 = second.size();
  if (n1 == 0 || n2 == 0) throw DataError("rank test needs two non-empty samples");
  struct Item {
    double v;
    bool from_first;
  };
  std::vector<Item> all;
  all.reserve(n1 + n2);
  for (double v : first) all.push_back({v, true});
  for (double v : second) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });

  const double n = static_cast<double>(n1 + n2);
  double rank_sum = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].from_first) rank_sum += mid;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  RankTest r;
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  r.u = rank_sum - a * (a + 1.0) / 2.0;
  const double mean = a * b / 2.0;
  const double var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    r.z = 0.0;
    r.p_value = r.u > mean ? 0.0 : 1.0;
    return r;
  }
  r.z = (r.u - mean - 0.5) / std::sqrt(var);
  r.p_value = 0.5 * std::erfc(r.z / std::sqrt(2.0));
  return r;
}

}  // namespace fovlab
