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

// Brute-force reference implementations used as test oracles. They follow
// the metric definitions directly and make no attempt at efficiency.

#include <cstdint>
#include <set>
#include <span>
#include <vector>

namespace fovlab::oracle {

struct Scores {
  double precision, recall, accuracy, f1;
};

inline Scores metrics(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) tp += 1;
    if (pred[i] && !truth[i]) fp += 1;
    if (!pred[i] && !truth[i]) tn += 1;
    if (!pred[i] && truth[i]) fn += 1;
  }
  Scores s{};
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  s.accuracy = pred.empty() ? 0.0 : (tp + tn) / static_cast<double>(pred.size());
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

// For every distinct score t, from high to low, predict score >= t and add
// (R - R_prev) * P. Quadratic in the number of cells.
inline double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  double positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;
  double area = 0, prev = 0;
  for (double t : thresholds) {
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        predicted += 1;
        tp += labels[i] ? 1 : 0;
      }
    }
    const double r = tp / positives;
    area += (r - prev) * (tp / predicted);
    prev = r;
  }
  return area;
}

}  // namespace fovlab::oracle
