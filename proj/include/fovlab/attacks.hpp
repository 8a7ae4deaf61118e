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

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "fovlab/geometry.hpp"

namespace fovlab {

enum class AttackKind { kCluster, kUniform };

// Spoofed returns are specified in the sensor-centered gravity-aligned (BEV)
// frame at z = 0 and mapped into the cloud's sensor frame on injection.
struct AttackSpec {
  AttackKind kind = AttackKind::kUniform;
  int n_points = 150;
  int budget = 150;
  Vec2 cluster_center = Vec2(20.0, 0.0);
  double cluster_sigma = 2.0;
  double bounds = 75.0;  // uniform support is the square [-bounds, bounds]^2
  std::uint64_t seed = 0;

  void validate() const;
};

struct DefenseSpec {
  double isolation_radius = 1.0;
  int min_neighbors = 2;
  int cluster_min_size = 5;
  double max_range = 75.0;
  bool enable_range = true;
  bool enable_isolation = true;
  bool enable_cluster = true;

  void validate() const;
  bool any_enabled() const {
    return enable_range || enable_isolation || enable_cluster;
  }
};

PointCloud spoof_cluster(const PointCloud& cloud, const AttackSpec& spec);
PointCloud spoof_uniform(const PointCloud& cloud, const AttackSpec& spec);

// Dispatches on spec.kind.
PointCloud spoof(const PointCloud& cloud, const AttackSpec& spec);

// Stages, in order: range gate; isolated-point removal (repeated until every
// survivor has >= min_neighbors neighbours within isolation_radius); removal
// of linkage components smaller than cluster_min_size. Idempotent.
PointCloud defend(const PointCloud& cloud, const DefenseSpec& spec);

// Indices of points that defend() keeps.
std::vector<std::size_t> defend_keep(const PointCloud& cloud,
                                     const DefenseSpec& spec);

// Cluster attack shaped to survive `defense`: spoofed points come in tight
// mini-clusters, each large enough to satisfy the neighbour and component
// thresholds, centered within max_range.
PointCloud adaptive_spoof(const PointCloud& cloud, const DefenseSpec& defense,
                          const AttackSpec& spec);

nlohmann::json attack_to_json(const AttackSpec& spec);
AttackSpec attack_from_json(const nlohmann::json& j);
nlohmann::json defense_to_json(const DefenseSpec& spec);
DefenseSpec defense_from_json(const nlohmann::json& j);

}  // namespace fovlab
