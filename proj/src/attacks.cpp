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

#include "fovlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "fovlab/errors.hpp"
#include "fovlab/json_util.hpp"
#include "fovlab/random.hpp"

namespace fovlab {

namespace {

void check_budget(const AttackSpec& spec) {
  if (spec.n_points > spec.budget) {
    throw ConfigError("attack n_points " + std::to_string(spec.n_points) +
                      " exceeds budget " + std::to_string(spec.budget));
  }
}

PointCloud inject(const PointCloud& cloud, const Points2& spoofed) {
  Points3 bev;
  bev.reserve(spoofed.size());
  for (const auto& p : spoofed) bev.emplace_back(p.x(), p.y(), 0.0);
  PointCloud out = cloud;
  const Points3 sensor = unproject_from_bev(bev, cloud.pose);
  out.points.insert(out.points.end(), sensor.begin(), sensor.end());
  return out;
}

// Uniform grid hash with cell size = radius; neighbours lie in the 3x3 block.
std::vector<std::vector<std::size_t>> radius_neighbors(const Points2& pts,
                                                       double radius) {
  auto key = [&](const Vec2& p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x() / radius));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y() / radius));
    return std::make_pair(cx, cy);
  };
  auto pack = [](std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^
           (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto [cx, cy] = key(pts[i]);
    buckets[pack(cx, cy)].push_back(i);
  }
  const double r2 = radius * radius;
  std::vector<std::vector<std::size_t>> nbrs(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto [cx, cy] = key(pts[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = buckets.find(pack(cx + dx, cy + dy));
        if (it == buckets.end()) continue;
        for (std::size_t j : it->second) {
          if (j != i && (pts[j] - pts[i]).squaredNorm() <= r2) {
            nbrs[i].push_back(j);
          }
        }
      }
    }
    std::sort(nbrs[i].begin(), nbrs[i].end());
  }
  return nbrs;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

void AttackSpec::validate() const {
  if (budget < 0) throw ConfigError("attack budget must be >= 0");
  if (n_points < 0) throw ConfigError("attack n_points must be >= 0");
  check_budget(*this);
  if (!(cluster_sigma >= 0.0)) throw ConfigError("attack cluster_sigma must be >= 0");
  if (!(bounds > 0.0)) throw ConfigError("attack bounds must be > 0");
}

void DefenseSpec::validate() const {
  if (!(isolation_radius > 0.0)) throw ConfigError("defense isolation_radius must be > 0");
  if (min_neighbors <= 0) throw ConfigError("defense min_neighbors must be > 0");
  if (cluster_min_size <= 0) throw ConfigError("defense cluster_min_size must be > 0");
  if (!(max_range > 0.0)) throw ConfigError("defense max_range must be > 0");
}

PointCloud spoof_cluster(const PointCloud& cloud, const AttackSpec& spec) {
  if (spec.kind != AttackKind::kCluster) {
    throw ConfigError("spoof_cluster requires a cluster attack spec");
  }
  spec.validate();
  Rng rng(derive_seed(spec.seed, {label_hash("cluster")}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Points2 spoofed;
  for (int i = 0; i < spec.n_points; ++i) {
    const double dx = gauss(rng);
    const double dy = gauss(rng);
    spoofed.push_back(spec.cluster_center + spec.cluster_sigma * Vec2(dx, dy));
  }
  return inject(cloud, spoofed);
}

PointCloud spoof_uniform(const PointCloud& cloud, const AttackSpec& spec) {
  if (spec.kind != AttackKind::kUniform) {
    throw ConfigError("spoof_uniform requires a uniform attack spec");
  }
  spec.validate();
  Rng rng(derive_seed(spec.seed, {label_hash("uniform")}));
  std::uniform_real_distribution<double> coord(-spec.bounds, spec.bounds);
  Points2 spoofed;
  for (int i = 0; i < spec.n_points; ++i) {
    const double x = coord(rng);
    const double y = coord(rng);
    spoofed.emplace_back(x, y);
  }
  return inject(cloud, spoofed);
}

PointCloud spoof(const PointCloud& cloud, const AttackSpec& spec) {
  return spec.kind == AttackKind::kCluster ? spoof_cluster(cloud, spec)
                                           : spoof_uniform(cloud, spec);
}

std::vector<std::size_t> defend_keep(const PointCloud& cloud,
                                     const DefenseSpec& spec) {
  spec.validate();
  const Points2 all = planar(project_to_bev(cloud));

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!spec.enable_range || all[i].norm() <= spec.max_range) idx.push_back(i);
  }
  if (!spec.enable_isolation && !spec.enable_cluster) return idx;

  Points2 pts;
  pts.reserve(idx.size());
  for (std::size_t i : idx) pts.push_back(all[i]);
  const auto nbrs = radius_neighbors(pts, spec.isolation_radius);
  std::vector<char> alive(pts.size(), 1);

  if (spec.enable_isolation) {
    std::vector<int> degree(pts.size());
    std::vector<std::size_t> queue;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      degree[i] = static_cast<int>(nbrs[i].size());
      if (degree[i] < spec.min_neighbors) {
        alive[i] = 0;
        queue.push_back(i);
      }
    }
    while (!queue.empty()) {
      const std::size_t i = queue.back();
      queue.pop_back();
      for (std::size_t j : nbrs[i]) {
        if (alive[j] && --degree[j] < spec.min_neighbors) {
          alive[j] = 0;
          queue.push_back(j);
        }
      }
    }
  }

  if (spec.enable_cluster) {
    std::vector<std::size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!alive[i]) continue;
      for (std::size_t j : nbrs[i]) {
        if (alive[j]) {
          const auto a = find_root(parent, i);
          const auto b = find_root(parent, j);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
      }
    }
    std::vector<int> size(pts.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (alive[i]) ++size[find_root(parent, i)];
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (alive[i] && size[find_root(parent, i)] < spec.cluster_min_size) {
        alive[i] = 0;
      }
    }
  }

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (alive[i]) keep.push_back(idx[i]);
  }
  return keep;
}

PointCloud defend(const PointCloud& cloud, const DefenseSpec& spec) {
  PointCloud out;
  out.pose = cloud.pose;
  out.frame_id = cloud.frame_id;
  for (std::size_t i : defend_keep(cloud, spec)) out.points.push_back(cloud.points[i]);
  return out;
}

PointCloud adaptive_spoof(const PointCloud& cloud, const DefenseSpec& defense,
                          const AttackSpec& spec) {
  if (spec.kind != AttackKind::kCluster) {
    throw ConfigError("adaptive_spoof requires a cluster attack spec");
  }
  spec.validate();
  if (!defense.any_enabled()) return spoof_cluster(cloud, spec);
  defense.validate();

  int group = 1;
  if (defense.enable_cluster) group = std::max(group, defense.cluster_min_size);
  if (defense.enable_isolation) group = std::max(group, defense.min_neighbors + 1);
  if (group > spec.budget || (spec.n_points > 0 && spec.n_points < group)) {
    throw ConfigError("adaptive attack infeasible: mini-clusters need " +
                      std::to_string(group) + " points but only " +
                      std::to_string(std::min(spec.n_points, spec.budget)) +
                      " are available");
  }

  const bool linked = defense.enable_isolation || defense.enable_cluster;
  const double radius = linked ? 0.45 * defense.isolation_radius : 0.0;
  if (defense.enable_range && !(defense.max_range > radius)) {
    throw ConfigError("adaptive attack infeasible: max_range below mini-cluster radius");
  }

  Rng rng(derive_seed(spec.seed, {label_hash("adaptive")}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int groups = spec.n_points / group;
  Points2 spoofed;
  for (int g = 0; g < groups; ++g) {
    const int size = group + (g < spec.n_points % group ? 1 : 0);
    const double gx = gauss(rng);
    const double gy = gauss(rng);
    Vec2 center = spec.cluster_center + spec.cluster_sigma * Vec2(gx, gy);
    if (defense.enable_range) {
      const double limit = defense.max_range - radius;
      if (center.norm() > limit) center *= limit / center.norm();
    }
    for (int i = 0; i < size; ++i) {
      const double r = radius * std::sqrt(unit(rng));
      const double a = 2.0 * std::numbers::pi * unit(rng);
      spoofed.push_back(center + r * Vec2(std::cos(a), std::sin(a)));
    }
  }
  return inject(cloud, spoofed);
}

nlohmann::json attack_to_json(const AttackSpec& spec) {
  return {{"kind", spec.kind == AttackKind::kCluster ? "cluster" : "uniform"},
          {"n_points", spec.n_points},
          {"budget", spec.budget},
          {"cluster_center", {spec.cluster_center.x(), spec.cluster_center.y()}},
          {"cluster_sigma", spec.cluster_sigma},
          {"bounds", spec.bounds},
          {"seed", spec.seed}};
}

AttackSpec attack_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "attack";
  jsonutil::check_keys(j, {"kind", "n_points", "budget", "cluster_center",
                           "cluster_sigma", "bounds", "seed"},
                       where);
  AttackSpec spec;
  std::string kind = "uniform";
  jsonutil::read(j, "kind", kind, where);
  if (kind == "cluster") {
    spec.kind = AttackKind::kCluster;
  } else if (kind == "uniform") {
    spec.kind = AttackKind::kUniform;
  } else {
    throw ConfigError("attack.kind must be \"cluster\" or \"uniform\"");
  }
  jsonutil::read(j, "n_points", spec.n_points, where);
  jsonutil::read(j, "budget", spec.budget, where);
  std::vector<double> center{spec.cluster_center.x(), spec.cluster_center.y()};
  jsonutil::read(j, "cluster_center", center, where);
  if (center.size() != 2) throw ConfigError("attack.cluster_center must be [x, y]");
  spec.cluster_center = Vec2(center[0], center[1]);
  jsonutil::read(j, "cluster_sigma", spec.cluster_sigma, where);
  jsonutil::read(j, "bounds", spec.bounds, where);
  jsonutil::read(j, "seed", spec.seed, where);
  spec.validate();
  return spec;
}

nlohmann::json defense_to_json(const DefenseSpec& spec) {
  return {{"isolation_radius", spec.isolation_radius},
          {"min_neighbors", spec.min_neighbors},
          {"cluster_min_size", spec.cluster_min_size},
          {"max_range", spec.max_range},
          {"enable_range", spec.enable_range},
          {"enable_isolation", spec.enable_isolation},
          {"enable_cluster", spec.enable_cluster}};
}

DefenseSpec defense_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "defense";
  jsonutil::check_keys(j, {"isolation_radius", "min_neighbors", "cluster_min_size",
                           "max_range", "enable_range", "enable_isolation",
                           "enable_cluster"},
                       where);
  DefenseSpec spec;
  jsonutil::read(j, "isolation_radius", spec.isolation_radius, where);
  jsonutil::read(j, "min_neighbors", spec.min_neighbors, where);
  jsonutil::read(j, "cluster_min_size", spec.cluster_min_size, where);
  jsonutil::read(j, "max_range", spec.max_range, where);
  jsonutil::read(j, "enable_range", spec.enable_range, where);
  jsonutil::read(j, "enable_isolation", spec.enable_isolation, where);
  jsonutil::read(j, "enable_cluster", spec.enable_cluster, where);
  spec.validate();
  return spec;
}

}  // namespace fovlab
