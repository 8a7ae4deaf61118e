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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fovlab/attacks.hpp"
#include "fovlab/geometry.hpp"
#include "fovlab/grid.hpp"
#include "fovlab/scene.hpp"
#include "fovlab/segnet/train.hpp"

namespace fovlab {

// Paths are relative to the dataset root.
struct FrameRecord {
  std::string id;
  std::string cloud;
  std::string mask;
  std::string scene;
};

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names = {"train", "val", "test"};
  return names;
}

struct Manifest {
  SceneFamily family;
  LidarModel lidar;
  GridSpec grid;
  std::uint64_t seed = 0;
  std::optional<AttackSpec> attack;  // set on adversarial variants
  double attack_fraction = 0.0;      // share of frames carrying spoofed points
  std::map<std::string, std::vector<FrameRecord>> splits;

  std::size_t frame_count() const;
  const std::vector<FrameRecord>& split(const std::string& name) const;
};

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const std::filesystem::path& root, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& root);

struct SynthOptions {
  SceneFamily family;
  LidarModel lidar;
  GridSpec grid;
  int n_train = 400;
  int n_val = 100;
  int n_test = 100;
  std::uint64_t seed = 0;
};

struct Frame {
  Scene scene;
  PointCloud cloud;
  FovMask mask;  // ground truth at the manifest grid
};

// Deterministic frame synthesis; the split label and index select the seeds.
Frame synthesize_frame(const SynthOptions& opt, const std::string& split, int index);

// Writes clouds/, masks/, scenes/ and manifest.json under `root`.
Manifest synthesize_dataset(const std::filesystem::path& root, const SynthOptions& opt);

Frame load_frame(const std::filesystem::path& root, const Manifest& m,
                 const FrameRecord& rec);

// Ground truth at `grid`: the stored mask when grids agree, else recomputed
// from the stored scene.
FovMask frame_truth(const Frame& frame, const LidarModel& lidar, const GridSpec& grid);

// Spoofed copy of a dataset. Each frame is attacked with probability
// `fraction` (1 attacks every frame); masks and scenes are copied unchanged.
Manifest attack_dataset(const std::filesystem::path& src, const std::filesystem::path& dst,
                        const AttackSpec& attack, double fraction = 1.0,
                        std::uint64_t seed = 0);

// Per-frame attack seed so that spoofing is independent of processing order.
std::uint64_t frame_attack_seed(std::uint64_t seed, const std::string& frame_id);

// Loads a split as network samples at `net_grid`.
std::vector<segnet::Sample> load_samples(const std::filesystem::path& root,
                                         const Manifest& m, const std::string& split,
                                         const FilterSpec& filter, const GridSpec& net_grid);

// Refuses to reuse a non-empty directory unless `force` is set.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

}  // namespace fovlab
