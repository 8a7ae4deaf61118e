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

#include "fovlab/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "fovlab/cloud_io.hpp"
#include "fovlab/config.hpp"
#include "fovlab/errors.hpp"
#include "fovlab/json_util.hpp"
#include "fovlab/mask_io.hpp"
#include "fovlab/parallel.hpp"
#include "fovlab/random.hpp"

namespace fovlab {

namespace fs = std::filesystem;

std::size_t Manifest::frame_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : splits) n += v.size();
  return n;
}

const std::vector<FrameRecord>& Manifest::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw DataError("manifest has no split \"" + name + "\"");
  return it->second;
}

nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [name, recs] : m.splits) {
    auto arr = nlohmann::json::array();
    for (const auto& r : recs) {
      arr.push_back({{"id", r.id}, {"cloud", r.cloud}, {"mask", r.mask}, {"scene", r.scene}});
    }
    splits[name] = std::move(arr);
  }
  nlohmann::json j = {{"format", "fovlab-dataset"},
                      {"version", 1},
                      {"family", family_to_json(m.family)},
                      {"lidar", lidar_to_json(m.lidar)},
                      {"grid", grid_to_json(m.grid)},
                      {"seed", m.seed},
                      {"splits", std::move(splits)}};
  if (m.attack) {
    j["attack"] = attack_to_json(*m.attack);
    j["attack_fraction"] = m.attack_fraction;
  }
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    jsonutil::check_keys(j,
                         {"format", "version", "family", "lidar", "grid", "seed", "splits",
                          "attack", "attack_fraction"},
                         "manifest");
    if (j.at("format") != "fovlab-dataset" || j.at("version") != 1) {
      throw DataError("manifest: unsupported format or version");
    }
    Manifest m;
    m.family = family_from_json(j.at("family"));
    m.lidar = lidar_from_json(j.at("lidar"));
    m.grid = grid_from_json(j.at("grid"));
    m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("attack")) {
      m.attack = attack_from_json(j.at("attack"));
      m.attack_fraction = j.value("attack_fraction", 1.0);
    }
    for (const auto& [name, arr] : j.at("splits").items()) {
      auto& recs = m.splits[name];
      for (const auto& r : arr) {
        recs.push_back({r.at("id").get<std::string>(), r.at("cloud").get<std::string>(),
                        r.at("mask").get<std::string>(), r.at("scene").get<std::string>()});
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const fs::path& root, const Manifest& m) {
  std::ofstream os(root / "manifest.json");
  if (!os) throw DataError("cannot write " + (root / "manifest.json").string());
  os << manifest_to_json(m).dump(2) << "\n";
}

Manifest load_manifest(const fs::path& root) {
  std::ifstream is(root / "manifest.json");
  if (!is) throw DataError("no manifest.json under " + root.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return manifest_from_json(j);
}

Frame synthesize_frame(const SynthOptions& opt, const std::string& split, int index) {
  const std::uint64_t frame_seed =
      derive_seed(opt.seed, {label_hash(split), static_cast<std::uint64_t>(index)});
  Frame f;
  f.scene = generate_scene(opt.family, derive_seed(frame_seed, {label_hash("scene")}));
  f.cloud = simulate_lidar(f.scene, opt.lidar, derive_seed(frame_seed, {label_hash("lidar")}));
  f.cloud.frame_id = index;
  f.mask = ground_truth_fov(f.scene, opt.lidar, opt.grid);
  return f;
}

namespace {

std::string frame_id(const std::string& split, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%05d", split.c_str(), index);
  return buf;
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace

Manifest synthesize_dataset(const fs::path& root, const SynthOptions& opt) {
  opt.family.validate();
  opt.lidar.validate();
  opt.grid.validate();
  fs::create_directories(root / "clouds");
  fs::create_directories(root / "masks");
  fs::create_directories(root / "scenes");
  Manifest m;
  m.family = opt.family;
  m.lidar = opt.lidar;
  m.grid = opt.grid;
  m.seed = opt.seed;
  const std::map<std::string, int> counts = {
      {"train", opt.n_train}, {"val", opt.n_val}, {"test", opt.n_test}};
  for (const auto& split : split_names()) {
    const int n = counts.at(split);
    auto& recs = m.splits[split];
    recs.resize(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      const int idx = static_cast<int>(i);
      const Frame f = synthesize_frame(opt, split, idx);
      const std::string id = frame_id(split, idx);
      FrameRecord rec{id, "clouds/" + id + ".fvpc", "masks/" + id + ".pgm",
                      "scenes/" + id + ".json"};
      save_cloud(root / rec.cloud, f.cloud);
      save_mask(root / rec.mask, f.mask);
      write_json_file(root / rec.scene, scene_to_json(f.scene));
      recs[i] = std::move(rec);
    });
  }
  save_manifest(root, m);
  return m;
}

Frame load_frame(const fs::path& root, const Manifest& m, const FrameRecord& rec) {
  Frame f;
  f.cloud = load_cloud(root / rec.cloud);
  f.mask = load_mask(root / rec.mask, m.grid);
  std::ifstream is(root / rec.scene);
  if (!is) throw DataError("cannot open " + (root / rec.scene).string());
  try {
    f.scene = scene_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed scene " + rec.scene + ": " + e.what());
  }
  return f;
}

FovMask frame_truth(const Frame& frame, const LidarModel& lidar, const GridSpec& grid) {
  if (frame.mask.spec == grid) return frame.mask;
  return ground_truth_fov(frame.scene, lidar, grid);
}

std::uint64_t frame_attack_seed(std::uint64_t seed, const std::string& frame_id) {
  return derive_seed(seed, {label_hash("attack"), label_hash(frame_id)});
}

Manifest attack_dataset(const fs::path& src, const fs::path& dst, const AttackSpec& attack,
                        double fraction, std::uint64_t seed) {
  attack.validate();
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("attack fraction must be in [0, 1]");
  }
  Manifest m = load_manifest(src);
  fs::create_directories(dst / "clouds");
  fs::create_directories(dst / "masks");
  fs::create_directories(dst / "scenes");
  for (const auto& [split, recs] : m.splits) {
    parallel_for(recs.size(), [&](std::size_t i) {
      const auto& rec = recs[i];
      PointCloud cloud = load_cloud(src / rec.cloud);
      const std::uint64_t fs_seed = frame_attack_seed(seed, rec.id);
      Rng pick(derive_seed(fs_seed, {label_hash("fraction")}));
      const bool hit =
          fraction >= 1.0 || std::uniform_real_distribution<double>(0.0, 1.0)(pick) < fraction;
      if (hit) {
        AttackSpec a = attack;
        a.seed = fs_seed;
        cloud = spoof(cloud, a);
      }
      save_cloud(dst / rec.cloud, cloud);
      fs::copy_file(src / rec.mask, dst / rec.mask, fs::copy_options::overwrite_existing);
      fs::copy_file(src / rec.scene, dst / rec.scene, fs::copy_options::overwrite_existing);
    });
  }
  m.attack = attack;
  m.attack->seed = seed;
  m.attack_fraction = fraction;
  save_manifest(dst, m);
  return m;
}

std::vector<segnet::Sample> load_samples(const fs::path& root, const Manifest& m,
                                         const std::string& split, const FilterSpec& filter,
                                         const GridSpec& net_grid) {
  const auto& recs = m.split(split);
  std::vector<segnet::Sample> out(recs.size());
  parallel_for(recs.size(), [&](std::size_t i) {
    const Frame f = load_frame(root, m, recs[i]);
    out[i] = segnet::make_sample(preprocess(f.cloud, filter, net_grid),
                                 frame_truth(f, m.lidar, net_grid));
  });
  return out;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw ConfigError("output directory " + dir.string() +
                        " is not empty; pass --force to overwrite");
    }
  }
  fs::create_directories(dir);
}

}  // namespace fovlab
