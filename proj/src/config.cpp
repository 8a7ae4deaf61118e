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

#include "fovlab/config.hpp"

#include <fstream>

#include "fovlab/errors.hpp"
#include "fovlab/json_util.hpp"

namespace fovlab {

namespace {

template <typename R>
nlohmann::json range_json(const R& r) {
  return nlohmann::json::array({r.min, r.max});
}

template <typename R>
void read_range(const nlohmann::json& j, std::string_view key, R& out,
                std::string_view where) {
  const std::string k(key);
  if (!j.contains(k)) return;
  const auto& v = j.at(k);
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(std::string(where) + "." + k + ": expected [min, max]");
  }
  try {
    v.at(0).get_to(out.min);
    v.at(1).get_to(out.max);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(where) + "." + k + ": " + e.what());
  }
}

}  // namespace

nlohmann::json grid_to_json(const GridSpec& g) {
  return {{"extent", g.extent}, {"resolution", g.resolution}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  jsonutil::check_keys(j, {"extent", "resolution"}, "grid");
  GridSpec g;
  jsonutil::read(j, "extent", g.extent, "grid");
  jsonutil::read(j, "resolution", g.resolution, "grid");
  g.validate();
  return g;
}

nlohmann::json filter_to_json(const FilterSpec& f) {
  return {{"max_range", f.max_range}, {"z_min", f.z_min}, {"z_max", f.z_max}};
}

FilterSpec filter_from_json(const nlohmann::json& j) {
  jsonutil::check_keys(j, {"max_range", "z_min", "z_max"}, "filter");
  FilterSpec f;
  jsonutil::read(j, "max_range", f.max_range, "filter");
  jsonutil::read(j, "z_min", f.z_min, "filter");
  jsonutil::read(j, "z_max", f.z_max, "filter");
  f.validate();
  return f;
}

nlohmann::json lidar_to_json(const LidarModel& m) {
  return {{"n_beams", m.n_beams},
          {"max_range", m.max_range},
          {"range_noise_sigma", m.range_noise_sigma},
          {"dropout_prob", m.dropout_prob}};
}

LidarModel lidar_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "lidar";
  jsonutil::check_keys(j, {"n_beams", "max_range", "range_noise_sigma", "dropout_prob"},
                       where);
  LidarModel m;
  jsonutil::read(j, "n_beams", m.n_beams, where);
  jsonutil::read(j, "max_range", m.max_range, where);
  jsonutil::read(j, "range_noise_sigma", m.range_noise_sigma, where);
  jsonutil::read(j, "dropout_prob", m.dropout_prob, where);
  m.validate();
  return m;
}

nlohmann::json family_to_json(const SceneFamily& f) {
  return {{"name", f.name},
          {"obstacle_count", range_json(f.obstacle_count)},
          {"obstacle_size", range_json(f.obstacle_size)},
          {"perimeter", range_json(f.perimeter)},
          {"bounds", f.bounds},
          {"sensor_clearance", f.sensor_clearance},
          {"seed", f.seed}};
}

SceneFamily family_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "family";
  if (j.is_string()) return SceneFamily::preset(j.get<std::string>());
  jsonutil::check_keys(j,
                       {"name", "obstacle_count", "obstacle_size", "perimeter", "bounds",
                        "sensor_clearance", "seed"},
                       where);
  std::string name = "outdoor-sparse";
  jsonutil::read(j, "name", name, where);
  SceneFamily f = SceneFamily::preset(name);
  read_range(j, "obstacle_count", f.obstacle_count, where);
  read_range(j, "obstacle_size", f.obstacle_size, where);
  read_range(j, "perimeter", f.perimeter, where);
  jsonutil::read(j, "bounds", f.bounds, where);
  jsonutil::read(j, "sensor_clearance", f.sensor_clearance, where);
  jsonutil::read(j, "seed", f.seed, where);
  f.validate();
  return f;
}

void ExperimentConfig::validate() const {
  family.validate();
  lidar.validate();
  grid.validate();
  filter.validate();
  if (attack) attack->validate();
  if (defense) defense->validate();
  net.validate();
  train.validate();
  if (frames.train < 0 || frames.val < 0 || frames.test < 0) {
    throw ConfigError("frame counts must be non-negative");
  }
  if (estimators.n_bins < 8) throw ConfigError("estimators.n_bins must be >= 8");
  if (estimators.hull_k < 3) throw ConfigError("estimators.hull_k must be >= 3");
  if (estimators.mcd_passes < 1) throw ConfigError("estimators.mcd_passes must be >= 1");
  if (!(estimators.threshold > 0.0 && estimators.threshold < 1.0)) {
    throw ConfigError("estimators.threshold must be in (0, 1)");
  }
  if (!(estimators.quantile > 0.0 && estimators.quantile < 1.0)) {
    throw ConfigError("estimators.quantile must be in (0, 1)");
  }
}

nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j = {
      {"family", family_to_json(cfg.family)},
      {"lidar", lidar_to_json(cfg.lidar)},
      {"grid", grid_to_json(cfg.grid)},
      {"filter", filter_to_json(cfg.filter)},
      {"net", segnet::config_to_json(cfg.net)},
      {"train", segnet::train_config_to_json(cfg.train)},
      {"frames", {{"train", cfg.frames.train}, {"val", cfg.frames.val},
                  {"test", cfg.frames.test}}},
      {"estimators", {{"n_bins", cfg.estimators.n_bins},
                      {"hull_k", cfg.estimators.hull_k},
                      {"mcd_passes", cfg.estimators.mcd_passes},
                      {"threshold", cfg.estimators.threshold},
                      {"quantile", cfg.estimators.quantile}}},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir}};
  if (cfg.attack) j["attack"] = attack_to_json(*cfg.attack);
  if (cfg.defense) j["defense"] = defense_to_json(*cfg.defense);
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "config";
  jsonutil::check_keys(j,
                       {"family", "lidar", "grid", "filter", "attack", "defense", "net",
                        "train", "frames", "estimators", "seed", "output_dir"},
                       where);
  ExperimentConfig cfg;
  if (j.contains("family")) cfg.family = family_from_json(j.at("family"));
  if (j.contains("lidar")) cfg.lidar = lidar_from_json(j.at("lidar"));
  if (j.contains("grid")) cfg.grid = grid_from_json(j.at("grid"));
  if (j.contains("filter")) cfg.filter = filter_from_json(j.at("filter"));
  if (j.contains("attack")) cfg.attack = attack_from_json(j.at("attack"));
  if (j.contains("defense")) cfg.defense = defense_from_json(j.at("defense"));
  if (j.contains("net")) cfg.net = segnet::config_from_json(j.at("net"));
  if (j.contains("train")) cfg.train = segnet::train_config_from_json(j.at("train"));
  if (j.contains("frames")) {
    const auto& f = j.at("frames");
    jsonutil::check_keys(f, {"train", "val", "test"}, "frames");
    jsonutil::read(f, "train", cfg.frames.train, "frames");
    jsonutil::read(f, "val", cfg.frames.val, "frames");
    jsonutil::read(f, "test", cfg.frames.test, "frames");
  }
  if (j.contains("estimators")) {
    const auto& e = j.at("estimators");
    constexpr std::string_view ew = "estimators";
    jsonutil::check_keys(e, {"n_bins", "hull_k", "mcd_passes", "threshold", "quantile"}, ew);
    jsonutil::read(e, "n_bins", cfg.estimators.n_bins, ew);
    jsonutil::read(e, "hull_k", cfg.estimators.hull_k, ew);
    jsonutil::read(e, "mcd_passes", cfg.estimators.mcd_passes, ew);
    jsonutil::read(e, "threshold", cfg.estimators.threshold, ew);
    jsonutil::read(e, "quantile", cfg.estimators.quantile, ew);
  }
  jsonutil::read(j, "seed", cfg.seed, where);
  jsonutil::read(j, "output_dir", cfg.output_dir, where);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

}  // namespace fovlab
