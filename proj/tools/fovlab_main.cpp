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

// fovlab: synthetic field-of-view estimation workbench.
//
// Exit codes: 0 ok, 2 usage or configuration error, 3 data error,
// 4 numeric failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fovlab/anomaly.hpp"
#include "fovlab/classical.hpp"
#include "fovlab/cloud_io.hpp"
#include "fovlab/config.hpp"
#include "fovlab/dataset.hpp"
#include "fovlab/errors.hpp"
#include "fovlab/eval.hpp"
#include "fovlab/mask_io.hpp"
#include "fovlab/parallel.hpp"
#include "fovlab/random.hpp"
#include "fovlab/segnet/checkpoint.hpp"
#include "fovlab/segnet/train.hpp"
#include "fovlab/segnet/unet.hpp"

namespace fs = std::filesystem;
using namespace fovlab;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config JSON (flags override it)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Global seed");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void print_config(const std::string& command, const nlohmann::json& resolved) {
  std::cout << "fovlab " << command << " resolved config: " << resolved.dump() << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<eval::Estimator> parse_estimators(const std::string& s) {
  std::vector<eval::Estimator> out;
  for (const auto& name : split_list(s)) out.push_back(eval::parse_estimator(name));
  if (out.empty()) throw ConfigError("no estimators given");
  return out;
}

// Writes rows as JSON-lines, CSV and an aligned text table under `dir`.
void emit_records(const fs::path& dir, const std::string& stem,
                  const std::vector<eval::MetricRecord>& rows) {
  eval::write_jsonl(dir / (stem + ".jsonl"), rows);
  eval::write_csv(dir / (stem + ".csv"), rows);
  eval::write_long_csv(dir / (stem + "_long.csv"), rows);
  const std::string table = eval::format_table(rows);
  write_text(dir / (stem + ".txt"), table);
  std::cout << table;
}

std::vector<eval::EvalFrame> load_eval_frames(const fs::path& root, const Manifest& m,
                                              const std::string& split,
                                              const FilterSpec& filter, const GridSpec& grid) {
  const auto& recs = m.split(split);
  std::vector<eval::EvalFrame> out(recs.size());
  parallel_for(recs.size(), [&](std::size_t i) {
    const Frame f = load_frame(root, m, recs[i]);
    out[i] = {preprocess(f.cloud, filter, grid), frame_truth(f, m.lidar, grid)};
  });
  return out;
}

// ---- synth ----

struct SynthArgs {
  Common c;
  std::string out;
  std::optional<std::string> family;
  std::optional<int> n_train, n_val, n_test, resolution;
};

int run_synth(const SynthArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.family) cfg.family = SceneFamily::preset(*a.family);
  if (a.n_train) cfg.frames.train = *a.n_train;
  if (a.n_val) cfg.frames.val = *a.n_val;
  if (a.n_test) cfg.frames.test = *a.n_test;
  if (a.resolution) cfg.grid.resolution = *a.resolution;
  cfg.output_dir = a.out;
  cfg.validate();
  print_config("synth", experiment_to_json(cfg));
  prepare_output_dir(a.out, a.c.force);
  SynthOptions opt{cfg.family, cfg.lidar, cfg.grid, cfg.frames.train, cfg.frames.val,
                   cfg.frames.test, cfg.seed};
  const Manifest m = synthesize_dataset(a.out, opt);
  std::cout << "wrote " << m.frame_count() << " frames to " << a.out << "\n";
  return 0;
}

// ---- attack ----

struct AttackArgs {
  Common c;
  std::string data, out;
  std::optional<std::string> kind;
  std::optional<int> n_points, budget;
  double fraction = 1.0;
};

int run_attack(const AttackArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  AttackSpec spec = cfg.attack.value_or(AttackSpec{});
  if (a.kind) {
    if (*a.kind == "uniform") {
      spec.kind = AttackKind::kUniform;
    } else if (*a.kind == "cluster") {
      spec.kind = AttackKind::kCluster;
    } else {
      throw ConfigError("attack kind must be uniform or cluster");
    }
  }
  if (a.n_points) spec.n_points = *a.n_points;
  if (a.budget) spec.budget = *a.budget;
  spec.validate();
  nlohmann::json resolved = {{"data", a.data}, {"out", a.out}, {"attack", attack_to_json(spec)},
                             {"fraction", a.fraction}, {"seed", cfg.seed}};
  print_config("attack", resolved);
  const Manifest src = load_manifest(a.data);
  prepare_output_dir(a.out, a.c.force);
  const Manifest m = attack_dataset(a.data, a.out, spec, a.fraction, cfg.seed);
  std::cout << "attacked " << m.frame_count() << " frames (" << src.frame_count()
            << " in source) into " << a.out << "\n";
  return 0;
}

// ---- estimate ----

struct EstimateArgs {
  Common c;
  std::string data, out, method, split = "test";
  std::optional<int> n_bins, hull_k;
};

int run_estimate(const EstimateArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  const eval::Estimator e = eval::parse_estimator(a.method);
  if (!eval::is_classical(e)) throw ConfigError("estimate --method must be rayq, rayc or concave");
  if (a.n_bins) cfg.estimators.n_bins = *a.n_bins;
  if (a.hull_k) cfg.estimators.hull_k = *a.hull_k;
  cfg.validate();
  const Manifest m = load_manifest(a.data);
  nlohmann::json resolved = {{"data", a.data}, {"out", a.out}, {"method", a.method},
                             {"split", a.split}, {"grid", grid_to_json(m.grid)},
                             {"filter", filter_to_json(cfg.filter)},
                             {"n_bins", cfg.estimators.n_bins}, {"hull_k", cfg.estimators.hull_k},
                             {"seed", cfg.seed}};
  print_config("estimate", resolved);
  prepare_output_dir(a.out, a.c.force);
  fs::create_directories(fs::path(a.out) / "masks");
  const auto& recs = m.split(a.split);
  std::vector<FovMask> preds(recs.size()), truths(recs.size());
  parallel_for(recs.size(), [&](std::size_t i) {
    const Frame f = load_frame(a.data, m, recs[i]);
    preds[i] = eval::estimate_classical(e, eval::estimator_points(f.cloud, cfg.filter), m.grid,
                                        cfg.estimators);
    truths[i] = f.mask;
    save_mask(fs::path(a.out) / "masks" / (recs[i].id + ".pgm"), preds[i]);
  });
  std::vector<eval::MetricRecord> rows;
  eval::Accumulator all;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    eval::Accumulator one;
    one.add(preds[i], truths[i]);
    all.add(preds[i], truths[i]);
    nlohmann::ordered_json labels;
    labels["method"] = a.method;
    labels["frame"] = recs[i].id;
    rows.push_back(eval::make_record(std::move(labels), one));
  }
  nlohmann::ordered_json labels;
  labels["method"] = a.method;
  labels["frame"] = "all";
  rows.push_back(eval::make_record(std::move(labels), all));
  eval::write_jsonl(fs::path(a.out) / "metrics.jsonl", rows);
  std::cout << eval::format_table(std::span(rows).last(1));
  return 0;
}

// ---- train ----

struct TrainArgs {
  Common c;
  std::string data, out;
  std::optional<std::string> val_data;
  std::optional<int> epochs, batch, patience, depth, base, resolution;
  std::optional<double> lr, dropout;
};

int run_train(const TrainArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.epochs) cfg.train.max_epochs = *a.epochs;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.patience) cfg.train.patience = *a.patience;
  if (a.lr) cfg.train.learning_rate = *a.lr;
  if (a.depth) cfg.net.depth = *a.depth;
  if (a.base) cfg.net.base_channels = *a.base;
  if (a.dropout) cfg.net.dropout_rate = *a.dropout;
  if (a.resolution) cfg.net.resolution = *a.resolution;
  cfg.train.seed = derive_seed(cfg.seed, {label_hash("train")});
  cfg.output_dir = a.out;
  cfg.validate();
  print_config("train", experiment_to_json(cfg));
  const Manifest m = load_manifest(a.data);
  GridSpec grid{m.grid.extent, cfg.net.resolution};
  const auto train_set = load_samples(a.data, m, "train", cfg.filter, grid);
  std::vector<segnet::Sample> val_set;
  if (a.val_data) {
    val_set = load_samples(*a.val_data, load_manifest(*a.val_data), "val", cfg.filter, grid);
  } else {
    val_set = load_samples(a.data, m, "val", cfg.filter, grid);
  }
  prepare_output_dir(a.out, a.c.force);
  std::ofstream log(fs::path(a.out) / "train_log.jsonl");
  segnet::Network net(cfg.net, derive_seed(cfg.seed, {label_hash("init")}));
  auto result = segnet::train(std::move(net), train_set, val_set, cfg.train,
                              [&](const segnet::EpochRecord& r) {
                                const auto line = segnet::epoch_to_json(r).dump();
                                log << line << "\n";
                                log.flush();
                                std::cout << line << "\n";
                              });
  segnet::save_checkpoint(fs::path(a.out) / "model.fvnt", result.net);
  auto resolved = experiment_to_json(cfg);
  resolved["data"] = a.data;
  write_text(fs::path(a.out) / "config.json", resolved.dump(2) + "\n");
  std::cout << "best epoch " << result.best_epoch << " val_loss " << result.best_val_loss
            << (result.stopped_early ? " (early stop)" : "") << "\n";
  return 0;
}

// ---- infer ----

struct InferArgs {
  Common c;
  std::string model, data, out, mode = "mle", split = "test";
  std::optional<int> passes;
  std::optional<double> threshold;
};

int run_infer(const InferArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.passes) cfg.estimators.mcd_passes = *a.passes;
  if (a.threshold) cfg.estimators.threshold = *a.threshold;
  cfg.validate();
  if (a.mode != "mle" && a.mode != "mcd") throw ConfigError("--mode must be mle or mcd");
  const Manifest m = load_manifest(a.data);
  const auto net = segnet::load_checkpoint(a.model);
  GridSpec grid{m.grid.extent, net.config().resolution};
  nlohmann::json resolved = {{"model", a.model}, {"data", a.data}, {"mode", a.mode},
                             {"split", a.split}, {"passes", cfg.estimators.mcd_passes},
                             {"threshold", cfg.estimators.threshold}, {"seed", cfg.seed}};
  print_config("infer", resolved);
  prepare_output_dir(a.out, a.c.force);
  const fs::path out(a.out);
  fs::create_directories(out / "prob");
  fs::create_directories(out / "masks");
  if (a.mode == "mcd") fs::create_directories(out / "sigma");
  const auto& recs = m.split(a.split);
  parallel_for(recs.size(), [&](std::size_t i) {
    const Frame f = load_frame(a.data, m, recs[i]);
    const BevImage img = preprocess(f.cloud, cfg.filter, grid);
    ProbMap pm(grid);
    if (a.mode == "mcd") {
      auto r = segnet::infer_mcd(net, img, cfg.estimators.mcd_passes,
                                 derive_seed(cfg.seed, {label_hash(recs[i].id)}));
      pm = std::move(r.mean);
      save_gray_pgm(out / "sigma" / (recs[i].id + ".pgm"), grid, r.confidence.sigma, 2.0);
    } else {
      pm = segnet::infer_mle(net, img);
    }
    save_gray_pgm(out / "prob" / (recs[i].id + ".pgm"), grid, pm.values);
    save_mask(out / "masks" / (recs[i].id + ".pgm"),
              segnet::binarize(pm, cfg.estimators.threshold));
  });
  std::cout << "wrote " << recs.size() << " predictions to " << a.out << "\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  Common c;
  std::string model, data, out, split = "test", kinds = "mle,mcd";
  std::string label = "benign";
  std::optional<int> passes;
  std::optional<double> threshold;
};

int run_eval(const EvalArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.passes) cfg.estimators.mcd_passes = *a.passes;
  if (a.threshold) cfg.estimators.threshold = *a.threshold;
  cfg.validate();
  const auto kinds = parse_estimators(a.kinds);
  for (auto k : kinds) {
    if (eval::is_classical(k)) throw ConfigError("eval --kinds accepts mle and mcd");
  }
  const Manifest m = load_manifest(a.data);
  const auto net = segnet::load_checkpoint(a.model);
  GridSpec grid{m.grid.extent, net.config().resolution};
  nlohmann::json resolved = {{"model", a.model}, {"data", a.data}, {"split", a.split},
                             {"kinds", a.kinds}, {"passes", cfg.estimators.mcd_passes},
                             {"threshold", cfg.estimators.threshold}, {"seed", cfg.seed}};
  print_config("eval", resolved);
  prepare_output_dir(a.out, a.c.force);
  const auto frames = load_eval_frames(a.data, m, a.split, cfg.filter, grid);
  eval::InferenceOptions opt{cfg.estimators.mcd_passes, cfg.estimators.threshold, cfg.seed};
  std::vector<eval::MetricRecord> rows;
  for (auto k : kinds) {
    const auto acc = eval::evaluate_model(
        net, frames, k, opt, derive_seed(cfg.seed, {label_hash(eval::estimator_name(k))}));
    nlohmann::ordered_json labels;
    labels["family"] = m.family.name;
    labels["variant"] = m.attack ? "adv" : "benign";
    labels["split"] = a.split;
    labels["model"] = eval::estimator_name(k);
    rows.push_back(eval::make_record(std::move(labels), acc));
  }
  emit_records(a.out, "metrics", rows);
  return 0;
}

// ---- sweep ----

struct SweepArgs {
  Common c;
  std::string data, out, estimators = "rayq,rayc,concave", split = "test";
  std::string counts = "0,25,50,75,100,125,150";
  std::optional<std::string> model, mcd_model, kind;
  std::optional<int> limit;
  bool defense = false;
};

int run_sweep(const SweepArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  cfg.validate();
  const auto ests = parse_estimators(a.estimators);
  const Manifest m = load_manifest(a.data);
  eval::SweepOptions opt;
  opt.attack = cfg.attack.value_or(AttackSpec{});
  if (a.kind) opt.attack.kind = *a.kind == "cluster" ? AttackKind::kCluster : AttackKind::kUniform;
  opt.spoof_counts.clear();
  for (const auto& s : split_list(a.counts)) opt.spoof_counts.push_back(std::stoi(s));
  for (int c : opt.spoof_counts) opt.attack.budget = std::max(opt.attack.budget, c);
  if (a.defense) opt.defense = cfg.defense.value_or(DefenseSpec{});
  opt.lidar = m.lidar;
  opt.grid = m.grid;
  opt.filter = cfg.filter;
  opt.params = cfg.estimators;
  opt.seed = cfg.seed;
  std::optional<segnet::Network> mle, mcd;
  if (a.model) mle = segnet::load_checkpoint(*a.model);
  if (a.mcd_model) {
    mcd = segnet::load_checkpoint(*a.mcd_model);
  } else if (mle) {
    mcd = mle;
  }
  opt.net_grid = GridSpec{m.grid.extent, mle ? mle->config().resolution : cfg.net.resolution};
  nlohmann::json resolved = {{"data", a.data}, {"estimators", a.estimators},
                             {"counts", opt.spoof_counts}, {"attack", attack_to_json(opt.attack)},
                             {"defense", a.defense}, {"seed", cfg.seed}};
  print_config("sweep", resolved);
  prepare_output_dir(a.out, a.c.force);
  const auto& recs = m.split(a.split);
  const std::size_t n = a.limit ? std::min<std::size_t>(recs.size(), *a.limit) : recs.size();
  std::vector<eval::SweepFrame> frames(n);
  parallel_for(n, [&](std::size_t i) {
    Frame f = load_frame(a.data, m, recs[i]);
    frames[i] = {recs[i].id, std::move(f.scene), std::move(f.cloud)};
  });
  eval::SweepModels models{mle ? &*mle : nullptr, mcd ? &*mcd : nullptr};
  const auto rows = eval::security_sweep(frames, ests, opt, models);
  emit_records(a.out, "sweep", rows);
  return 0;
}

// ---- bench ----

struct BenchArgs {
  Common c;
  std::string data, method = "rayq", split = "test";
  std::optional<std::string> model;
  int frames = 200;
};

int run_bench(const BenchArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  cfg.validate();
  if (a.frames < 1) throw ConfigError("--frames must be >= 1");
  const auto e = eval::parse_estimator(a.method);
  const Manifest m = load_manifest(a.data);
  std::optional<segnet::Network> net;
  if (!eval::is_classical(e)) {
    if (!a.model) throw ConfigError("bench " + a.method + " needs --model");
    net = segnet::load_checkpoint(*a.model);
  }
  const GridSpec grid = net ? GridSpec{m.grid.extent, net->config().resolution} : m.grid;
  nlohmann::json resolved = {{"data", a.data}, {"method", a.method}, {"frames", a.frames},
                             {"grid", grid_to_json(grid)}, {"seed", cfg.seed}};
  print_config("bench", resolved);
  const auto& recs = m.split(a.split);
  if (recs.empty()) throw DataError("bench: split " + a.split + " is empty");
  std::vector<PointCloud> clouds;
  for (const auto& r : recs) clouds.push_back(load_cloud(fs::path(a.data) / r.cloud));
  std::vector<double> secs;
  std::size_t visible = 0;
  for (int t = 0; t < a.frames; ++t) {
    const auto& cloud = clouds[static_cast<std::size_t>(t) % clouds.size()];
    const auto t0 = std::chrono::steady_clock::now();
    if (net) {
      const BevImage img = preprocess(cloud, cfg.filter, grid);
      const ProbMap pm = e == eval::Estimator::kMcd
                             ? segnet::infer_mcd(*net, img, cfg.estimators.mcd_passes,
                                                 derive_seed(cfg.seed, {static_cast<std::uint64_t>(t)}))
                                   .mean
                             : segnet::infer_mle(*net, img);
      visible += segnet::binarize(pm, cfg.estimators.threshold).count();
    } else {
      visible += eval::estimate_classical(e, eval::estimator_points(cloud, cfg.filter), grid,
                                          cfg.estimators)
                     .count();
    }
    secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  auto stats = eval::summarize_timings(std::move(secs)).to_json();
  stats["method"] = a.method;
  stats["mean_visible_cells"] = static_cast<double>(visible) / a.frames;
  std::cout << stats.dump() << "\n";
  return 0;
}

// ---- crossval ----

struct CrossvalArgs {
  Common c;
  std::string data, out, grid = "config";
  int folds = 5;
  std::optional<int> epochs, limit;
};

int run_crossval(const CrossvalArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.epochs) cfg.train.max_epochs = *a.epochs;
  cfg.validate();
  std::vector<eval::CvCandidate> cands;
  if (a.grid == "full") {
    cands = eval::standard_grid(cfg.net, cfg.train);
  } else if (a.grid == "config") {
    cands.push_back({cfg.net, cfg.train});
  } else {
    throw ConfigError("--grid must be full or config");
  }
  eval::validate_grid(cands);
  const Manifest m = load_manifest(a.data);
  nlohmann::json resolved = experiment_to_json(cfg);
  resolved["folds"] = a.folds;
  resolved["grid_mode"] = a.grid;
  resolved["candidates"] = cands.size();
  print_config("crossval", resolved);
  prepare_output_dir(a.out, a.c.force);
  auto data = load_samples(a.data, m, "train", cfg.filter, cfg.net_grid());
  if (a.limit && static_cast<std::size_t>(*a.limit) < data.size()) data.resize(*a.limit);
  const auto r = eval::crossval(data, cands, a.folds, cfg.seed);
  std::ofstream os(fs::path(a.out) / "folds.jsonl");
  for (const auto& row : eval::fold_table(r)) os << row.dump() << "\n";
  nlohmann::json best = {{"net", segnet::config_to_json(r.candidates[r.best].net)},
                         {"train", segnet::train_config_to_json(r.candidates[r.best].train)},
                         {"mean_val_loss", r.mean_val_loss[r.best]}};
  write_text(fs::path(a.out) / "best.json", best.dump(2) + "\n");
  std::cout << "best: " << best.dump() << "\n";
  return 0;
}

// ---- transfer ----

struct TransferArgs {
  Common c;
  std::vector<std::string> models, tests;
  std::string out, split = "test", kinds = "mle,mcd";
};

// Parses FAMILY:VARIANT=PATH.
std::tuple<std::string, std::string, std::string> parse_cell(const std::string& s) {
  const auto eq = s.find('=');
  const auto colon = s.find(':');
  if (eq == std::string::npos || colon == std::string::npos || colon > eq) {
    throw ConfigError("expected FAMILY:VARIANT=PATH, got \"" + s + "\"");
  }
  return {s.substr(0, colon), s.substr(colon + 1, eq - colon - 1), s.substr(eq + 1)};
}

int run_transfer(const TransferArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  cfg.validate();
  const auto kinds = parse_estimators(a.kinds);
  std::map<eval::ModelKey, segnet::Network> models;
  std::vector<std::string> families, variants;
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& s : a.models) {
    auto [fam, var, path] = parse_cell(s);
    models.emplace(eval::ModelKey{fam, var}, segnet::load_checkpoint(path));
    remember(families, fam);
    remember(variants, var);
  }
  if (models.empty()) throw ConfigError("transfer needs at least one --model");
  const int res = models.begin()->second.config().resolution;
  nlohmann::json resolved = {{"models", a.models}, {"tests", a.tests}, {"split", a.split},
                             {"kinds", a.kinds}, {"passes", cfg.estimators.mcd_passes},
                             {"threshold", cfg.estimators.threshold}, {"seed", cfg.seed}};
  print_config("transfer", resolved);
  std::vector<eval::TestSet> tests;
  for (const auto& s : a.tests) {
    auto [fam, var, path] = parse_cell(s);
    const Manifest m = load_manifest(path);
    GridSpec grid{m.grid.extent, res};
    tests.push_back({fam, var, load_eval_frames(path, m, a.split, cfg.filter, grid)});
  }
  prepare_output_dir(a.out, a.c.force);
  eval::InferenceOptions opt{cfg.estimators.mcd_passes, cfg.estimators.threshold, cfg.seed};
  const auto rows = eval::transfer_matrix(models, families, variants, tests, opt, kinds);
  emit_records(a.out, "transfer", rows);
  return 0;
}

// ---- calibrate / detect ----

struct AnomalyArgs {
  Common c;
  std::string model, data, out, split = "val";
  std::optional<std::string> anomaly;
  std::optional<int> passes;
  std::optional<double> quantile;
};

std::vector<ConfidenceMap> confidence_maps(const segnet::Network& net, const fs::path& root,
                                           const Manifest& m, const std::string& split,
                                           const ExperimentConfig& cfg) {
  const GridSpec grid{m.grid.extent, net.config().resolution};
  const auto& recs = m.split(split);
  std::vector<ConfidenceMap> out(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const Frame f = load_frame(root, m, recs[i]);
    out[i] = segnet::infer_mcd(net, preprocess(f.cloud, cfg.filter, grid),
                               cfg.estimators.mcd_passes,
                               derive_seed(cfg.seed, {label_hash(recs[i].id)}))
                 .confidence;
  }
  return out;
}

int run_calibrate(const AnomalyArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.passes) cfg.estimators.mcd_passes = *a.passes;
  if (a.quantile) cfg.estimators.quantile = *a.quantile;
  cfg.validate();
  nlohmann::json resolved = {{"model", a.model}, {"data", a.data}, {"split", a.split},
                             {"passes", cfg.estimators.mcd_passes},
                             {"quantile", cfg.estimators.quantile}, {"seed", cfg.seed}};
  print_config("calibrate", resolved);
  const Manifest m = load_manifest(a.data);
  const auto net = segnet::load_checkpoint(a.model);
  const auto maps = confidence_maps(net, a.data, m, a.split, cfg);
  const AnomalyModel model = calibrate(maps, cfg.estimators.quantile);
  prepare_output_dir(a.out, a.c.force);
  write_text(fs::path(a.out) / "anomaly.json", anomaly_to_json(model).dump(2) + "\n");
  std::cout << anomaly_to_json(model).dump() << "\n";
  return 0;
}

int run_detect(const AnomalyArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.passes) cfg.estimators.mcd_passes = *a.passes;
  cfg.validate();
  if (!a.anomaly) throw ConfigError("detect needs --anomaly");
  nlohmann::json resolved = {{"model", a.model}, {"data", a.data}, {"split", a.split},
                             {"anomaly", *a.anomaly}, {"passes", cfg.estimators.mcd_passes},
                             {"seed", cfg.seed}};
  print_config("detect", resolved);
  std::ifstream is(*a.anomaly);
  if (!is) throw DataError("cannot open " + *a.anomaly);
  AnomalyModel model;
  try {
    model = anomaly_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed anomaly model: ") + e.what());
  }
  const Manifest m = load_manifest(a.data);
  const auto net = segnet::load_checkpoint(a.model);
  const auto maps = confidence_maps(net, a.data, m, a.split, cfg);
  prepare_output_dir(a.out, a.c.force);
  std::ofstream os(fs::path(a.out) / "detections.jsonl");
  const auto& recs = m.split(a.split);
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto d = detect(maps[i], model);
    flagged += d.flagged;
    nlohmann::ordered_json j;
    j["frame"] = recs[i].id;
    j["score"] = d.score;
    j["flagged"] = d.flagged;
    os << j.dump() << "\n";
  }
  std::cout << "flagged " << flagged << " of " << maps.size() << " frames\n";
  return 0;
}

// ---- parametric ----

struct ParametricArgs {
  Common c;
  std::string data, out, widths = "8,16,32,64", depths = "3,4,5,6";
  std::string resolutions = "64,128,256,512";
  std::optional<int> epochs, limit;
  int timing_frames = 50;
  bool no_train = false;
};

std::vector<int> int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& t : split_list(s)) out.push_back(std::stoi(t));
  return out;
}

int run_parametric(const ParametricArgs& a) {
  ExperimentConfig cfg = resolve(a.c);
  if (a.epochs) cfg.train.max_epochs = *a.epochs;
  cfg.validate();
  eval::ParametricOptions opt;
  opt.widths = int_list(a.widths);
  opt.depths = int_list(a.depths);
  opt.resolutions = int_list(a.resolutions);
  opt.dropout_rate = cfg.net.dropout_rate;
  opt.train = cfg.train;
  opt.train_models = !a.no_train;
  opt.timing_frames = a.timing_frames;
  opt.threshold = cfg.estimators.threshold;
  opt.seed = cfg.seed;
  nlohmann::json resolved = {{"data", a.data}, {"widths", opt.widths}, {"depths", opt.depths},
                             {"resolutions", opt.resolutions}, {"train", !a.no_train},
                             {"epochs", cfg.train.max_epochs}, {"seed", cfg.seed}};
  print_config("parametric", resolved);
  const Manifest m = load_manifest(a.data);
  prepare_output_dir(a.out, a.c.force);
  auto provider = [&](int res) {
    const GridSpec grid{m.grid.extent, res};
    eval::StudyData d;
    d.train = load_samples(a.data, m, "train", cfg.filter, grid);
    d.val = load_samples(a.data, m, "val", cfg.filter, grid);
    d.test = load_samples(a.data, m, "test", cfg.filter, grid);
    if (a.limit) {
      for (auto* v : {&d.train, &d.val, &d.test}) {
        if (v->size() > static_cast<std::size_t>(*a.limit)) v->resize(*a.limit);
      }
    }
    return d;
  };
  const auto rows = eval::parametric_study(opt, provider);
  std::ofstream os(fs::path(a.out) / "parametric.jsonl");
  for (const auto& r : rows) {
    os << r.to_json().dump() << "\n";
    std::cout << r.to_json().dump() << "\n";
  }
  return 0;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fovlab: LiDAR field-of-view estimation workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fovlab 1.0.0");
  int rc = 0;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(s, synth.c);
  s->add_option("--out", synth.out, "Output dataset directory")->required();
  s->add_option("--family", synth.family, "Scene family preset")
      ->check(CLI::IsMember(SceneFamily::preset_names()));
  s->add_option("--train", synth.n_train, "Training frames");
  s->add_option("--val", synth.n_val, "Validation frames");
  s->add_option("--test", synth.n_test, "Test frames");
  s->add_option("--resolution", synth.resolution, "Ground-truth grid resolution");
  s->add_flag("--force", synth.c.force, "Overwrite a non-empty output directory");
  s->callback([&] { rc = guarded([&] { return run_synth(synth); }); });

  AttackArgs attack;
  auto* at = app.add_subcommand("attack", "Write a spoofed copy of a dataset");
  add_common(at, attack.c);
  at->add_option("--data", attack.data, "Source dataset")->required();
  at->add_option("--out", attack.out, "Output dataset directory")->required();
  at->add_option("--kind", attack.kind, "uniform or cluster")
      ->check(CLI::IsMember({"uniform", "cluster"}));
  at->add_option("--n-points", attack.n_points, "Spoofed points per frame");
  at->add_option("--budget", attack.budget, "Attacker point budget");
  at->add_option("--fraction", attack.fraction, "Share of frames attacked")
      ->check(CLI::Range(0.0, 1.0));
  at->add_flag("--force", attack.c.force, "Overwrite a non-empty output directory");
  at->callback([&] { rc = guarded([&] { return run_attack(attack); }); });

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Run a classical FOV estimator over a split");
  add_common(e, est.c);
  e->add_option("--data", est.data, "Dataset")->required();
  e->add_option("--out", est.out, "Output directory")->required();
  e->add_option("--method", est.method, "rayq, rayc or concave")
      ->required()
      ->check(CLI::IsMember({"rayq", "rayc", "concave"}));
  e->add_option("--split", est.split, "Split to process");
  e->add_option("--n-bins", est.n_bins, "Azimuth bins for rayq");
  e->add_option("--k", est.hull_k, "Neighbors for the concave hull");
  e->add_flag("--force", est.c.force, "Overwrite a non-empty output directory");
  e->callback([&] { rc = guarded([&] { return run_estimate(est); }); });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the segmentation network");
  add_common(t, tr.c);
  t->add_option("--data", tr.data, "Training dataset (train and val splits)")->required();
  t->add_option("--val-data", tr.val_data, "Dataset whose val split replaces --data's");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--epochs", tr.epochs, "Maximum epochs");
  t->add_option("--batch", tr.batch, "Batch size");
  t->add_option("--patience", tr.patience, "Early-stopping patience");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--depth", tr.depth, "Network depth");
  t->add_option("--base", tr.base, "Base channel count");
  t->add_option("--dropout", tr.dropout, "Dropout rate");
  t->add_option("--resolution", tr.resolution, "Network input resolution");
  t->add_flag("--force", tr.c.force, "Overwrite a non-empty output directory");
  t->callback([&] { rc = guarded([&] { return run_train(tr); }); });

  InferArgs inf;
  auto* in = app.add_subcommand("infer", "Write probability maps and masks");
  add_common(in, inf.c);
  in->add_option("--model", inf.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  in->add_option("--data", inf.data, "Dataset")->required();
  in->add_option("--out", inf.out, "Output directory")->required();
  in->add_option("--mode", inf.mode, "mle or mcd")->check(CLI::IsMember({"mle", "mcd"}));
  in->add_option("--split", inf.split, "Split to process");
  in->add_option("--passes", inf.passes, "MC dropout passes");
  in->add_option("--threshold", inf.threshold, "Binarization threshold");
  in->add_flag("--force", inf.c.force, "Overwrite a non-empty output directory");
  in->callback([&] { rc = guarded([&] { return run_infer(inf); }); });

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_common(v, ev.c);
  v->add_option("--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  v->add_option("--data", ev.data, "Dataset")->required();
  v->add_option("--out", ev.out, "Output directory")->required();
  v->add_option("--split", ev.split, "Split to evaluate");
  v->add_option("--kinds", ev.kinds, "Comma list of mle, mcd");
  v->add_option("--passes", ev.passes, "MC dropout passes");
  v->add_option("--threshold", ev.threshold, "Binarization threshold");
  v->add_flag("--force", ev.c.force, "Overwrite a non-empty output directory");
  v->callback([&] { rc = guarded([&] { return run_eval(ev); }); });

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Precision/AUPRC versus spoofed point count");
  add_common(w, sw.c);
  w->add_option("--data", sw.data, "Benign dataset")->required();
  w->add_option("--out", sw.out, "Output directory")->required();
  w->add_option("--estimators", sw.estimators, "Comma list of rayq, rayc, concave, mle, mcd");
  w->add_option("--counts", sw.counts, "Comma list of spoof counts");
  w->add_option("--model", sw.model, "Checkpoint for mle (and mcd unless --mcd-model)");
  w->add_option("--mcd-model", sw.mcd_model, "Checkpoint for mcd");
  w->add_option("--kind", sw.kind, "uniform or cluster")
      ->check(CLI::IsMember({"uniform", "cluster"}));
  w->add_option("--split", sw.split, "Split to sweep");
  w->add_option("--limit", sw.limit, "Use at most this many frames");
  w->add_flag("--defense", sw.defense, "Filter clouds with the defense first");
  w->add_flag("--force", sw.c.force, "Overwrite a non-empty output directory");
  w->callback([&] { rc = guarded([&] { return run_sweep(sw); }); });

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Replay a split at full speed and report frame rates");
  add_common(b, bn.c);
  b->add_option("--data", bn.data, "Dataset")->required();
  b->add_option("--method", bn.method, "rayq, rayc, concave, mle or mcd")
      ->check(CLI::IsMember({"rayq", "rayc", "concave", "mle", "mcd"}));
  b->add_option("--model", bn.model, "Checkpoint for mle/mcd");
  b->add_option("--frames", bn.frames, "Frames to time");
  b->add_option("--split", bn.split, "Split to replay");
  b->callback([&] { rc = guarded([&] { return run_bench(bn); }); });

  CrossvalArgs cv;
  auto* c = app.add_subcommand("crossval", "K-fold cross-validation over the hyperparameter grid");
  add_common(c, cv.c);
  c->add_option("--data", cv.data, "Dataset (train split is used)")->required();
  c->add_option("--out", cv.out, "Output directory")->required();
  c->add_option("--folds", cv.folds, "Fold count");
  c->add_option("--grid", cv.grid, "full or config")->check(CLI::IsMember({"full", "config"}));
  c->add_option("--epochs", cv.epochs, "Maximum epochs per fit");
  c->add_option("--limit", cv.limit, "Use at most this many samples");
  c->add_flag("--force", cv.c.force, "Overwrite a non-empty output directory");
  c->callback([&] { rc = guarded([&] { return run_crossval(cv); }); });

  TransferArgs tf;
  auto* x = app.add_subcommand("transfer", "Train/test transfer matrix");
  add_common(x, tf.c);
  x->add_option("--model", tf.models, "FAMILY:VARIANT=checkpoint (repeatable)")->required();
  x->add_option("--test", tf.tests, "FAMILY:VARIANT=dataset (repeatable)")->required();
  x->add_option("--out", tf.out, "Output directory")->required();
  x->add_option("--split", tf.split, "Split to evaluate");
  x->add_option("--kinds", tf.kinds, "Comma list of mle, mcd");
  x->add_flag("--force", tf.c.force, "Overwrite a non-empty output directory");
  x->callback([&] { rc = guarded([&] { return run_transfer(tf); }); });

  AnomalyArgs cal;
  auto* ca = app.add_subcommand("calibrate", "Fit anomaly thresholds on benign frames");
  add_common(ca, cal.c);
  ca->add_option("--model", cal.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ca->add_option("--data", cal.data, "Benign dataset")->required();
  ca->add_option("--out", cal.out, "Output directory")->required();
  ca->add_option("--split", cal.split, "Calibration split");
  ca->add_option("--passes", cal.passes, "MC dropout passes");
  ca->add_option("--quantile", cal.quantile, "Calibration quantile");
  ca->add_flag("--force", cal.c.force, "Overwrite a non-empty output directory");
  ca->callback([&] { rc = guarded([&] { return run_calibrate(cal); }); });

  AnomalyArgs det;
  auto* d = app.add_subcommand("detect", "Flag frames whose MC dropout uncertainty is anomalous");
  add_common(d, det.c);
  d->add_option("--model", det.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  d->add_option("--anomaly", det.anomaly, "anomaly.json from calibrate")->required();
  d->add_option("--data", det.data, "Dataset")->required();
  d->add_option("--out", det.out, "Output directory")->required();
  d->add_option("--split", det.split, "Split to scan");
  d->add_option("--passes", det.passes, "MC dropout passes");
  d->add_flag("--force", det.c.force, "Overwrite a non-empty output directory");
  d->callback([&] { rc = guarded([&] { return run_detect(det); }); });

  ParametricArgs pa;
  auto* p = app.add_subcommand("parametric", "Width/depth/resolution study");
  add_common(p, pa.c);
  p->add_option("--data", pa.data, "Dataset")->required();
  p->add_option("--out", pa.out, "Output directory")->required();
  p->add_option("--widths", pa.widths, "Comma list of base channel counts");
  p->add_option("--depths", pa.depths, "Comma list of depths");
  p->add_option("--resolutions", pa.resolutions, "Comma list of input resolutions");
  p->add_option("--epochs", pa.epochs, "Maximum epochs per model");
  p->add_option("--limit", pa.limit, "Cap samples per split");
  p->add_option("--timing-frames", pa.timing_frames, "Frames timed per model");
  p->add_flag("--no-train", pa.no_train, "Time untrained networks only");
  p->add_flag("--force", pa.c.force, "Overwrite a non-empty output directory");
  p->callback([&] { rc = guarded([&] { return run_parametric(pa); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  return rc;
}
