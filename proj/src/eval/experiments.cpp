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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "fovlab/classical.hpp"
#include "fovlab/errors.hpp"
#include "fovlab/eval.hpp"
#include "fovlab/parallel.hpp"
#include "fovlab/random.hpp"

namespace fovlab::eval {

Estimator parse_estimator(const std::string& name) {
  if (name == "rayq") return Estimator::kRayQ;
  if (name == "rayc") return Estimator::kRayC;
  if (name == "concave") return Estimator::kConcave;
  if (name == "mle") return Estimator::kMle;
  if (name == "mcd") return Estimator::kMcd;
  throw ConfigError("unknown estimator \"" + name +
                    "\" (expected rayq, rayc, concave, mle or mcd)");
}

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::kRayQ: return "rayq";
    case Estimator::kRayC: return "rayc";
    case Estimator::kConcave: return "concave";
    case Estimator::kMle: return "mle";
    case Estimator::kMcd: return "mcd";
  }
  return "unknown";
}

bool is_classical(Estimator e) {
  return e == Estimator::kRayQ || e == Estimator::kRayC || e == Estimator::kConcave;
}

Points2 estimator_points(const PointCloud& cloud, const FilterSpec& filter) {
  return planar(filter_points(project_to_bev(cloud), filter));
}

FovMask estimate_classical(Estimator e, std::span<const Vec2> points, const GridSpec& grid,
                           const EstimatorParams& params) {
  try {
    switch (e) {
      case Estimator::kRayQ:
        return polar_to_mask(raytrace_quantized(points, params.n_bins), grid);
      case Estimator::kRayC:
        return rasterize_polygon(raytrace_continuous(points), grid);
      case Estimator::kConcave:
        return rasterize_polygon(concave_hull(points, params.hull_k), grid);
      default:
        throw ConfigError(estimator_name(e) + " is not a classical estimator");
    }
  } catch (const DataError&) {
    return FovMask(grid);
  }
}

bool mask_contains(const FovMask& outer, const FovMask& inner) {
  if (!(outer.spec == inner.spec)) throw DataError("mask_contains: grids differ");
  for (std::size_t i = 0; i < inner.visible.size(); ++i) {
    if (inner.visible[i] && !outer.visible[i]) return false;
  }
  return true;
}

namespace {

struct Scored {
  std::vector<std::uint8_t> pred;
  std::vector<double> scores;
};

Scored run_learned(const segnet::Network& net, const BevImage& image, Estimator kind,
                   const InferenceOptions& opt, std::uint64_t seed) {
  ProbMap pm = kind == Estimator::kMcd ? segnet::infer_mcd(net, image, opt.mcd_passes, seed).mean
                                       : segnet::infer_mle(net, image);
  Scored s;
  s.pred = segnet::binarize(pm, opt.threshold).visible;
  s.scores = std::move(pm.values);
  return s;
}

}  // namespace

Accumulator evaluate_model(const segnet::Network& net, std::span<const EvalFrame> frames,
                           Estimator kind, const InferenceOptions& opt,
                           std::uint64_t cell_seed) {
  if (is_classical(kind)) throw ConfigError("evaluate_model expects mle or mcd");
  std::vector<Scored> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    out[i] = run_learned(net, frames[i].image, kind, opt, derive_seed(cell_seed, {i}));
  });
  Accumulator acc;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    acc.add(out[i].pred, out[i].scores, frames[i].truth.visible);
  }
  return acc;
}

std::vector<MetricRecord> transfer_matrix(const std::map<ModelKey, segnet::Network>& models,
                                          const std::vector<std::string>& families,
                                          const std::vector<std::string>& variants,
                                          std::span<const TestSet> tests,
                                          const InferenceOptions& opt,
                                          const std::vector<Estimator>& kinds) {
  if (families.empty() || variants.empty()) {
    throw ConfigError("transfer matrix needs at least one family and variant");
  }
  auto find_test = [&](const std::string& fam, const std::string& var) -> const TestSet& {
    for (const auto& t : tests) {
      if (t.family == fam && t.variant == var) return t;
    }
    throw DataError("missing test set for test=" + fam + " variant=" + var);
  };
  std::vector<MetricRecord> rows;
  for (const auto& train_fam : families) {
    for (const auto& test_fam : families) {
      for (const auto& var : variants) {
        auto it = models.find({train_fam, var});
        if (it == models.end()) {
          throw DataError("missing model for cell train=" + train_fam + " test=" + test_fam +
                          " variant=" + var);
        }
        const TestSet& ts = find_test(test_fam, var);
        for (Estimator kind : kinds) {
          const std::uint64_t cell_seed =
              derive_seed(opt.seed, {label_hash(train_fam), label_hash(test_fam),
                                     label_hash(var), label_hash(estimator_name(kind))});
          const Accumulator acc = evaluate_model(it->second, ts.frames, kind, opt, cell_seed);
          nlohmann::ordered_json labels;
          labels["train"] = train_fam;
          labels["test"] = test_fam;
          labels["variant"] = var;
          labels["model"] = estimator_name(kind);
          rows.push_back(make_record(std::move(labels), acc));
        }
      }
    }
  }
  return rows;
}

PointCloud sweep_cloud(const SweepFrame& frame, const SweepOptions& opt, int count) {
  PointCloud cloud = frame.cloud;
  if (count > 0) {
    AttackSpec a = opt.attack;
    a.n_points = count;
    a.seed = derive_seed(opt.seed, {label_hash("sweep"), label_hash(frame.id)});
    cloud = spoof(cloud, a);
  }
  if (opt.defense) cloud = defend(cloud, *opt.defense);
  return cloud;
}

std::vector<MetricRecord> security_sweep(std::span<const SweepFrame> frames,
                                         const std::vector<Estimator>& estimators,
                                         const SweepOptions& opt, const SweepModels& models) {
  for (Estimator e : estimators) {
    if (e == Estimator::kMle && !models.mle) throw ConfigError("sweep: mle needs a model");
    if (e == Estimator::kMcd && !models.mcd) throw ConfigError("sweep: mcd needs a model");
  }
  for (int c : opt.spoof_counts) {
    if (c < 0 || c > opt.attack.budget) {
      throw ConfigError("sweep spoof count " + std::to_string(c) + " outside [0, budget=" +
                        std::to_string(opt.attack.budget) + "]");
    }
  }
  const bool any_learned = std::any_of(estimators.begin(), estimators.end(),
                                       [](Estimator e) { return !is_classical(e); });
  std::vector<FovMask> truth(frames.size()), net_truth(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    truth[i] = ground_truth_fov(frames[i].scene, opt.lidar, opt.grid);
    if (any_learned) net_truth[i] = ground_truth_fov(frames[i].scene, opt.lidar, opt.net_grid);
  });

  InferenceOptions inf{opt.params.mcd_passes, opt.params.threshold, opt.seed};
  std::vector<MetricRecord> rows;
  for (int count : opt.spoof_counts) {
    std::vector<PointCloud> clouds(frames.size());
    parallel_for(frames.size(),
                 [&](std::size_t i) { clouds[i] = sweep_cloud(frames[i], opt, count); });
    for (Estimator e : estimators) {
      std::vector<Scored> out(frames.size());
      parallel_for(frames.size(), [&](std::size_t i) {
        if (is_classical(e)) {
          const Points2 pts = estimator_points(clouds[i], opt.filter);
          FovMask m = estimate_classical(e, pts, opt.grid, opt.params);
          out[i].scores.assign(m.visible.begin(), m.visible.end());
          out[i].pred = std::move(m.visible);
        } else {
          const auto* net = e == Estimator::kMle ? models.mle : models.mcd;
          const BevImage img = preprocess(clouds[i], opt.filter, opt.net_grid);
          // Keyed by frame only, so the dropout masks are shared across counts.
          out[i] = run_learned(*net, img, e, inf,
                               derive_seed(opt.seed, {label_hash("sweep-mcd"),
                                                      label_hash(frames[i].id)}));
        }
      });
      Accumulator acc;
      for (std::size_t i = 0; i < frames.size(); ++i) {
        acc.add(out[i].pred, out[i].scores,
                is_classical(e) ? truth[i].visible : net_truth[i].visible);
      }
      nlohmann::ordered_json labels;
      labels["estimator"] = estimator_name(e);
      labels["attack"] = opt.attack.kind == AttackKind::kUniform ? "uniform" : "cluster";
      labels["spoof_count"] = count;
      labels["defense"] = opt.defense.has_value();
      rows.push_back(make_record(std::move(labels), acc));
    }
  }
  return rows;
}

nlohmann::ordered_json ParametricRow::to_json() const {
  nlohmann::ordered_json j;
  j["width"] = width;
  j["depth"] = depth;
  j["resolution"] = resolution;
  j["valid"] = valid;
  if (!valid) {
    j["reason"] = reason;
    return j;
  }
  j["parameters"] = parameters;
  j["precision"] = metrics.precision;
  j["recall"] = metrics.recall;
  j["f1"] = metrics.f1;
  j["median_seconds"] = median_seconds;
  return j;
}

std::vector<ParametricRow> parametric_study(const ParametricOptions& opt,
                                            const StudyProvider& data) {
  if (opt.timing_frames < 1) throw ConfigError("timing_frames must be >= 1");
  std::vector<ParametricRow> rows;
  for (int res : opt.resolutions) {
    std::optional<StudyData> d;
    for (int depth : opt.depths) {
      for (int width : opt.widths) {
        ParametricRow row;
        row.width = width;
        row.depth = depth;
        row.resolution = res;
        segnet::NetConfig cfg{depth, width, opt.dropout_rate, res};
        try {
          cfg.validate();
        } catch (const ConfigError& e) {
          row.valid = false;
          row.reason = e.what();
          rows.push_back(row);
          continue;
        }
        if (!d) d = data(res);
        if (d->test.empty()) throw DataError("parametric study needs test samples");
        const std::uint64_t cell = derive_seed(
            opt.seed, {label_hash("parametric"), static_cast<std::uint64_t>(res),
                       static_cast<std::uint64_t>(depth), static_cast<std::uint64_t>(width)});
        segnet::Network net(cfg, derive_seed(cell, {label_hash("init")}));
        if (opt.train_models) {
          segnet::TrainConfig tc = opt.train;
          tc.seed = derive_seed(cell, {label_hash("train")});
          net = segnet::train(std::move(net), d->train, d->val, tc).net;
        }
        row.parameters = net.parameter_count();
        ConfusionCounts counts;
        for (const auto& s : d->test) {
          const auto p = net.forward(s.input, std::nullopt);
          std::vector<std::uint8_t> pred(p.size());
          for (std::size_t i = 0; i < p.size(); ++i) pred[i] = p[i] > opt.threshold ? 1 : 0;
          counts += confusion(pred, s.target);
        }
        row.metrics = metrics(counts);
        std::vector<double> secs;
        for (int t = 0; t < opt.timing_frames; ++t) {
          const auto& s = d->test[static_cast<std::size_t>(t) % d->test.size()];
          const auto t0 = std::chrono::steady_clock::now();
          const auto p = net.forward(s.input, std::nullopt);
          secs.push_back(
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          if (p.empty()) throw NumericError("empty forward output");
        }
        row.median_seconds = summarize_timings(std::move(secs)).median_seconds;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace fovlab::eval
