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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fovlab/attacks.hpp"
#include "fovlab/config.hpp"
#include "fovlab/geometry.hpp"
#include "fovlab/grid.hpp"
#include "fovlab/scene.hpp"
#include "fovlab/segnet/train.hpp"
#include "fovlab/segnet/unet.hpp"

namespace fovlab::eval {

// Visible cells are the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

// Throws DataError on shape mismatch.
ConfusionCounts confusion(const FovMask& pred, const FovMask& truth);
ConfusionCounts confusion(std::span<const std::uint8_t> pred,
                          std::span<const std::uint8_t> truth);

// Any 0/0 ratio is reported as 0.
Metrics metrics(const ConfusionCounts& c);

// Step-wise area under the precision-recall curve; cells with equal scores
// enter together. Throws DataError when no label is positive.
double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels);
double auprc(const ProbMap& pm, const FovMask& truth);

// Pools confusion counts and scored cells over many frames.
class Accumulator {
 public:
  void add(std::span<const std::uint8_t> pred, std::span<const double> scores,
           std::span<const std::uint8_t> truth);
  void add(const FovMask& pred, const FovMask& truth);  // scores = pred
  const ConfusionCounts& counts() const { return counts_; }
  std::size_t frames() const { return frames_; }
  Metrics metrics() const { return eval::metrics(counts_); }
  // NaN when no cell was positive.
  double auprc() const;

 private:
  ConfusionCounts counts_;
  std::vector<double> scores_;
  std::vector<std::uint8_t> labels_;
  std::size_t frames_ = 0;
};

struct MetricRecord {
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  Metrics metrics;
  double auprc = 0.0;
  std::size_t frames = 0;

  nlohmann::ordered_json to_json() const;
};

MetricRecord make_record(nlohmann::ordered_json labels, const Accumulator& acc);

void write_jsonl(const std::filesystem::path& path, std::span<const MetricRecord> rows);
void write_csv(const std::filesystem::path& path, std::span<const MetricRecord> rows);
// Long format: one row per (labels, metric name, value).
void write_long_csv(const std::filesystem::path& path, std::span<const MetricRecord> rows);
std::string format_table(std::span<const MetricRecord> rows);

struct TimingStats {
  std::size_t samples = 0;
  double median_seconds = 0.0;
  double p95_seconds = 0.0;
  double median_hz = 0.0;
  double p95_hz = 0.0;  // rate at the 95th-percentile frame time

  nlohmann::ordered_json to_json() const;
};

TimingStats summarize_timings(std::vector<double> seconds);

// ---- estimators ----

enum class Estimator { kRayQ, kRayC, kConcave, kMle, kMcd };

// Accepts rayq, rayc, concave, mle, mcd; anything else is a ConfigError.
Estimator parse_estimator(const std::string& name);
std::string estimator_name(Estimator e);
bool is_classical(Estimator e);

// Sensor-centered, gravity-aligned planar returns after filtering.
Points2 estimator_points(const PointCloud& cloud, const FilterSpec& filter);

// Classical mask; degenerate inputs yield an all-invisible mask.
FovMask estimate_classical(Estimator e, std::span<const Vec2> points, const GridSpec& grid,
                           const EstimatorParams& params);

// True when every visible cell of `inner` is visible in `outer`.
bool mask_contains(const FovMask& outer, const FovMask& inner);

// ---- cross-validation ----

struct CvCandidate {
  segnet::NetConfig net;
  segnet::TrainConfig train;
};

struct FoldRow {
  std::size_t candidate = 0;
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  double val_loss = 0.0;
};

struct CrossValResult {
  std::vector<CvCandidate> candidates;
  std::vector<double> mean_val_loss;
  std::vector<FoldRow> folds;
  std::size_t best = 0;
};

// Seeded shuffle, then contiguous chunks whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> fold_split(std::size_t n, int folds, std::uint64_t seed);

// Full grid over base_channels {4,8,16,32} x dropout {0.05,0.10,0.15} x
// learning rate {1e-4,1e-3,1e-2}; other fields come from the templates.
std::vector<CvCandidate> standard_grid(const segnet::NetConfig& net,
                                       const segnet::TrainConfig& train);
// Throws ConfigError when a candidate leaves the standard grid.
void validate_grid(std::span<const CvCandidate> candidates);

// Returns the validation loss of `candidate` trained on `train_idx`.
using FoldEvaluator = std::function<double(std::size_t candidate, int fold,
                                           std::span<const std::size_t> train_idx,
                                           std::span<const std::size_t> val_idx)>;

// Lowest mean validation loss wins; ties go to fewer parameters, then the
// lower learning rate.
CrossValResult crossval_with(std::span<const CvCandidate> candidates, std::size_t n_samples,
                             int folds, std::uint64_t seed, const FoldEvaluator& evaluate);

CrossValResult crossval(std::span<const segnet::Sample> data,
                        std::span<const CvCandidate> candidates, int folds,
                        std::uint64_t seed);

// One row per (candidate, fold).
std::vector<nlohmann::ordered_json> fold_table(const CrossValResult& r);

// ---- transfer matrix ----

struct EvalFrame {
  BevImage image;
  FovMask truth;
};

struct TestSet {
  std::string family;
  std::string variant;  // "benign" or "adv"
  std::vector<EvalFrame> frames;
};

struct InferenceOptions {
  int mcd_passes = 20;
  double threshold = 0.7;
  std::uint64_t seed = 0;
};

// Pooled evaluation of one model on frames; `cell_seed` drives MC dropout.
Accumulator evaluate_model(const segnet::Network& net, std::span<const EvalFrame> frames,
                           Estimator kind, const InferenceOptions& opt,
                           std::uint64_t cell_seed);

using ModelKey = std::pair<std::string, std::string>;  // (train family, variant)

// Rows in (train family, test family, variant, kind) order. Throws DataError
// naming the first cell without a model or test set.
std::vector<MetricRecord> transfer_matrix(const std::map<ModelKey, segnet::Network>& models,
                                          const std::vector<std::string>& families,
                                          const std::vector<std::string>& variants,
                                          std::span<const TestSet> tests,
                                          const InferenceOptions& opt,
                                          const std::vector<Estimator>& kinds = {
                                              Estimator::kMle, Estimator::kMcd});

// ---- security sweep ----

struct SweepFrame {
  std::string id;
  Scene scene;
  PointCloud cloud;
};

struct SweepOptions {
  std::vector<int> spoof_counts = {0, 25, 50, 75, 100, 125, 150};
  AttackSpec attack;                   // n_points is set per sweep step
  std::optional<DefenseSpec> defense;  // applied to every cloud when set
  LidarModel lidar;
  GridSpec grid;      // classical estimators
  GridSpec net_grid;  // learned estimators
  FilterSpec filter;
  EstimatorParams params;
  std::uint64_t seed = 0;
};

struct SweepModels {
  const segnet::Network* mle = nullptr;
  const segnet::Network* mcd = nullptr;
};

// Spoofed points for a given count are a prefix of those for any larger
// count, so classical ray-trace masks only grow along the sweep.
PointCloud sweep_cloud(const SweepFrame& frame, const SweepOptions& opt, int count);

std::vector<MetricRecord> security_sweep(std::span<const SweepFrame> frames,
                                         const std::vector<Estimator>& estimators,
                                         const SweepOptions& opt, const SweepModels& models);

// ---- parametric study ----

struct StudyData {
  std::vector<segnet::Sample> train;
  std::vector<segnet::Sample> val;
  std::vector<segnet::Sample> test;
};

struct ParametricOptions {
  std::vector<int> widths = {8, 16, 32, 64};
  std::vector<int> depths = {3, 4, 5, 6};
  std::vector<int> resolutions = {64, 128, 256, 512};
  double dropout_rate = 0.10;
  segnet::TrainConfig train;
  bool train_models = true;
  int timing_frames = 50;
  double threshold = 0.7;
  std::uint64_t seed = 0;
};

struct ParametricRow {
  int width = 0;
  int depth = 0;
  int resolution = 0;
  bool valid = true;
  std::string reason;
  std::size_t parameters = 0;
  Metrics metrics;
  double median_seconds = 0.0;

  nlohmann::ordered_json to_json() const;
};

using StudyProvider = std::function<StudyData(int resolution)>;

std::vector<ParametricRow> parametric_study(const ParametricOptions& opt,
                                            const StudyProvider& data);

}  // namespace fovlab::eval
