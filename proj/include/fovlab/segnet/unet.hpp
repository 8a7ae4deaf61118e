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
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fovlab/grid.hpp"

namespace fovlab::segnet {

// Architecture hyperparameters. Channels at level l are base * 2^l; the
// bottleneck sits at level `depth`.
struct NetConfig {
  int depth = 4;
  int base_channels = 8;
  double dropout_rate = 0.10;
  int resolution = 64;

  int channels(int level) const { return base_channels << level; }
  // Throws ConfigError when resolution is not divisible by 2^depth or a
  // field is outside its allowed set.
  void validate() const;
  std::size_t parameter_count() const;

  bool operator==(const NetConfig&) const = default;
};

nlohmann::json config_to_json(const NetConfig& cfg);
NetConfig config_from_json(const nlohmann::json& j);

// One convolution in parameter order. Weights are [out][in][k][k], row-major,
// followed by `out` biases.
struct ConvLayer {
  int in = 0;
  int out = 0;
  int kernel = 3;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out) * in * kernel * kernel;
  }
};

// Compact UNet for binary segmentation.
//
//   encoder level l:  conv3x3 -> ReLU -> conv3x3 -> ReLU -> dropout -> pool2x2
//   bottleneck:       same double-conv block, no pooling
//   decoder level l:  upsample2x -> conv3x3 (halve channels) -> concat skip
//                     -> conv3x3 -> ReLU -> conv3x3 -> ReLU -> dropout
//   head:             conv1x1 -> sigmoid
//
// Parameters are stored in one flat vector in the order listed above
// (encoder levels 0..depth-1, bottleneck, decoder levels depth-1..0, head).
template <typename Scalar>
class UNet {
 public:
  // He-uniform weights, zero biases; deterministic in (cfg, seed).
  UNet(const NetConfig& cfg, std::uint64_t seed);

  // All parameters zero.
  static UNet zeros(const NetConfig& cfg);
  // Throws DataError unless `params` has parameter_count() entries.
  static UNet from_parameters(const NetConfig& cfg, std::uint64_t seed,
                              std::vector<Scalar> params);

  template <typename Other>
  explicit UNet(const UNet<Other>& other)
      : cfg_(other.config()), seed_(other.seed()), layers_(other.layers()) {
    params_.assign(other.parameters().begin(), other.parameters().end());
  }

  const NetConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::span<Scalar> parameters() { return params_; }
  std::span<const Scalar> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  bool all_finite() const;

  // Probabilities for a normalized input of resolution^2 values. Dropout is
  // active iff `dropout_seed` is set.
  std::vector<Scalar> forward(std::span<const Scalar> input,
                              std::optional<std::uint64_t> dropout_seed) const;

  // Mean binary cross-entropy of forward(input) against `target`; adds
  // d(loss)/d(params) into `grad` (same layout as parameters()).
  double loss_and_gradient(std::span<const Scalar> input,
                           std::span<const std::uint8_t> target,
                           std::optional<std::uint64_t> dropout_seed,
                           std::span<Scalar> grad) const;

 private:
  UNet() = default;
  void build_layers();

  NetConfig cfg_;
  std::uint64_t seed_ = 0;
  std::vector<ConvLayer> layers_;
  std::vector<Scalar> params_;
};

extern template class UNet<float>;
extern template class UNet<double>;

using Network = UNet<float>;

// log1p(counts) scaled by its maximum into [0, 1]; all zeros stays zero.
template <typename Scalar>
std::vector<Scalar> normalize_input(const BevImage& image);

// Deterministic single pass (dropout off). Throws DataError on a resolution
// mismatch.
ProbMap forward(const Network& net, const BevImage& image, bool dropout_active,
                std::uint64_t seed = 0);
ProbMap infer_mle(const Network& net, const BevImage& image);

struct McdResult {
  ProbMap mean;
  ConfidenceMap confidence;
};

// T stochastic passes with sub-seeds derived from `seed`; population std.
McdResult infer_mcd(const Network& net, const BevImage& image, int passes,
                    std::uint64_t seed);

// Predictions clamped to [1e-7, 1 - 1e-7].
double loss_bce(const ProbMap& pred, const FovMask& target);

// Visible iff probability > threshold (strict).
FovMask binarize(const ProbMap& pm, double threshold = 0.7);

}  // namespace fovlab::segnet
