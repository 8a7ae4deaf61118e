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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "fovlab/segnet/unet.hpp"

namespace fovlab::segnet {

// Central differences on an O(1) loss carry roughly eps * loss / h ~ 1e-11 of
// rounding noise; gradients below this floor are compared absolutely.
inline constexpr double kGradientFloor = 1e-6;

// Computes loss and accumulates the analytic gradient into the last argument.
using GradientFn = std::function<double(const UNet<double>&, std::span<const double>,
                                        std::span<const std::uint8_t>, std::span<double>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Compares the analytic gradient against central differences with step `h`
// on `n_params` sampled parameters (at least one per layer). Dropout is off.
// Relative error is |a - n| / max(|a|, |n|, kGradientFloor).
GradCheckResult grad_check(const UNet<double>& net, std::span<const double> input,
                           std::span<const std::uint8_t> target,
                           std::size_t n_params = 100, std::uint64_t seed = 0,
                           double h = 1e-5, const GradientFn& analytic = {});

}  // namespace fovlab::segnet
