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

#include "fovlab/segnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fovlab/errors.hpp"
#include "fovlab/random.hpp"

namespace fovlab::segnet {

namespace {

double loss_only(const UNet<double>& net, std::span<const double> input,
                 std::span<const std::uint8_t> target) {
  const auto p = net.forward(input, std::nullopt);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
    s -= target[i] ? std::log(q) : std::log(1.0 - q);
  }
  return s / static_cast<double>(p.size());
}

}  // namespace

GradCheckResult grad_check(const UNet<double>& net, std::span<const double> input,
                           std::span<const std::uint8_t> target, std::size_t n_params,
                           std::uint64_t seed, double h, const GradientFn& analytic) {
  if (!(h > 0.0)) throw ConfigError("grad_check step must be positive");
  const std::size_t total = net.parameter_count();
  std::vector<double> grad(total, 0.0);
  if (analytic) {
    analytic(net, input, target, grad);
  } else {
    net.loss_and_gradient(input, target, std::nullopt, grad);
  }

  // One random parameter per layer first, then uniform picks without
  // replacement until n_params are chosen.
  Rng rng(derive_seed(seed, {label_hash("grad-check")}));
  std::vector<std::uint8_t> chosen(total, 0);
  std::vector<std::size_t> picks;
  for (const auto& L : net.layers()) {
    const std::size_t span_len = L.weight_count() + static_cast<std::size_t>(L.out);
    std::uniform_int_distribution<std::size_t> d(0, span_len - 1);
    const std::size_t idx = L.weight_offset + d(rng);
    if (!chosen[idx]) {
      chosen[idx] = 1;
      picks.push_back(idx);
    }
  }
  const std::size_t want = std::min(total, std::max(n_params, picks.size()));
  std::uniform_int_distribution<std::size_t> any(0, total - 1);
  while (picks.size() < want) {
    const std::size_t idx = any(rng);
    if (chosen[idx]) continue;
    chosen[idx] = 1;
    picks.push_back(idx);
  }

  UNet<double> probe(net);
  auto params = probe.parameters();
  GradCheckResult r;
  for (std::size_t idx : picks) {
    const double orig = params[idx];
    params[idx] = orig + h;
    const double up = loss_only(probe, input, target);
    params[idx] = orig - h;
    const double down = loss_only(probe, input, target);
    params[idx] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = grad[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradientFloor});
    const double rel = std::abs(a - numeric) / denom;
    if (!std::isfinite(rel)) throw NumericError("non-finite gradient in grad_check");
    if (rel > r.max_relative_error || r.checked == 0) {
      r.max_relative_error = rel;
      r.worst_index = idx;
    }
    ++r.checked;
  }
  return r;
}

}  // namespace fovlab::segnet
