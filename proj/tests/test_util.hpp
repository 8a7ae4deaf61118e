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
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fovlab/random.hpp"
#include "fovlab/segnet/unet.hpp"

namespace fovlab::testing {

// Removed recursively on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "fovlab-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// He-initialized network with biases drawn from U(-0.2, 0.2) so that no
// ReLU sits exactly at its kink.
template <typename Scalar>
segnet::UNet<Scalar> net_with_biases(const segnet::NetConfig& cfg, std::uint64_t seed) {
  segnet::UNet<Scalar> net(cfg, seed);
  Rng rng(seed ^ 0xb1a5ULL);
  std::uniform_real_distribution<double> d(-0.2, 0.2);
  auto p = net.parameters();
  for (const auto& L : net.layers()) {
    for (int o = 0; o < L.out; ++o) p[L.bias_offset + o] = static_cast<Scalar>(d(rng));
  }
  return net;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = 0.0,
                                         double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed, double p = 0.5) {
  Rng rng(seed);
  std::bernoulli_distribution d(p);
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = d(rng) ? 1 : 0;
  return v;
}

}  // namespace fovlab::testing
