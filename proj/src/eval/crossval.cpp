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
#include <cmath>
#include <numeric>
#include <string>

#include "fovlab/errors.hpp"
#include "fovlab/eval.hpp"
#include "fovlab/random.hpp"

namespace fovlab::eval {

std::vector<std::vector<std::size_t>> fold_split(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (n < static_cast<std::size_t>(folds)) {
    throw DataError("cross-validation: " + std::to_string(n) + " samples for " +
                    std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {label_hash("folds")}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  const std::size_t k = static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

std::vector<CvCandidate> standard_grid(const segnet::NetConfig& net,
                                       const segnet::TrainConfig& train) {
  std::vector<CvCandidate> out;
  for (int base : {4, 8, 16, 32}) {
    for (double drop : {0.05, 0.10, 0.15}) {
      for (double lr : {1e-4, 1e-3, 1e-2}) {
        CvCandidate c{net, train};
        c.net.base_channels = base;
        c.net.dropout_rate = drop;
        c.train.learning_rate = lr;
        out.push_back(c);
      }
    }
  }
  return out;
}

namespace {

bool near_any(double v, std::initializer_list<double> allowed) {
  return std::any_of(allowed.begin(), allowed.end(),
                     [&](double a) { return std::abs(v - a) <= 1e-12; });
}

}  // namespace

void validate_grid(std::span<const CvCandidate> candidates) {
  if (candidates.empty()) throw ConfigError("cross-validation grid is empty");
  for (const auto& c : candidates) {
    c.net.validate();
    c.train.validate();
    const int b = c.net.base_channels;
    if (b != 4 && b != 8 && b != 16 && b != 32) {
      throw ConfigError("grid base_channels must be one of 4, 8, 16, 32");
    }
    if (!near_any(c.net.dropout_rate, {0.05, 0.10, 0.15})) {
      throw ConfigError("grid dropout_rate must be one of 0.05, 0.10, 0.15");
    }
    if (!near_any(c.train.learning_rate, {1e-4, 1e-3, 1e-2})) {
      throw ConfigError("grid learning_rate must be one of 1e-4, 1e-3, 1e-2");
    }
  }
}

CrossValResult crossval_with(std::span<const CvCandidate> candidates, std::size_t n_samples,
                             int folds, std::uint64_t seed, const FoldEvaluator& evaluate) {
  if (candidates.empty()) throw ConfigError("cross-validation grid is empty");
  const auto split = fold_split(n_samples, folds, seed);
  CrossValResult r;
  r.candidates.assign(candidates.begin(), candidates.end());
  r.mean_val_loss.assign(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> train_idx;
      for (int g = 0; g < folds; ++g) {
        if (g == f) continue;
        train_idx.insert(train_idx.end(), split[g].begin(), split[g].end());
      }
      const auto& val_idx = split[f];
      const double loss = evaluate(c, f, train_idx, val_idx);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite validation loss for candidate " + std::to_string(c) +
                           " fold " + std::to_string(f));
      }
      r.folds.push_back({c, f, train_idx.size(), val_idx.size(), loss});
      r.mean_val_loss[c] += loss / folds;
    }
  }
  auto better = [&](std::size_t a, std::size_t b) {
    if (r.mean_val_loss[a] != r.mean_val_loss[b]) {
      return r.mean_val_loss[a] < r.mean_val_loss[b];
    }
    const auto pa = candidates[a].net.parameter_count();
    const auto pb = candidates[b].net.parameter_count();
    if (pa != pb) return pa < pb;
    return candidates[a].train.learning_rate < candidates[b].train.learning_rate;
  };
  r.best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (better(c, r.best)) r.best = c;
  }
  return r;
}

CrossValResult crossval(std::span<const segnet::Sample> data,
                        std::span<const CvCandidate> candidates, int folds,
                        std::uint64_t seed) {
  validate_grid(candidates);
  return crossval_with(
      candidates, data.size(), folds, seed,
      [&](std::size_t c, int f, std::span<const std::size_t> train_idx,
          std::span<const std::size_t> val_idx) {
        std::vector<segnet::Sample> tr, va;
        for (auto i : train_idx) tr.push_back(data[i]);
        for (auto i : val_idx) va.push_back(data[i]);
        const auto cell = derive_seed(seed, {label_hash("cv"), c, static_cast<std::uint64_t>(f)});
        segnet::TrainConfig tc = candidates[c].train;
        tc.seed = derive_seed(cell, {label_hash("train")});
        segnet::Network net(candidates[c].net, derive_seed(cell, {label_hash("init")}));
        return segnet::train(std::move(net), tr, va, tc).best_val_loss;
      });
}

std::vector<nlohmann::ordered_json> fold_table(const CrossValResult& r) {
  std::vector<nlohmann::ordered_json> rows;
  for (const auto& f : r.folds) {
    const auto& c = r.candidates[f.candidate];
    nlohmann::ordered_json j;
    j["candidate"] = f.candidate;
    j["base_channels"] = c.net.base_channels;
    j["dropout_rate"] = c.net.dropout_rate;
    j["learning_rate"] = c.train.learning_rate;
    j["fold"] = f.fold;
    j["n_train"] = f.n_train;
    j["n_val"] = f.n_val;
    j["val_loss"] = f.val_loss;
    j["selected"] = f.candidate == r.best;
    rows.push_back(std::move(j));
  }
  return rows;
}

}  // namespace fovlab::eval
