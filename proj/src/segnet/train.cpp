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

#include "fovlab/segnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "fovlab/errors.hpp"
#include "fovlab/json_util.hpp"
#include "fovlab/parallel.hpp"
#include "fovlab/random.hpp"

namespace fovlab::segnet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train learning_rate must be positive");
  }
  if (max_epochs < 1) throw ConfigError("train max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
  if (patience < 1) throw ConfigError("train patience must be >= 1");
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"max_epochs", cfg.max_epochs},
          {"batch_size", cfg.batch_size},
          {"patience", cfg.patience},
          {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "train";
  jsonutil::check_keys(j, {"learning_rate", "max_epochs", "batch_size", "patience", "seed"},
                       where);
  TrainConfig cfg;
  jsonutil::read(j, "learning_rate", cfg.learning_rate, where);
  jsonutil::read(j, "max_epochs", cfg.max_epochs, where);
  jsonutil::read(j, "batch_size", cfg.batch_size, where);
  jsonutil::read(j, "patience", cfg.patience, where);
  jsonutil::read(j, "seed", cfg.seed, where);
  cfg.validate();
  return cfg;
}

Sample make_sample(const BevImage& image, const FovMask& mask) {
  if (!(image.spec == mask.spec)) throw DataError("image and mask grids differ");
  return Sample{normalize_input<float>(image), mask.visible};
}

nlohmann::json epoch_to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"seconds", r.seconds}};
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("early-stopping patience must be >= 1");
}

bool EarlyStopping::update(int epoch, double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<float> params, std::span<const float> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw DataError("Adam: parameter/gradient size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = grad[i];
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g * g;
    const double mh = m_[i] / c1;
    const double vh = v_[i] / c2;
    params[i] = static_cast<float>(params[i] - lr_ * mh / (std::sqrt(vh) + eps_));
  }
}

namespace {

void check_sample(const Network& net, const Sample& s) {
  const auto n = static_cast<std::size_t>(net.config().resolution) * net.config().resolution;
  if (s.input.size() != n || s.target.size() != n) {
    throw DataError("sample size does not match network resolution " +
                    std::to_string(net.config().resolution));
  }
}

}  // namespace

double evaluate_loss(const Network& net, std::span<const Sample> data) {
  if (data.empty()) throw DataError("evaluate_loss: empty set");
  std::vector<double> losses(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    check_sample(net, data[i]);
    const auto p = net.forward(data[i].input, std::nullopt);
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double q = std::clamp(static_cast<double>(p[k]), 1e-7, 1.0 - 1e-7);
      s -= data[i].target[k] ? std::log(q) : std::log(1.0 - q);
    }
    losses[i] = s / static_cast<double>(p.size());
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) /
         static_cast<double>(losses.size());
}

TrainResult train(Network net, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) {
    throw DataError("training needs non-empty train and validation splits");
  }
  for (const auto& s : train_set) check_sample(net, s);
  for (const auto& s : val_set) check_sample(net, s);

  const std::size_t n_params = net.parameter_count();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  Adam adam(n_params, cfg.learning_rate);
  EarlyStopping stopper(cfg.patience);
  // One gradient slot per batch position, summed in slot order so the
  // result does not depend on thread scheduling.
  std::vector<std::vector<float>> slots(batch, std::vector<float>(n_params));
  std::vector<double> slot_loss(batch);
  std::vector<float> grad(n_params);

  TrainResult result{net, {}, 0, std::numeric_limits<double>::infinity(), false};
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {label_hash("shuffle"),
                                           static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      parallel_for(count, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        std::fill(slots[b].begin(), slots[b].end(), 0.0f);
        const std::uint64_t drop_seed =
            derive_seed(cfg.seed, {label_hash("dropout"), static_cast<std::uint64_t>(epoch),
                                   static_cast<std::uint64_t>(idx)});
        slot_loss[b] = net.loss_and_gradient(train_set[idx].input, train_set[idx].target,
                                             drop_seed, slots[b]);
      });
      std::fill(grad.begin(), grad.end(), 0.0f);
      for (std::size_t b = 0; b < count; ++b) {
        if (!std::isfinite(slot_loss[b])) {
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", sample " + std::to_string(order[start + b]));
        }
        loss_sum += slot_loss[b];
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += slots[b][i];
      }
      const float inv = 1.0f / static_cast<float>(count);
      for (auto& g : grad) g *= inv;
      adam.step(net.parameters(), grad);
      seen += count;
    }
    if (!net.all_finite()) {
      throw NumericError("non-finite parameters after epoch " + std::to_string(epoch));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.val_loss = evaluate_loss(net, val_set);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (stopper.update(epoch, rec.val_loss)) {
      result.net = net;
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
    }
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace fovlab::segnet
