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

#include "fovlab/segnet/unet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Core>

#include "fovlab/errors.hpp"
#include "fovlab/json_util.hpp"
#include "fovlab/parallel.hpp"
#include "fovlab/random.hpp"

namespace fovlab::segnet {

namespace {

template <typename S>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<S> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, S(0)) {}
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  S* ch(int i) { return v.data() + i * plane(); }
  const S* ch(int i) const { return v.data() + i * plane(); }
};

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRow = Eigen::Map<RowMat<S>, 0, Eigen::OuterStride<>>;
template <typename S>
using CMapRow = Eigen::Map<const RowMat<S>, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer entries; larger images are processed in
// horizontal bands.
constexpr std::size_t kTileElems = std::size_t{1} << 20;

int band_rows(int k_rows, int h, int w) {
  const std::size_t per_row = static_cast<std::size_t>(k_rows) * w;
  const int rows = static_cast<int>(std::max<std::size_t>(1, kTileElems / per_row));
  return std::min(rows, h);
}

// Rows of `col` are (channel, ky, kx); columns are pixels of rows [r0, r1).
template <typename S>
void im2col3(const Tensor<S>& x, int r0, int r1, S* col) {
  const int w = x.w;
  const std::size_t p = static_cast<std::size_t>(r1 - r0) * w;
  for (int c = 0; c < x.c; ++c) {
    const S* src = x.ch(c);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* dst = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * p;
        for (int y = r0; y < r1; ++y) {
          S* d = dst + static_cast<std::size_t>(y - r0) * w;
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= x.h) {
            std::fill(d, d + w, S(0));
            continue;
          }
          const S* s = src + static_cast<std::size_t>(sy) * w;
          if (kx == 1) {
            std::copy(s, s + w, d);
          } else if (kx == 0) {
            d[0] = S(0);
            std::copy(s, s + w - 1, d + 1);
          } else {
            std::copy(s + 1, s + w, d);
            d[w - 1] = S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im3_add(const S* col, int r0, int r1, Tensor<S>& dx) {
  const int w = dx.w;
  const std::size_t p = static_cast<std::size_t>(r1 - r0) * w;
  for (int c = 0; c < dx.c; ++c) {
    S* dst = dx.ch(c);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* src = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * p;
        for (int y = r0; y < r1; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= dx.h) continue;
          const S* s = src + static_cast<std::size_t>(y - r0) * w;
          S* d = dst + static_cast<std::size_t>(sy) * w;
          if (kx == 1) {
            for (int x = 0; x < w; ++x) d[x] += s[x];
          } else if (kx == 0) {
            for (int x = 1; x < w; ++x) d[x - 1] += s[x];
          } else {
            for (int x = 0; x + 1 < w; ++x) d[x + 1] += s[x];
          }
        }
      }
    }
  }
}

template <typename S>
Tensor<S> conv_forward(const ConvLayer& L, const S* params, const Tensor<S>& x) {
  Tensor<S> y(L.out, x.h, x.w);
  const int kk = L.in * L.kernel * L.kernel;
  const std::size_t hw = x.plane();
  CMapRow<S> wm(params + L.weight_offset, L.out, kk, Eigen::OuterStride<>(kk));
  if (L.kernel == 1) {
    CMapRow<S> xm(x.v.data(), L.in, hw, Eigen::OuterStride<>(hw));
    MapRow<S> ym(y.v.data(), L.out, hw, Eigen::OuterStride<>(hw));
    ym.noalias() = wm * xm;
  } else {
    const int rows = band_rows(kk, x.h, x.w);
    std::vector<S> col(static_cast<std::size_t>(kk) * rows * x.w);
    for (int r0 = 0; r0 < x.h; r0 += rows) {
      const int r1 = std::min(x.h, r0 + rows);
      const std::size_t p = static_cast<std::size_t>(r1 - r0) * x.w;
      im2col3(x, r0, r1, col.data());
      CMapRow<S> cm(col.data(), kk, p, Eigen::OuterStride<>(p));
      MapRow<S> ym(y.v.data() + static_cast<std::size_t>(r0) * x.w, L.out, p,
                   Eigen::OuterStride<>(hw));
      ym.noalias() = wm * cm;
    }
  }
  const S* b = params + L.bias_offset;
  for (int o = 0; o < L.out; ++o) {
    S* yo = y.ch(o);
    for (std::size_t i = 0; i < hw; ++i) yo[i] += b[o];
  }
  return y;
}

// Accumulates weight/bias gradients into `grad`; writes input gradient into
// `dx` when given (dx must be zero-initialized with x's shape).
template <typename S>
void conv_backward(const ConvLayer& L, const S* params, const Tensor<S>& x,
                   const Tensor<S>& dy, S* grad, Tensor<S>* dx) {
  const int kk = L.in * L.kernel * L.kernel;
  const std::size_t hw = x.plane();
  CMapRow<S> wm(params + L.weight_offset, L.out, kk, Eigen::OuterStride<>(kk));
  MapRow<S> dw(grad + L.weight_offset, L.out, kk, Eigen::OuterStride<>(kk));
  S* db = grad + L.bias_offset;
  for (int o = 0; o < L.out; ++o) {
    const S* g = dy.ch(o);
    S s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += g[i];
    db[o] += s;
  }
  if (L.kernel == 1) {
    CMapRow<S> xm(x.v.data(), L.in, hw, Eigen::OuterStride<>(hw));
    CMapRow<S> gm(dy.v.data(), L.out, hw, Eigen::OuterStride<>(hw));
    dw.noalias() += gm * xm.transpose();
    if (dx) {
      MapRow<S> dxm(dx->v.data(), L.in, hw, Eigen::OuterStride<>(hw));
      dxm.noalias() += wm.transpose() * gm;
    }
    return;
  }
  const int rows = band_rows(kk, x.h, x.w);
  std::vector<S> col(static_cast<std::size_t>(kk) * rows * x.w);
  std::vector<S> dcol(dx ? col.size() : 0);
  for (int r0 = 0; r0 < x.h; r0 += rows) {
    const int r1 = std::min(x.h, r0 + rows);
    const std::size_t p = static_cast<std::size_t>(r1 - r0) * x.w;
    im2col3(x, r0, r1, col.data());
    CMapRow<S> cm(col.data(), kk, p, Eigen::OuterStride<>(p));
    CMapRow<S> gm(dy.v.data() + static_cast<std::size_t>(r0) * x.w, L.out, p,
                  Eigen::OuterStride<>(hw));
    dw.noalias() += gm * cm.transpose();
    if (dx) {
      MapRow<S> dcm(dcol.data(), kk, p, Eigen::OuterStride<>(p));
      dcm.noalias() = wm.transpose() * gm;
      col2im3_add(dcol.data(), r0, r1, *dx);
    }
  }
}

template <typename S>
void relu_inplace(Tensor<S>& t) {
  for (auto& v : t.v) v = v > S(0) ? v : S(0);
}

// Zeroes gradient entries where the ReLU output was not positive.
template <typename S>
void relu_backward(const Tensor<S>& out, Tensor<S>& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i) {
    if (!(out.v[i] > S(0))) grad.v[i] = S(0);
  }
}

template <typename S>
Tensor<S> maxpool_forward(const Tensor<S>& x, std::vector<std::uint32_t>* argmax) {
  Tensor<S> y(x.c, x.h / 2, x.w / 2);
  if (argmax) argmax->resize(y.v.size());
  std::size_t k = 0;
  for (int c = 0; c < x.c; ++c) {
    const S* src = x.ch(c);
    for (int i = 0; i < y.h; ++i) {
      for (int j = 0; j < y.w; ++j, ++k) {
        std::uint32_t best = static_cast<std::uint32_t>((2 * i) * x.w + 2 * j);
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const auto idx = static_cast<std::uint32_t>((2 * i + a) * x.w + 2 * j + b);
            if (src[idx] > src[best]) best = idx;
          }
        }
        y.v[k] = src[best];
        if (argmax) (*argmax)[k] = best;
      }
    }
  }
  return y;
}

template <typename S>
void maxpool_backward_add(const Tensor<S>& dy, const std::vector<std::uint32_t>& argmax,
                          Tensor<S>& dx) {
  std::size_t k = 0;
  for (int c = 0; c < dy.c; ++c) {
    S* d = dx.ch(c);
    for (std::size_t i = 0; i < dy.plane(); ++i, ++k) d[argmax[k]] += dy.v[k];
  }
}

template <typename S>
Tensor<S> upsample_forward(const Tensor<S>& x) {
  Tensor<S> y(x.c, 2 * x.h, 2 * x.w);
  for (int c = 0; c < x.c; ++c) {
    const S* s = x.ch(c);
    S* d = y.ch(c);
    for (int i = 0; i < y.h; ++i) {
      for (int j = 0; j < y.w; ++j) d[i * y.w + j] = s[(i / 2) * x.w + j / 2];
    }
  }
  return y;
}

template <typename S>
Tensor<S> upsample_backward(const Tensor<S>& dy) {
  Tensor<S> dx(dy.c, dy.h / 2, dy.w / 2);
  for (int c = 0; c < dy.c; ++c) {
    const S* s = dy.ch(c);
    S* d = dx.ch(c);
    for (int i = 0; i < dy.h; ++i) {
      for (int j = 0; j < dy.w; ++j) d[(i / 2) * dx.w + j / 2] += s[i * dy.w + j];
    }
  }
  return dx;
}

template <typename S>
Tensor<S> concat(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> y(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), y.v.begin());
  std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.v.size());
  return y;
}

// Inverted dropout: kept units are scaled by 1 / (1 - rate).
template <typename S>
std::vector<S> dropout_mask(std::size_t n, double rate, std::uint64_t seed, int layer) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(layer)}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  std::vector<S> mask(n);
  for (auto& m : mask) m = unit(rng) < rate ? S(0) : keep;
  return mask;
}

template <typename S>
struct Block {
  Tensor<S> in, r1, r2, out;
  std::vector<S> mask;
};

template <typename S>
struct Cache {
  std::vector<Block<S>> enc;
  std::vector<std::vector<std::uint32_t>> argmax;
  Block<S> bottleneck;
  std::vector<Tensor<S>> up;      // decoder step s: upsampled input
  std::vector<Block<S>> dec;      // decoder step s: block after concat
  std::vector<S> prob;
};

struct LayerIndex {
  int depth;
  int enc(int level, int j) const { return 2 * level + j; }
  int bottleneck(int j) const { return 2 * depth + j; }
  int dec(int step, int j) const { return 2 * depth + 2 + 3 * step + j; }
  int head() const { return 5 * depth + 2; }
};

}  // namespace

void NetConfig::validate() const {
  if (depth < 3 || depth > 6) {
    throw ConfigError("net depth must be in [3, 6], got " + std::to_string(depth));
  }
  if (base_channels != 4 && base_channels != 8 && base_channels != 16 &&
      base_channels != 32 && base_channels != 64) {
    throw ConfigError("net base_channels must be one of 4, 8, 16, 32, 64; got " +
                      std::to_string(base_channels));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("net dropout_rate must be in [0, 1)");
  }
  if (resolution < 8 || resolution % (1 << depth) != 0) {
    throw ConfigError("net resolution " + std::to_string(resolution) +
                      " is not divisible by 2^depth = " + std::to_string(1 << depth));
  }
}

std::size_t NetConfig::parameter_count() const {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) {
    return out * in * k * k + out;
  };
  std::size_t n = 0;
  for (int l = 0; l < depth; ++l) {
    n += conv(l == 0 ? 1 : channels(l - 1), channels(l), 3) +
         conv(channels(l), channels(l), 3);
  }
  n += conv(channels(depth - 1), channels(depth), 3) +
       conv(channels(depth), channels(depth), 3);
  for (int l = depth - 1; l >= 0; --l) {
    n += conv(channels(l + 1), channels(l), 3) +
         conv(2 * channels(l), channels(l), 3) + conv(channels(l), channels(l), 3);
  }
  n += conv(channels(0), 1, 1);
  return n;
}

nlohmann::json config_to_json(const NetConfig& cfg) {
  return {{"depth", cfg.depth},
          {"base_channels", cfg.base_channels},
          {"dropout_rate", cfg.dropout_rate},
          {"resolution", cfg.resolution}};
}

NetConfig config_from_json(const nlohmann::json& j) {
  constexpr std::string_view where = "net";
  jsonutil::check_keys(j, {"depth", "base_channels", "dropout_rate", "resolution"}, where);
  NetConfig cfg;
  jsonutil::read(j, "depth", cfg.depth, where);
  jsonutil::read(j, "base_channels", cfg.base_channels, where);
  jsonutil::read(j, "dropout_rate", cfg.dropout_rate, where);
  jsonutil::read(j, "resolution", cfg.resolution, where);
  cfg.validate();
  return cfg;
}

template <typename Scalar>
void UNet<Scalar>::build_layers() {
  layers_.clear();
  std::size_t off = 0;
  auto add = [&](int in, int out, int k) {
    ConvLayer L{in, out, k, off, 0};
    L.bias_offset = off + L.weight_count();
    off = L.bias_offset + out;
    layers_.push_back(L);
  };
  const int d = cfg_.depth;
  for (int l = 0; l < d; ++l) {
    add(l == 0 ? 1 : cfg_.channels(l - 1), cfg_.channels(l), 3);
    add(cfg_.channels(l), cfg_.channels(l), 3);
  }
  add(cfg_.channels(d - 1), cfg_.channels(d), 3);
  add(cfg_.channels(d), cfg_.channels(d), 3);
  for (int l = d - 1; l >= 0; --l) {
    add(cfg_.channels(l + 1), cfg_.channels(l), 3);
    add(2 * cfg_.channels(l), cfg_.channels(l), 3);
    add(cfg_.channels(l), cfg_.channels(l), 3);
  }
  add(cfg_.channels(0), 1, 1);
  params_.assign(off, Scalar(0));
}

template <typename Scalar>
UNet<Scalar>::UNet(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  build_layers();
  Rng rng(derive_seed(seed, {label_hash("he-uniform")}));
  for (const auto& L : layers_) {
    const double limit = std::sqrt(6.0 / (L.in * L.kernel * L.kernel));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < L.weight_count(); ++i) {
      params_[L.weight_offset + i] = static_cast<Scalar>(dist(rng));
    }
  }
}

template <typename Scalar>
UNet<Scalar> UNet<Scalar>::zeros(const NetConfig& cfg) {
  UNet net;
  net.cfg_ = cfg;
  net.cfg_.validate();
  net.build_layers();
  return net;
}

template <typename Scalar>
UNet<Scalar> UNet<Scalar>::from_parameters(const NetConfig& cfg, std::uint64_t seed,
                                           std::vector<Scalar> params) {
  UNet net = zeros(cfg);
  if (params.size() != net.params_.size()) {
    throw DataError("expected " + std::to_string(net.params_.size()) +
                    " parameters, got " + std::to_string(params.size()));
  }
  net.seed_ = seed;
  net.params_ = std::move(params);
  return net;
}

template <typename Scalar>
bool UNet<Scalar>::all_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](Scalar v) { return std::isfinite(v); });
}

namespace {

template <typename S>
void block_forward(const std::vector<ConvLayer>& layers, const S* P, int la, int lb,
                   Tensor<S> in, std::optional<std::uint64_t> seed, int drop_id,
                   double rate, Block<S>& b) {
  b.in = std::move(in);
  b.r1 = conv_forward(layers[la], P, b.in);
  relu_inplace(b.r1);
  b.r2 = conv_forward(layers[lb], P, b.r1);
  relu_inplace(b.r2);
  b.out = b.r2;
  b.mask.clear();
  if (seed && rate > 0.0) {
    b.mask = dropout_mask<S>(b.out.v.size(), rate, *seed, drop_id);
    for (std::size_t i = 0; i < b.out.v.size(); ++i) b.out.v[i] *= b.mask[i];
  }
}

template <typename S>
Tensor<S> block_backward(const std::vector<ConvLayer>& layers, const S* P, S* G,
                         int la, int lb, const Block<S>& b, Tensor<S> dout,
                         bool need_dx) {
  if (!b.mask.empty()) {
    for (std::size_t i = 0; i < dout.v.size(); ++i) dout.v[i] *= b.mask[i];
  }
  relu_backward(b.r2, dout);
  Tensor<S> dr1(b.r1.c, b.r1.h, b.r1.w);
  conv_backward(layers[lb], P, b.r1, dout, G, &dr1);
  relu_backward(b.r1, dr1);
  Tensor<S> din;
  if (need_dx) din = Tensor<S>(b.in.c, b.in.h, b.in.w);
  conv_backward(layers[la], P, b.in, dr1, G, need_dx ? &din : nullptr);
  return din;
}

template <typename S>
void run_forward(const NetConfig& cfg, const std::vector<ConvLayer>& layers, const S* P,
                 std::span<const S> input, std::optional<std::uint64_t> seed,
                 Cache<S>& cache) {
  const int d = cfg.depth;
  const LayerIndex li{d};
  const double rate = cfg.dropout_rate;
  Tensor<S> x(1, cfg.resolution, cfg.resolution);
  std::copy(input.begin(), input.end(), x.v.begin());

  cache.enc.resize(d);
  cache.argmax.resize(d);
  for (int l = 0; l < d; ++l) {
    block_forward(layers, P, li.enc(l, 0), li.enc(l, 1), std::move(x), seed, l, rate,
                  cache.enc[l]);
    x = maxpool_forward(cache.enc[l].out, &cache.argmax[l]);
  }
  block_forward(layers, P, li.bottleneck(0), li.bottleneck(1), std::move(x), seed, d,
                rate, cache.bottleneck);
  const Tensor<S>* z = &cache.bottleneck.out;
  cache.up.resize(d);
  cache.dec.resize(d);
  for (int s = 0; s < d; ++s) {
    const int l = d - 1 - s;
    cache.up[s] = upsample_forward(*z);
    Tensor<S> u = conv_forward(layers[li.dec(s, 0)], P, cache.up[s]);
    block_forward(layers, P, li.dec(s, 1), li.dec(s, 2), concat(u, cache.enc[l].out),
                  seed, d + 1 + s, rate, cache.dec[s]);
    z = &cache.dec[s].out;
  }
  Tensor<S> logits = conv_forward(layers[li.head()], P, *z);
  cache.prob.resize(logits.v.size());
  for (std::size_t i = 0; i < logits.v.size(); ++i) {
    cache.prob[i] = S(1) / (S(1) + std::exp(-logits.v[i]));
  }
}

void check_input_size(std::size_t got, const NetConfig& cfg) {
  const auto want = static_cast<std::size_t>(cfg.resolution) * cfg.resolution;
  if (got != want) {
    throw DataError("network expects " + std::to_string(cfg.resolution) + "x" +
                    std::to_string(cfg.resolution) + " input, got " +
                    std::to_string(got) + " values");
  }
}

}  // namespace

template <typename Scalar>
std::vector<Scalar> UNet<Scalar>::forward(std::span<const Scalar> input,
                                          std::optional<std::uint64_t> dropout_seed) const {
  check_input_size(input.size(), cfg_);
  Cache<Scalar> cache;
  run_forward(cfg_, layers_, params_.data(), input, dropout_seed, cache);
  return std::move(cache.prob);
}

template <typename Scalar>
double UNet<Scalar>::loss_and_gradient(std::span<const Scalar> input,
                                       std::span<const std::uint8_t> target,
                                       std::optional<std::uint64_t> dropout_seed,
                                       std::span<Scalar> grad) const {
  check_input_size(input.size(), cfg_);
  check_input_size(target.size(), cfg_);
  if (grad.size() != params_.size()) throw DataError("gradient buffer size mismatch");

  Cache<Scalar> cache;
  const Scalar* P = params_.data();
  Scalar* G = grad.data();
  run_forward(cfg_, layers_, P, input, dropout_seed, cache);

  const int d = cfg_.depth;
  const LayerIndex li{d};
  const std::size_t n = cache.prob.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  Tensor<Scalar> dlogit(1, cfg_.resolution, cfg_.resolution);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(static_cast<double>(cache.prob[i]), 1e-7, 1.0 - 1e-7);
    const double t = target[i] ? 1.0 : 0.0;
    loss -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    // Gradient of the logit-form BCE; equals the clamped loss gradient
    // wherever the clamp is inactive.
    dlogit.v[i] = static_cast<Scalar>((static_cast<double>(cache.prob[i]) - t) * inv_n);
  }
  loss *= inv_n;

  const Block<Scalar>& last = cache.dec[d - 1];
  Tensor<Scalar> dz(last.out.c, last.out.h, last.out.w);
  conv_backward(layers_[li.head()], P, last.out, dlogit, G, &dz);

  std::vector<Tensor<Scalar>> dskip(d);
  for (int l = 0; l < d; ++l) {
    const auto& o = cache.enc[l].out;
    dskip[l] = Tensor<Scalar>(o.c, o.h, o.w);
  }
  for (int s = d - 1; s >= 0; --s) {
    const int l = d - 1 - s;
    Tensor<Scalar> dcat =
        block_backward(layers_, P, G, li.dec(s, 1), li.dec(s, 2), cache.dec[s], std::move(dz), true);
    const int cu = cfg_.channels(l);
    Tensor<Scalar> du(cu, dcat.h, dcat.w);
    std::copy(dcat.v.begin(), dcat.v.begin() + du.v.size(), du.v.begin());
    auto& ds = dskip[l].v;
    for (std::size_t i = 0; i < ds.size(); ++i) ds[i] += dcat.v[du.v.size() + i];
    const auto& up = cache.up[s];
    Tensor<Scalar> dup(up.c, up.h, up.w);
    conv_backward(layers_[li.dec(s, 0)], P, up, du, G, &dup);
    dz = upsample_backward(dup);
  }
  Tensor<Scalar> dpool = block_backward(layers_, P, G, li.bottleneck(0), li.bottleneck(1),
                                        cache.bottleneck, std::move(dz), true);
  for (int l = d - 1; l >= 0; --l) {
    maxpool_backward_add(dpool, cache.argmax[l], dskip[l]);
    dpool = block_backward(layers_, P, G, li.enc(l, 0), li.enc(l, 1), cache.enc[l],
                           std::move(dskip[l]), l > 0);
  }
  return loss;
}

template class UNet<float>;
template class UNet<double>;

template <typename Scalar>
std::vector<Scalar> normalize_input(const BevImage& image) {
  std::vector<Scalar> out(image.counts.size());
  double mx = 0.0;
  for (auto c : image.counts) mx = std::max(mx, std::log1p(static_cast<double>(c)));
  if (mx <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<Scalar>(std::log1p(static_cast<double>(image.counts[i])) / mx);
  }
  return out;
}

template std::vector<float> normalize_input<float>(const BevImage&);
template std::vector<double> normalize_input<double>(const BevImage&);

namespace {

void check_image(const Network& net, const BevImage& image) {
  if (image.spec.resolution != net.config().resolution) {
    throw DataError("image resolution " + std::to_string(image.spec.resolution) +
                    " does not match network resolution " +
                    std::to_string(net.config().resolution));
  }
}

}  // namespace

ProbMap forward(const Network& net, const BevImage& image, bool dropout_active,
                std::uint64_t seed) {
  check_image(net, image);
  const auto input = normalize_input<float>(image);
  const auto prob = net.forward(input, dropout_active ? std::optional(seed) : std::nullopt);
  ProbMap pm(image.spec);
  for (std::size_t i = 0; i < prob.size(); ++i) pm.values[i] = prob[i];
  return pm;
}

ProbMap infer_mle(const Network& net, const BevImage& image) {
  return forward(net, image, false);
}

McdResult infer_mcd(const Network& net, const BevImage& image, int passes,
                    std::uint64_t seed) {
  if (passes < 1) throw ConfigError("MC dropout needs at least one pass");
  check_image(net, image);
  const auto input = normalize_input<float>(image);
  std::vector<std::vector<float>> outs(passes);
  parallel_for(static_cast<std::size_t>(passes), [&](std::size_t t) {
    outs[t] = net.forward(input, derive_seed(seed, {label_hash("mcd"), t}));
  });
  // Welford accumulation in pass order keeps results independent of threading.
  McdResult r{ProbMap(image.spec), ConfidenceMap(image.spec)};
  std::vector<double> m2(r.mean.values.size(), 0.0);
  for (int t = 0; t < passes; ++t) {
    for (std::size_t i = 0; i < m2.size(); ++i) {
      const double x = outs[t][i];
      const double delta = x - r.mean.values[i];
      r.mean.values[i] += delta / (t + 1);
      m2[i] += delta * (x - r.mean.values[i]);
    }
  }
  for (std::size_t i = 0; i < m2.size(); ++i) {
    r.confidence.sigma[i] = std::sqrt(std::max(0.0, m2[i] / passes));
  }
  return r;
}

double loss_bce(const ProbMap& pred, const FovMask& target) {
  if (pred.values.size() != target.visible.size()) {
    throw DataError("loss_bce: prediction and target sizes differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = std::clamp(pred.values[i], 1e-7, 1.0 - 1e-7);
    s -= target.visible[i] ? std::log(p) : std::log(1.0 - p);
  }
  return s / static_cast<double>(pred.values.size());
}

FovMask binarize(const ProbMap& pm, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("binarize threshold must be in (0, 1)");
  }
  FovMask m(pm.spec);
  for (std::size_t i = 0; i < pm.values.size(); ++i) {
    m.visible[i] = pm.values[i] > threshold ? 1 : 0;
  }
  return m;
}

}  // namespace fovlab::segnet
