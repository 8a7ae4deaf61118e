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

#include "fovlab/mask_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "fovlab/errors.hpp"

namespace fovlab {

namespace {

void write_header(std::ostream& os, int res) {
  os << "P5\n" << res << ' ' << res << "\n255\n";
}

}  // namespace

void write_mask_pgm(std::ostream& os, const FovMask& mask) {
  const int res = mask.spec.resolution;
  write_header(os, res);
  std::string row(static_cast<std::size_t>(res), '\0');
  for (int iy = res - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < res; ++ix) {
      row[ix] = mask.visible[mask.spec.index(ix, iy)] ? static_cast<char>(255) : 0;
    }
    os.write(row.data(), res);
  }
}

FovMask read_mask_pgm(std::istream& is, const GridSpec& spec) {
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  if (!(is >> magic >> w >> h >> maxval) || magic != "P5") {
    throw DataError("mask: not a binary PGM (P5)");
  }
  if (w != spec.resolution || h != spec.resolution) {
    throw DataError("mask: size " + std::to_string(w) + "x" + std::to_string(h) +
                    " does not match grid resolution " +
                    std::to_string(spec.resolution));
  }
  if (maxval != 255) throw DataError("mask: maxval must be 255");
  is.get();  // single whitespace after the header
  FovMask mask(spec);
  std::string row(static_cast<std::size_t>(w), '\0');
  for (int iy = h - 1; iy >= 0; --iy) {
    if (!is.read(row.data(), w)) throw DataError("mask: truncated pixel data");
    for (int ix = 0; ix < w; ++ix) {
      const auto v = static_cast<unsigned char>(row[ix]);
      if (v != 0 && v != 255) throw DataError("mask: pixel values must be 0 or 255");
      mask.visible[spec.index(ix, iy)] = v == 255;
    }
  }
  return mask;
}

void save_mask(const std::filesystem::path& path, const FovMask& mask) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  write_mask_pgm(os, mask);
}

FovMask load_mask(const std::filesystem::path& path, const GridSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return read_mask_pgm(is, spec);
}

void save_gray_pgm(const std::filesystem::path& path, const GridSpec& spec,
                   const std::vector<double>& values, double scale) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  const int res = spec.resolution;
  write_header(os, res);
  for (int iy = res - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < res; ++ix) {
      const double v = std::clamp(values[spec.index(ix, iy)] / scale, 0.0, 1.0);
      os.put(static_cast<char>(std::lround(v * 255.0)));
    }
  }
}

}  // namespace fovlab
