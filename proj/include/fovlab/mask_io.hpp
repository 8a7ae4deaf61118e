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

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "fovlab/grid.hpp"

namespace fovlab {

// Binary PGM: "P5\n<res> <res>\n255\n" then res*res bytes, visible = 255,
// invisible = 0. The first image row is the highest-y grid row, so the file
// renders with +y up.
void write_mask_pgm(std::ostream& os, const FovMask& mask);
FovMask read_mask_pgm(std::istream& is, const GridSpec& spec);
void save_mask(const std::filesystem::path& path, const FovMask& mask);
FovMask load_mask(const std::filesystem::path& path, const GridSpec& spec);

// 8-bit grayscale rendering of a probability or sigma map (values clamped to
// [0, scale] and mapped to 0..255).
void save_gray_pgm(const std::filesystem::path& path, const GridSpec& spec,
                   const std::vector<double>& values, double scale = 1.0);

}  // namespace fovlab
