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

#include "fovlab/segnet/unet.hpp"

namespace fovlab::segnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "FVNT", u32 version, u32 header length, JSON header, then parameters as
// little-endian f32 in layer order.
void write_checkpoint(std::ostream& os, const Network& net);
Network read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace fovlab::segnet
