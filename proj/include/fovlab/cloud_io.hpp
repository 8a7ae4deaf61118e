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

#include "json.hpp"

#include "fovlab/geometry.hpp"

namespace fovlab {

// Binary point-cloud layout (all little-endian):
//   "FVPC" | u32 version=1 | 7 x f64 (px,py,pz,qw,qx,qy,qz) | u32 count |
//   count x 3 x f32
void write_cloud(std::ostream& os, const PointCloud& cloud);
PointCloud read_cloud(std::istream& is);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud load_cloud(const std::filesystem::path& path);

// CSV with header "x,y,z"; pose lives in a JSON sidecar
// {"position":[x,y,z],"quaternion":[w,x,y,z]}.
PointCloud load_cloud_csv(const std::filesystem::path& csv,
                          const std::filesystem::path& pose_json);
void save_cloud_csv(const std::filesystem::path& csv,
                    const std::filesystem::path& pose_json,
                    const PointCloud& cloud);

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

}  // namespace fovlab
