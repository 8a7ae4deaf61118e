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

#include "fovlab/cloud_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "fovlab/binary_io.hpp"
#include "fovlab/errors.hpp"

namespace fovlab {

namespace {

constexpr std::uint32_t kCloudVersion = 1;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

}  // namespace

void write_cloud(std::ostream& os, const PointCloud& cloud) {
  os.write("FVPC", 4);
  binary::write_u32(os, kCloudVersion);
  const auto& p = cloud.pose.position;
  const auto& q = cloud.pose.attitude;
  for (double v : {p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z()}) {
    binary::write_f64(os, v);
  }
  binary::write_u32(os, static_cast<std::uint32_t>(cloud.points.size()));
  for (const auto& pt : cloud.points) {
    binary::write_f32(os, static_cast<float>(pt.x()));
    binary::write_f32(os, static_cast<float>(pt.y()));
    binary::write_f32(os, static_cast<float>(pt.z()));
  }
}

PointCloud read_cloud(std::istream& is) {
  binary::expect_magic(is, "FVPC", "point cloud");
  const auto version = binary::read_u32(is);
  if (version != kCloudVersion) {
    throw DataError("unsupported point cloud version " +
                    std::to_string(version));
  }
  PointCloud cloud;
  double v[7];
  for (double& x : v) x = binary::read_f64(is);
  cloud.pose.position = Vec3(v[0], v[1], v[2]);
  cloud.pose.attitude = Eigen::Quaterniond(v[3], v[4], v[5], v[6]);
  const auto n = binary::read_u32(is);
  cloud.points.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const float x = binary::read_f32(is);
    const float y = binary::read_f32(is);
    const float z = binary::read_f32(is);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw DataError("non-finite point at index " + std::to_string(i));
    }
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  auto os = open_out(path);
  write_cloud(os, cloud);
  if (!os) throw DataError("write failed: " + path.string());
}

PointCloud load_cloud(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_cloud(is);
}

nlohmann::json pose_to_json(const Pose& pose) {
  const auto& p = pose.position;
  const auto& q = pose.attitude;
  return {{"position", {p.x(), p.y(), p.z()}},
          {"quaternion", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  try {
    const auto pos = j.at("position").get<std::vector<double>>();
    const auto quat = j.at("quaternion").get<std::vector<double>>();
    if (pos.size() != 3 || quat.size() != 4) {
      throw DataError("pose needs 3 position and 4 quaternion components");
    }
    Pose pose;
    pose.position = Vec3(pos[0], pos[1], pos[2]);
    pose.attitude = Eigen::Quaterniond(quat[0], quat[1], quat[2], quat[3]);
    return pose;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid pose JSON: ") + e.what());
  }
}

PointCloud load_cloud_csv(const std::filesystem::path& csv,
                          const std::filesystem::path& pose_json) {
  PointCloud cloud;
  {
    auto is = open_in(pose_json);
    try {
      cloud.pose = pose_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(pose_json.string() + ": " + e.what());
    }
  }
  auto is = open_in(csv);
  std::string line;
  if (!std::getline(is, line)) throw DataError(csv.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,z") {
    throw DataError(csv.string() + ": expected header \"x,y,z\"");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    double xyz[3];
    char comma = 0;
    if (!(ss >> xyz[0] >> comma) || comma != ',' || !(ss >> xyz[1] >> comma) ||
        comma != ',' || !(ss >> xyz[2])) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) +
                      ": malformed row");
    }
    if (!std::isfinite(xyz[0]) || !std::isfinite(xyz[1]) ||
        !std::isfinite(xyz[2])) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) +
                      ": non-finite coordinate");
    }
    cloud.points.emplace_back(xyz[0], xyz[1], xyz[2]);
  }
  return cloud;
}

void save_cloud_csv(const std::filesystem::path& csv,
                    const std::filesystem::path& pose_json,
                    const PointCloud& cloud) {
  {
    auto os = open_out(pose_json);
    os << pose_to_json(cloud.pose).dump(2) << '\n';
  }
  auto os = open_out(csv);
  os << "x,y,z\n";
  os.precision(17);
  for (const auto& p : cloud.points) {
    os << p.x() << ',' << p.y() << ',' << p.z() << '\n';
  }
}

}  // namespace fovlab
