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

#include "fovlab/segnet/checkpoint.hpp"

#include <fstream>
#include <string>

#include "fovlab/binary_io.hpp"
#include "fovlab/errors.hpp"

namespace fovlab::segnet {

void write_checkpoint(std::ostream& os, const Network& net) {
  const nlohmann::json header = {{"net", config_to_json(net.config())},
                                 {"seed", net.seed()},
                                 {"parameter_count", net.parameter_count()}};
  const std::string text = header.dump();
  os.write("FVNT", 4);
  binary::write_u32(os, kCheckpointVersion);
  binary::write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (float v : net.parameters()) binary::write_f32(os, v);
  if (!os) throw DataError("failed to write checkpoint");
}

Network read_checkpoint(std::istream& is) {
  binary::expect_magic(is, "FVNT", "checkpoint");
  const std::uint32_t version = binary::read_u32(is);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t len = binary::read_u32(is);
  if (len > (1u << 20)) throw DataError("checkpoint header too large");
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (!is) throw DataError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  NetConfig cfg;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  try {
    cfg = config_from_json(header.at("net"));
    seed = header.at("seed").get<std::uint64_t>();
    count = header.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  if (count != cfg.parameter_count()) {
    throw DataError("checkpoint parameter count does not match its configuration");
  }
  std::vector<float> params(count);
  for (auto& v : params) v = binary::read_f32(is);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after checkpoint parameters");
  }
  return Network::from_parameters(cfg, seed, std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, net);
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace fovlab::segnet
