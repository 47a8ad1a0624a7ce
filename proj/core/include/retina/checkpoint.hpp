#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "retina/optimizer.hpp"

namespace retina {

/// Binary layout ("RKCK"), all integers little-endian:
///   magic "RKCK" | version u32 | tensor count u32
///   per tensor: name length u16 | UTF-8 name | rank u8 | dims u32 x rank | f32 payload
///   config length u32 | UTF-8 JSON run-config
/// Parameters come first, then "<name>.m" and "<name>.v" for each, then a
/// rank-0 "step" tensor.
struct Checkpoint {
  Parameters params;
  AdamState adam;
  std::string config_json;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace retina
