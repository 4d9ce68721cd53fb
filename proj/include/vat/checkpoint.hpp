#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "vat/ppo.hpp"

namespace vat {

// Layout, all integers little-endian:
//   8 bytes  magic "VATCKPT\0"
//   1 byte   version (1)
//   u32      observation size
//   u32      action count
//   u32      hidden layer count L, then L x u32 hidden sizes
//   u64      parameter count N, then N x IEEE-754 binary64
//   u64      config text length M, then M bytes of config text

inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  PolicyParams params;
  std::string config_text;
};

void write_checkpoint(std::ostream& out, const PolicyParams& params, std::string_view config_text);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params, std::string_view config_text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vat
