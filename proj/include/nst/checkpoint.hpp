#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "nst/config.hpp"
#include "nst/tensor.hpp"

namespace nst {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Single-file snapshot: magic "NSTC", u32 version, length-prefixed config
// text, named tensor table, trailing CRC32 of all preceding bytes. All
// integers little-endian. Tensor payloads are written at the precision the
// config selects (f64 or f32), so a save/load round trip is bitwise lossless.
struct Checkpoint {
    RunConfig config;
    std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

}  // namespace nst
