#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nst {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

// Writes via a temp file in the same directory followed by a rename, so an
// interrupted write never leaves a truncated file at `path`.
void atomic_write_file(const std::filesystem::path& path, const void* data, std::size_t size);
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

std::uint64_t fnv1a_hash(const void* data, std::size_t size, std::uint64_t seed = 1469598103934665603ull);

}  // namespace nst
