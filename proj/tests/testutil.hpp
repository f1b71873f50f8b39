#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nst/tensor.hpp"

namespace testutil {

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string tensor_checksum(const nst::Tensor& t) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t e : t.shape()) h = fnv1a(&e, sizeof(e), h);
    h = fnv1a(t.data(), t.size() * sizeof(double), h);
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

inline std::filesystem::path source_dir() { return std::filesystem::path(NST_SOURCE_DIR); }
inline std::filesystem::path golden_dir() { return source_dir() / "tests" / "golden"; }

inline bool regen_mode() { return std::getenv("NST_REGEN_GOLDEN") != nullptr; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& contents) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << contents;
}

// Returns the frozen expectation for `name`, regenerating it from `actual`
// when NST_REGEN_GOLDEN is set.
inline std::string golden(const std::string& name, const std::string& actual) {
    const auto path = golden_dir() / name;
    if (regen_mode()) write_file(path, actual);
    return read_file(path);
}

}  // namespace testutil
