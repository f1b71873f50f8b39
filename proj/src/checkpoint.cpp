#include "nst/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <stdexcept>

#include "nst/errors.hpp"
#include "nst/fileio.hpp"

namespace nst {

namespace {

constexpr char kMagic[4] = {'N', 'S', 'T', 'C'};
constexpr std::uint8_t kDtypeF64 = 0;
constexpr std::uint8_t kDtypeF32 = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

struct Reader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;

    template <typename T>
    T get() {
        if (pos + sizeof(T) > bytes.size()) {
            throw IntegrityError("truncated checkpoint at byte " + std::to_string(pos));
        }
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }

    std::string get_string(std::size_t len) {
        if (pos + len > bytes.size()) {
            throw IntegrityError("truncated checkpoint at byte " + std::to_string(pos));
        }
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), len);
        pos += len;
        return s;
    }
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
    const bool f32 = ckpt.config.precision == "f32";
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put<std::uint32_t>(out, kCheckpointVersion);

    const std::string config_text = serialize_config(ckpt.config);
    put<std::uint64_t>(out, config_text.size());
    out.insert(out.end(), config_text.begin(), config_text.end());

    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put<std::uint8_t>(out, f32 ? kDtypeF32 : kDtypeF64);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t e : tensor.shape()) put<std::uint64_t>(out, e);
        if (f32) {
            for (std::size_t i = 0; i < tensor.size(); ++i) put<float>(out, static_cast<float>(tensor[i]));
        } else {
            for (std::size_t i = 0; i < tensor.size(); ++i) put<double>(out, tensor[i]);
        }
    }

    const uLong crc = crc32(0, out.data(), static_cast<uInt>(out.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(crc));
    return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 4 + 4 + 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw IntegrityError("bad checkpoint magic");
    }
    const uLong want_crc = crc32(0, bytes.data(), static_cast<uInt>(bytes.size() - 4));
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    if (static_cast<std::uint32_t>(want_crc) != stored_crc) {
        throw IntegrityError("checkpoint CRC mismatch");
    }

    Reader r{bytes, 4};
    const std::uint32_t version = r.get<std::uint32_t>();
    if (version > kCheckpointVersion) {
        throw VersionError("checkpoint version " + std::to_string(version) + " is newer than supported " +
                           std::to_string(kCheckpointVersion));
    }

    Checkpoint ckpt;
    const std::uint64_t config_len = r.get<std::uint64_t>();
    ckpt.config = parse_config(r.get_string(config_len), "<checkpoint>");

    const std::uint32_t count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.get<std::uint32_t>();
        const std::string name = r.get_string(name_len);
        const std::uint8_t dtype = r.get<std::uint8_t>();
        if (dtype != kDtypeF64 && dtype != kDtypeF32) {
            throw IntegrityError("unknown tensor dtype tag " + std::to_string(dtype));
        }
        const std::uint32_t rank = r.get<std::uint32_t>();
        Shape shape(rank);
        for (std::uint32_t a = 0; a < rank; ++a) shape[a] = r.get<std::uint64_t>();
        Tensor t(shape);
        for (std::size_t e = 0; e < t.size(); ++e) {
            t[e] = dtype == kDtypeF32 ? static_cast<double>(r.get<float>()) : r.get<double>();
        }
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = encode_checkpoint(ckpt);
    atomic_write_file(path, bytes.data(), bytes.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file_bytes(path));
}

}  // namespace nst
