#include "nst/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "nst/errors.hpp"
#include "nst/fileio.hpp"

namespace nst {

namespace {

unsigned char quantize(double v) {
    const double r = std::round(v * 255.0);
    return static_cast<unsigned char>(std::clamp(r, 0.0, 255.0));
}

void check_image_tensor(const Tensor& image) {
    if (image.rank() != 4 || image.extent(0) != 1 || image.extent(1) != 3 || image.extent(2) == 0 ||
        image.extent(3) == 0) {
        throw std::invalid_argument("expected a [1,3,H,W] image tensor, got " + shape_str(image.shape()));
    }
}

Tensor from_rgb8(const unsigned char* px, std::size_t h, std::size_t w) {
    Tensor out(Shape{1, 3, h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(0, c, y, x) = static_cast<double>(px[(y * w + x) * 3 + c]) / 255.0;
            }
        }
    }
    return out;
}

std::vector<unsigned char> to_rgb8(const Tensor& image) {
    const std::size_t h = image.extent(2), w = image.extent(3);
    std::vector<unsigned char> px(h * w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                px[(y * w + x) * 3 + c] = quantize(image.at(0, c, y, x));
            }
        }
    }
    return px;
}

// ---- PPM (P6, maxval 255) ----

struct PpmScanner {
    std::span<const unsigned char> bytes;
    std::size_t pos = 0;

    bool at_end() const { return pos >= bytes.size(); }

    void skip_space_and_comments() {
        while (!at_end()) {
            const unsigned char c = bytes[pos];
            if (c == '#') {
                while (!at_end() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::size_t read_uint() {
        skip_space_and_comments();
        const std::size_t start = pos;
        std::size_t value = 0;
        while (!at_end() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            value = value * 10 + (bytes[pos] - '0');
            ++pos;
        }
        if (pos == start) throw ParseError("expected an integer in PPM header", start);
        return value;
    }
};

}  // namespace

Tensor decode_ppm(std::span<const unsigned char> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw ParseError("bad PPM magic (want P6) at byte offset 0", 0);
    }
    PpmScanner sc{bytes, 2};
    const std::size_t w = sc.read_uint();
    const std::size_t h = sc.read_uint();
    const std::size_t maxval = sc.read_uint();
    if (w == 0 || h == 0) throw ParseError("zero PPM dimensions", sc.pos);
    if (maxval != 255) {
        throw UnsupportedFormatError("unsupported PPM maxval " + std::to_string(maxval) + " (only 255)");
    }
    if (sc.at_end()) throw ParseError("missing whitespace after PPM maxval", sc.pos);
    ++sc.pos;  // single whitespace separator before the raster
    if (bytes.size() - sc.pos < h * w * 3) {
        throw ParseError("truncated PPM pixel data", bytes.size());
    }
    return from_rgb8(bytes.data() + sc.pos, h, w);
}

std::vector<unsigned char> encode_ppm(const Tensor& image) {
    check_image_tensor(image);
    const std::size_t h = image.extent(2), w = image.extent(3);
    const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    const std::vector<unsigned char> px = to_rgb8(image);
    out.insert(out.end(), px.begin(), px.end());
    return out;
}

// ---- PNG (8-bit RGB, non-interlaced) ----

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void append_chunk(std::vector<unsigned char>& out, const char type[4], const unsigned char* data,
                  std::size_t size) {
    put_be32(out, static_cast<std::uint32_t>(size));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data, data + size);
    const uLong crc = crc32(0, out.data() + type_at, static_cast<uInt>(4 + size));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

unsigned char paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
    if (pb <= pc) return static_cast<unsigned char>(b);
    return static_cast<unsigned char>(c);
}

}  // namespace

Tensor decode_png(std::span<const unsigned char> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
        throw ParseError("bad PNG signature at byte offset 0", 0);
    }
    std::size_t pos = 8;
    bool seen_ihdr = false, seen_iend = false;
    std::size_t width = 0, height = 0;
    std::vector<unsigned char> idat;
    while (pos + 12 <= bytes.size() && !seen_iend) {
        const std::uint32_t len = be32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw ParseError("truncated PNG chunk", pos);
        const unsigned char* type = bytes.data() + pos + 4;
        const unsigned char* data = bytes.data() + pos + 8;
        const std::uint32_t want_crc = be32(data + len);
        const uLong got_crc = crc32(0, type, static_cast<uInt>(4 + len));
        if (static_cast<std::uint32_t>(got_crc) != want_crc) {
            throw ParseError("PNG chunk CRC mismatch", pos);
        }
        const std::string name(reinterpret_cast<const char*>(type), 4);
        if (name == "IHDR") {
            if (len != 13) throw ParseError("bad IHDR length", pos);
            width = be32(data);
            height = be32(data + 4);
            const unsigned char depth = data[8], color = data[9], comp = data[10], filt = data[11],
                                interlace = data[12];
            if (depth != 8 || color != 2) {
                throw UnsupportedFormatError("unsupported PNG format (need 8-bit RGB, color type 2)");
            }
            if (comp != 0 || filt != 0) throw UnsupportedFormatError("unsupported PNG compression/filter method");
            if (interlace != 0) throw UnsupportedFormatError("interlaced PNG not supported");
            seen_ihdr = true;
        } else if (name == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (name == "IEND") {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || !seen_iend) throw ParseError("missing PNG chunks", pos);
    if (width == 0 || height == 0) throw ParseError("zero PNG dimensions", 0);

    const std::size_t stride = width * 3;
    std::vector<unsigned char> raw(height * (stride + 1));
    uLongf raw_len = raw.size();
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw ParseError("PNG inflate failed", pos);
    }

    std::vector<unsigned char> px(height * stride);
    for (std::size_t y = 0; y < height; ++y) {
        const unsigned char filter = raw[y * (stride + 1)];
        const unsigned char* src = raw.data() + y * (stride + 1) + 1;
        unsigned char* dst = px.data() + y * stride;
        const unsigned char* up = y > 0 ? px.data() + (y - 1) * stride : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= 3 ? dst[i - 3] : 0;
            const int above = up ? up[i] : 0;
            const int upleft = (up && i >= 3) ? up[i - 3] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += above; break;
                case 3: v += (left + above) / 2; break;
                case 4: v += paeth(left, above, upleft); break;
                default: throw ParseError("unknown PNG row filter", y);
            }
            dst[i] = static_cast<unsigned char>(v & 0xff);
        }
    }
    return from_rgb8(px.data(), height, width);
}

std::vector<unsigned char> encode_png(const Tensor& image) {
    check_image_tensor(image);
    const std::size_t h = image.extent(2), w = image.extent(3);
    const std::size_t stride = w * 3;
    const std::vector<unsigned char> px = to_rgb8(image);

    std::vector<unsigned char> raw(h * (stride + 1));
    for (std::size_t y = 0; y < h; ++y) {
        raw[y * (stride + 1)] = 0;  // filter: none
        std::memcpy(raw.data() + y * (stride + 1) + 1, px.data() + y * stride, stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION) !=
        Z_OK) {
        throw std::runtime_error("PNG deflate failed");
    }
    compressed.resize(bound);

    std::vector<unsigned char> out(kPngSignature, kPngSignature + 8);
    unsigned char ihdr[13];
    ihdr[0] = static_cast<unsigned char>(w >> 24);
    ihdr[1] = static_cast<unsigned char>(w >> 16);
    ihdr[2] = static_cast<unsigned char>(w >> 8);
    ihdr[3] = static_cast<unsigned char>(w);
    ihdr[4] = static_cast<unsigned char>(h >> 24);
    ihdr[5] = static_cast<unsigned char>(h >> 16);
    ihdr[6] = static_cast<unsigned char>(h >> 8);
    ihdr[7] = static_cast<unsigned char>(h);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // color type: RGB
    ihdr[10] = 0;  // compression
    ihdr[11] = 0;  // filter method
    ihdr[12] = 0;  // no interlace
    append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
    append_chunk(out, "IDAT", compressed.data(), compressed.size());
    append_chunk(out, "IEND", nullptr, 0);
    return out;
}

Tensor load_image(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file_bytes(path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
        return decode_png(bytes);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        return decode_ppm(bytes);
    }
    throw ParseError("unrecognized image magic in " + path.string() + " at byte offset 0", 0);
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    std::vector<unsigned char> bytes;
    if (ext == ".ppm") {
        bytes = encode_ppm(image);
    } else if (ext == ".png") {
        bytes = encode_png(image);
    } else {
        throw UnsupportedFormatError("unsupported image extension '" + ext + "' (use .ppm or .png)");
    }
    atomic_write_file(path, bytes.data(), bytes.size());
}

std::uint64_t image_content_hash(const Tensor& image) {
    check_image_tensor(image);
    const std::vector<unsigned char> px = to_rgb8(image);
    std::uint64_t h = fnv1a_hash(px.data(), px.size());
    const std::size_t dims[2] = {image.extent(2), image.extent(3)};
    return fnv1a_hash(dims, sizeof(dims), h);
}

Corpus load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("corpus directory does not exist: " + dir.string());
    }
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".png") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    Corpus corpus;
    for (const auto& p : paths) {
        corpus.images.push_back(load_image(p));
        corpus.ids.push_back(p.stem().string());
        corpus.hashes.push_back(image_content_hash(corpus.images.back()));
    }
    return corpus;
}

}  // namespace nst
