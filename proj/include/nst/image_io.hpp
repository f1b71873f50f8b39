#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nst/tensor.hpp"

namespace nst {

// Images are [1,3,H,W] tensors with values in [0,1]; files are binary PPM
// (P6, maxval 255) or 8-bit RGB PNG. Loading sniffs the magic bytes; saving
// dispatches on the extension (.ppm / .png) and writes atomically.
Tensor load_image(const std::filesystem::path& path);
void save_image(const Tensor& image, const std::filesystem::path& path);

Tensor decode_ppm(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_ppm(const Tensor& image);
Tensor decode_png(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_png(const Tensor& image);

// Format-independent content hash of the 8-bit quantized pixels.
std::uint64_t image_content_hash(const Tensor& image);

// All images under `dir` (non-recursive, sorted by filename). `ids` are the
// file stems.
struct Corpus {
    std::vector<Tensor> images;
    std::vector<std::string> ids;
    std::vector<std::uint64_t> hashes;

    std::size_t size() const { return images.size(); }
};

Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace nst
