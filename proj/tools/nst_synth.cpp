// Generates small synthetic image corpora (smooth noise plus oriented
// stripes) for exercising the training and study pipelines without real
// photographs or paintings.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "nst/image_io.hpp"
#include "nst/rng.hpp"
#include "nst/training.hpp"

using namespace nst;

namespace {

Tensor synth_image(Rng& rng, std::size_t size) {
    // Low-resolution color noise upsampled to a smooth base field.
    const std::size_t base = std::max<std::size_t>(2, size / 4);
    Tensor low = rng.uniform_tensor(Shape{1, 3, base, base}, 0.0, 1.0);
    Tensor img = resize_bilinear(low, size, size);

    // A couple of oriented sinusoidal stripe fields give each image its own
    // texture statistics.
    for (int wave = 0; wave < 2; ++wave) {
        const double angle = rng.uniform(0.0, 3.14159265358979);
        const double freq = rng.uniform(0.5, 3.0) * 2.0 * 3.14159265358979 / static_cast<double>(size);
        const double phase = rng.uniform(0.0, 6.28318530717959);
        const double amp = rng.uniform(0.05, 0.25);
        const double cx = std::cos(angle), sx = std::sin(angle);
        for (std::size_t c = 0; c < 3; ++c) {
            const double channel_gain = rng.uniform(0.3, 1.0);
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    const double t = freq * (cx * static_cast<double>(x) + sx * static_cast<double>(y)) + phase;
                    img.at(0, c, y, x) += amp * channel_gain * std::sin(t);
                }
            }
        }
    }
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
    return img;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic corpus generator"};
    std::string out_dir, prefix = "img", format = "ppm";
    std::size_t count = 4, size = 16;
    std::uint64_t seed = 1;
    app.add_option("--out-dir", out_dir, "output directory")->required();
    app.add_option("--count", count, "number of images");
    app.add_option("--size", size, "square image size in pixels");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--prefix", prefix, "filename prefix");
    app.add_option("--format", format, "ppm or png");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        std::filesystem::create_directories(out_dir);
        Rng rng(seed);
        for (std::size_t i = 0; i < count; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%03zu.%s", prefix.c_str(), i, format.c_str());
            save_image(synth_image(rng, size), std::filesystem::path(out_dir) / name);
        }
        std::printf("wrote %zu %zux%zu images to %s\n", count, size, size, out_dir.c_str());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
