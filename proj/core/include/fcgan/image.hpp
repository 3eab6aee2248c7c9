#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fcgan {

/// 8-bit interleaved image (grayscale or RGB).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> pixels;  // row-major, channels interleaved
};

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace fcgan
