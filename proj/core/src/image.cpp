#include "fcgan/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace fcgan {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

int color_type_for(std::size_t channels) {
    switch (channels) {
    case 1:
        return PNG_COLOR_TYPE_GRAY;
    case 3:
        return PNG_COLOR_TYPE_RGB;
    default:
        throw std::invalid_argument("png: only 1 or 3 channels are supported");
    }
}

}  // namespace

void write_png(const Image& image, const std::filesystem::path& path) {
    const int color = color_type_for(image.channels);
    if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * image.channels) {
        throw std::invalid_argument("png: pixel buffer does not match image size");
    }
    File f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: failed writing " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = image.width * image.channels;
    for (std::size_t y = 0; y < image.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
    File f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: failed reading " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    if (png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: only 8-bit images are supported");
    }
    Image img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.channels = png_get_channels(png, info);
    img.pixels.resize(img.width * img.height * img.channels);
    for (std::size_t y = 0; y < img.height; ++y) png_read_row(png, img.pixels.data() + y * img.width * img.channels, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace fcgan
