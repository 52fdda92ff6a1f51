#pragma once
// 8-bit RGB PNG read/write via libpng's simplified API.

#include <cstring>
#include <stdexcept>
#include <string>

#include <png.h>

#include "thinfilm/image.hpp"

namespace thinfilm {

inline void write_png(const std::string& path, const ColorImage& img) {
    png_image pi;
    std::memset(&pi, 0, sizeof(pi));
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width);
    pi.height = static_cast<png_uint_32>(img.height);
    pi.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&pi, path.c_str(), 0, img.rgb.data(), 0, nullptr)) {
        throw std::runtime_error("write_png: " + path + ": " + pi.message);
    }
}

inline ColorImage read_png(const std::string& path) {
    png_image pi;
    std::memset(&pi, 0, sizeof(pi));
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pi, path.c_str())) {
        throw std::runtime_error("read_png: " + path + ": " + pi.message);
    }
    pi.format = PNG_FORMAT_RGB;
    ColorImage img;
    img.width = static_cast<int>(pi.width);
    img.height = static_cast<int>(pi.height);
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    if (!png_image_finish_read(&pi, nullptr, img.rgb.data(), 0, nullptr)) {
        png_image_free(&pi);
        throw std::runtime_error("read_png: " + path + ": " + pi.message);
    }
    return img;
}

}  // namespace thinfilm
