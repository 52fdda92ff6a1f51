#pragma once
// Core image value types: 8-bit RGB color images, float gray images and
// binary masks. Pixel coordinates are (x, y) with origin at the top-left.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace thinfilm {

constexpr double kDefaultPixelsPerMicron = 8.3;

struct ColorImage {
    int width = 0;
    int height = 0;
    double px_per_um = kDefaultPixelsPerMicron;
    // Interleaved RGB, 8 bits per channel.
    std::vector<std::uint8_t> rgb;

    ColorImage() = default;
    ColorImage(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0)
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
        if (w < 1 || h < 1) throw std::invalid_argument("ColorImage: dimensions must be >= 1");
        for (std::size_t i = 0; i < rgb.size(); i += 3) {
            rgb[i] = r;
            rgb[i + 1] = g;
            rgb[i + 2] = b;
        }
    }

    std::size_t idx(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
    std::uint8_t& at(int x, int y, int c) { return rgb[idx(x, y) + c]; }
    std::uint8_t at(int x, int y, int c) const { return rgb[idx(x, y) + c]; }
    bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool same_dims(const ColorImage& o) const { return width == o.width && height == o.height; }
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> v;

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.f)
        : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
    bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t pixel_count() const { return v.size(); }

    // Clamped access, replicating edge pixels.
    float at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return at(x, y);
    }
};

struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> v;

    Mask() = default;
    Mask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
    bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t count_nonzero() const {
        std::size_t n = 0;
        for (auto b : v) n += (b != 0);
        return n;
    }
};

// Grayscale as the mean of the three channels.
inline GrayImage luminance(const ColorImage& img) {
    GrayImage g(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = &img.rgb[i * 3];
        g.v[i] = (static_cast<float>(p[0]) + p[1] + p[2]) / 3.f;
    }
    return g;
}

inline double mean(const GrayImage& g) {
    double s = 0.0;
    for (float x : g.v) s += x;
    return g.v.empty() ? 0.0 : s / static_cast<double>(g.v.size());
}

inline double stddev(const GrayImage& g) {
    if (g.v.empty()) return 0.0;
    const double m = mean(g);
    double s = 0.0;
    for (float x : g.v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(g.v.size()));
}

inline std::uint8_t clamp_u8(double x) {
    return static_cast<std::uint8_t>(std::clamp(x, 0.0, 255.0) + 0.5);
}

// Crop a window centered on (cx, cy); pixels outside the source are
// edge-replicated so thumbnails keep their nominal size at FoV borders.
inline ColorImage crop_centered(const ColorImage& src, int cx, int cy, int size) {
    ColorImage out(size, size);
    out.px_per_um = src.px_per_um;
    const int half = size / 2;
    for (int y = 0; y < size; ++y) {
        const int sy = std::clamp(cy - half + y, 0, src.height - 1);
        for (int x = 0; x < size; ++x) {
            const int sx = std::clamp(cx - half + x, 0, src.width - 1);
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = src.at(sx, sy, c);
        }
    }
    return out;
}

}  // namespace thinfilm
