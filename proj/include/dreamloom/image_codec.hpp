#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dreamloom/color.hpp"

namespace dreamloom {

// 8-bit RGB, row-major, no padding.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    Color at(int x, int y) const {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }

    void set(int x, int y, Color c) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        pixels[i] = c.r;
        pixels[i + 1] = c.g;
        pixels[i + 2] = c.b;
    }
};

enum class ImageFormat { Png, Jpeg, Unknown };

ImageFormat sniff_format(std::string_view bytes) noexcept;
std::string_view mime_type(ImageFormat format) noexcept;

/// Decodes PNG or JPEG into RGB. Alpha is composited over white.
/// Throws Error(UndecodableImage) or Error(EmptyImage).
RgbImage decode_image(std::string_view bytes);

std::string encode_png(const RgbImage& image);

}  // namespace dreamloom
