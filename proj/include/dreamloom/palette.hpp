#pragma once

#include <cstddef>
#include <string_view>

#include "dreamloom/color.hpp"
#include "dreamloom/image_codec.hpp"

namespace dreamloom {

// CIELAB under D65, from sRGB.
struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;
};

Lab to_lab(Color c) noexcept;
Color from_lab(const Lab& lab) noexcept;

/// CIE76 colour difference.
double delta_e(const Lab& x, const Lab& y) noexcept;

/// Accepts "#RGB" or "#RRGGBB" in any case. Throws Error(InvalidHex).
Color parse_hex(std::string_view text);

// Knobs of the dominant-colour extractor. The defaults are the documented
// behaviour; tests pin them.
struct PaletteOptions {
    std::size_t k = 8;
    int max_side = 256;             // box-filter images down to fit this square
    int max_iterations = 50;
    double convergence_delta = 0.1; // stop when no centroid moves further (ΔE)
    double min_seed_distance = 15.0;
};

/// Integer-factor box filter so that neither side exceeds max_side.
RgbImage downsample_box(const RgbImage& image, int max_side);

/// Dominance-ordered palette of up to options.k colours. Clusters in CIELAB
/// with k-means seeded from a 16x16x16 RGB histogram. When the image holds
/// no more than k distinct colours those colours are returned exactly.
Palette extract_palette(const RgbImage& image, const PaletteOptions& options = {});

/// Decodes first; source_image is set to the SHA-256 of the bytes.
/// Throws Error(UndecodableImage | EmptyImage | InvalidRequest when k == 0).
Palette extract_palette(std::string_view image_bytes, std::size_t k = 8);

/// Most dominant colour; ties go to the smaller hex. Throws Error(EmptyPalette).
ColorFilter default_filter(const Palette& palette);

/// Sorts entries by weight descending, then hex ascending.
void sort_palette_entries(Palette& palette);

}  // namespace dreamloom
