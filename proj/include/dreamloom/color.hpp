#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dreamloom {

struct Color {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    /// Canonical "#RRGGBB", uppercase.
    std::string hex() const;

    friend bool operator==(const Color&, const Color&) = default;
};

struct PaletteEntry {
    Color color;
    double weight = 0.0;  // fraction of pixels in [0,1]

    friend bool operator==(const PaletteEntry&, const PaletteEntry&) = default;
};

// Entries are ordered by weight descending, ties broken by hex ascending.
struct Palette {
    std::vector<PaletteEntry> entries;
    std::string source_image;  // image ref the palette was extracted from

    friend bool operator==(const Palette&, const Palette&) = default;
};

enum class FilterOrigin { PaletteDefault, PalettePick, CustomHex };

struct ColorFilter {
    Color color;
    FilterOrigin origin = FilterOrigin::PaletteDefault;

    friend bool operator==(const ColorFilter&, const ColorFilter&) = default;
};

}  // namespace dreamloom
