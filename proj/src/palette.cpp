#include "dreamloom/palette.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "dreamloom/error.hpp"
#include "dreamloom/util.hpp"

namespace dreamloom {

std::string Color::hex() const {
    return fmt::format("#{:02X}{:02X}{:02X}", r, g, b);
}

namespace {

constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
    return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
    return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

std::uint8_t to_byte(double unit) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::uint32_t pack(Color c) {
    return (static_cast<std::uint32_t>(c.r) << 16) | (static_cast<std::uint32_t>(c.g) << 8) | c.b;
}

Color unpack(std::uint32_t v) {
    return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v)};
}

struct WeightedColor {
    Color color;
    Lab lab;
    std::size_t count;
};

std::vector<WeightedColor> unique_colors(const RgbImage& image) {
    std::vector<std::uint32_t> packed;
    packed.reserve(image.pixel_count());
    for (std::size_t i = 0; i < image.pixels.size(); i += 3) {
        packed.push_back(pack({image.pixels[i], image.pixels[i + 1], image.pixels[i + 2]}));
    }
    std::sort(packed.begin(), packed.end());
    std::vector<WeightedColor> out;
    for (std::size_t i = 0; i < packed.size();) {
        std::size_t j = i;
        while (j < packed.size() && packed[j] == packed[i]) ++j;
        const Color c = unpack(packed[i]);
        out.push_back({c, to_lab(c), j - i});
        i = j;
    }
    return out;
}

std::size_t bin_index(Color c) {
    return (static_cast<std::size_t>(c.r >> 4) << 8) | (static_cast<std::size_t>(c.g >> 4) << 4) |
           static_cast<std::size_t>(c.b >> 4);
}

std::vector<Lab> histogram_seeds(const std::vector<WeightedColor>& points, const PaletteOptions& opt) {
    struct Bin {
        std::size_t index = 0;
        std::size_t count = 0;
        double l = 0, a = 0, b = 0;
    };
    std::array<Bin, 4096> bins{};
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i].index = i;
    for (const auto& p : points) {
        Bin& bin = bins[bin_index(p.color)];
        bin.count += p.count;
        bin.l += p.lab.l * static_cast<double>(p.count);
        bin.a += p.lab.a * static_cast<double>(p.count);
        bin.b += p.lab.b * static_cast<double>(p.count);
    }
    std::vector<Bin> filled;
    for (const Bin& bin : bins) {
        if (bin.count > 0) filled.push_back(bin);
    }
    std::sort(filled.begin(), filled.end(), [](const Bin& x, const Bin& y) {
        return x.count != y.count ? x.count > y.count : x.index < y.index;
    });

    const std::size_t k = std::min(opt.k, filled.size());
    std::vector<Lab> seeds;
    std::vector<bool> used(filled.size(), false);
    const auto mean = [](const Bin& bin) {
        const double n = static_cast<double>(bin.count);
        return Lab{bin.l / n, bin.a / n, bin.b / n};
    };
    for (std::size_t i = 0; i < filled.size() && seeds.size() < k; ++i) {
        const Lab candidate = mean(filled[i]);
        const bool far = std::all_of(seeds.begin(), seeds.end(), [&](const Lab& s) {
            return delta_e(s, candidate) >= opt.min_seed_distance;
        });
        if (far) {
            seeds.push_back(candidate);
            used[i] = true;
        }
    }
    // Too few well-separated bins: fall back to the next most populated ones.
    for (std::size_t i = 0; i < filled.size() && seeds.size() < k; ++i) {
        if (!used[i]) {
            seeds.push_back(mean(filled[i]));
            used[i] = true;
        }
    }
    return seeds;
}

std::size_t nearest(const std::vector<Lab>& centroids, const Lab& lab, double* distance) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = delta_e(centroids[c], lab);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (distance != nullptr) *distance = best_d;
    return best;
}

}  // namespace

Lab to_lab(Color c) noexcept {
    const double r = srgb_to_linear(c.r / 255.0);
    const double g = srgb_to_linear(c.g / 255.0);
    const double b = srgb_to_linear(c.b / 255.0);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = lab_f(x / kWhiteX);
    const double fy = lab_f(y / kWhiteY);
    const double fz = lab_f(z / kWhiteZ);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Color from_lab(const Lab& lab) noexcept {
    const double fy = (lab.l + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    const double x = kWhiteX * lab_f_inv(fx);
    const double y = kWhiteY * lab_f_inv(fy);
    const double z = kWhiteZ * lab_f_inv(fz);
    const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    return {to_byte(linear_to_srgb(std::max(r, 0.0))), to_byte(linear_to_srgb(std::max(g, 0.0))),
            to_byte(linear_to_srgb(std::max(b, 0.0)))};
}

double delta_e(const Lab& x, const Lab& y) noexcept {
    const double dl = x.l - y.l;
    const double da = x.a - y.a;
    const double db = x.b - y.b;
    return std::sqrt(dl * dl + da * da + db * db);
}

Color parse_hex(std::string_view text) {
    const std::string_view t = trim(text);
    const auto invalid = [&] {
        return Error(ErrorCode::InvalidHex, "invalid hex colour '" + std::string(text) + "'");
    };
    if (t.empty() || t.front() != '#' || (t.size() != 4 && t.size() != 7)) {
        throw invalid();
    }
    std::array<int, 6> digits{};
    const std::string_view body = t.substr(1);
    for (std::size_t i = 0; i < 6; ++i) {
        const char c = body.size() == 3 ? body[i / 2] : body[i];
        digits[i] = hex_digit(c);
        if (digits[i] < 0) throw invalid();
    }
    return {static_cast<std::uint8_t>(digits[0] * 16 + digits[1]),
            static_cast<std::uint8_t>(digits[2] * 16 + digits[3]),
            static_cast<std::uint8_t>(digits[4] * 16 + digits[5])};
}

RgbImage downsample_box(const RgbImage& image, int max_side) {
    const int longest = std::max(image.width, image.height);
    if (max_side <= 0 || longest <= max_side) {
        return image;
    }
    const int factor = (longest + max_side - 1) / max_side;
    const int ow = (image.width + factor - 1) / factor;
    const int oh = (image.height + factor - 1) / factor;
    RgbImage out(ow, oh);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            unsigned sum[3] = {0, 0, 0};
            unsigned n = 0;
            for (int y = oy * factor; y < std::min((oy + 1) * factor, image.height); ++y) {
                for (int x = ox * factor; x < std::min((ox + 1) * factor, image.width); ++x) {
                    const Color c = image.at(x, y);
                    sum[0] += c.r;
                    sum[1] += c.g;
                    sum[2] += c.b;
                    ++n;
                }
            }
            out.set(ox, oy,
                    {static_cast<std::uint8_t>((sum[0] + n / 2) / n),
                     static_cast<std::uint8_t>((sum[1] + n / 2) / n),
                     static_cast<std::uint8_t>((sum[2] + n / 2) / n)});
        }
    }
    return out;
}

void sort_palette_entries(Palette& palette) {
    std::sort(palette.entries.begin(), palette.entries.end(),
              [](const PaletteEntry& x, const PaletteEntry& y) {
                  if (x.weight != y.weight) return x.weight > y.weight;
                  return x.color.hex() < y.color.hex();
              });
}

Palette extract_palette(const RgbImage& image, const PaletteOptions& opt) {
    if (opt.k == 0) {
        throw Error(ErrorCode::InvalidRequest, "palette size k must be at least 1");
    }
    if (image.pixel_count() == 0) {
        throw Error(ErrorCode::EmptyImage, "image has no pixels");
    }
    const RgbImage small = downsample_box(image, opt.max_side);
    const std::vector<WeightedColor> points = unique_colors(small);
    const double total = static_cast<double>(small.pixel_count());

    Palette palette;
    if (points.size() <= opt.k) {
        for (const auto& p : points) {
            palette.entries.push_back({p.color, static_cast<double>(p.count) / total});
        }
        sort_palette_entries(palette);
        return palette;
    }

    std::vector<Lab> centroids = histogram_seeds(points, opt);
    const std::size_t k = centroids.size();
    std::vector<std::size_t> assignment(points.size(), 0);
    std::vector<double> distance(points.size(), 0.0);

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        std::vector<double> sl(k, 0.0), sa(k, 0.0), sb(k, 0.0), sw(k, 0.0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t c = nearest(centroids, points[i].lab, &distance[i]);
            assignment[i] = c;
            const double w = static_cast<double>(points[i].count);
            sl[c] += points[i].lab.l * w;
            sa[c] += points[i].lab.a * w;
            sb[c] += points[i].lab.b * w;
            sw[c] += w;
        }
        double movement = 0.0;
        bool reseeded = false;
        std::vector<bool> taken(points.size(), false);
        for (std::size_t c = 0; c < k; ++c) {
            Lab next;
            if (sw[c] > 0.0) {
                next = {sl[c] / sw[c], sa[c] / sw[c], sb[c] / sw[c]};
            } else {
                // Empty cluster: move it onto the worst-served colour.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < points.size(); ++i) {
                    if (!taken[i] && distance[i] > far_d) {
                        far_d = distance[i];
                        far = i;
                    }
                }
                taken[far] = true;
                next = points[far].lab;
                reseeded = true;
            }
            movement = std::max(movement, delta_e(centroids[c], next));
            centroids[c] = next;
        }
        if (!reseeded && movement < opt.convergence_delta) {
            break;
        }
    }

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        counts[nearest(centroids, points[i].lab, nullptr)] += points[i].count;
    }
    // Clusters that round to the same sRGB colour are one swatch.
    std::map<std::uint32_t, std::size_t> merged;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) {
            merged[pack(from_lab(centroids[c]))] += counts[c];
        }
    }
    for (const auto& [rgb, count] : merged) {
        palette.entries.push_back({unpack(rgb), static_cast<double>(count) / total});
    }
    sort_palette_entries(palette);
    return palette;
}

Palette extract_palette(std::string_view image_bytes, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorCode::InvalidRequest, "palette size k must be at least 1");
    }
    PaletteOptions opt;
    opt.k = k;
    Palette palette = extract_palette(decode_image(image_bytes), opt);
    palette.source_image = sha256_hex(image_bytes);
    return palette;
}

ColorFilter default_filter(const Palette& palette) {
    if (palette.entries.empty()) {
        throw Error(ErrorCode::EmptyPalette, "palette has no entries");
    }
    const PaletteEntry* best = &palette.entries.front();
    for (const auto& e : palette.entries) {
        if (e.weight > best->weight ||
            (e.weight == best->weight && e.color.hex() < best->color.hex())) {
            best = &e;
        }
    }
    return {best->color, FilterOrigin::PaletteDefault};
}

}  // namespace dreamloom
