#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dreamloom/color.hpp"

namespace dreamloom {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline constexpr int kSchemaVersion = 1;

enum class SceneKind { Literal, Metaphorical };
enum class MeaningType { Connection, Similarity, Opposition };
enum class VisualStructure { Juxtaposition, Fusion, Replacement };
enum class BubbleShape { Spiky, Rounded };

inline constexpr MeaningType kAllMeaningTypes[] = {
    MeaningType::Connection, MeaningType::Similarity, MeaningType::Opposition};
inline constexpr VisualStructure kAllVisualStructures[] = {
    VisualStructure::Juxtaposition, VisualStructure::Fusion, VisualStructure::Replacement};

std::string_view to_string(SceneKind v) noexcept;
std::string_view to_string(MeaningType v) noexcept;
std::string_view to_string(VisualStructure v) noexcept;
std::string_view to_string(BubbleShape v) noexcept;
std::string_view to_string(FilterOrigin v) noexcept;

// Parsers accept the lowercase names produced by to_string (case-insensitive)
// and throw Error(InvalidRequest) otherwise.
SceneKind parse_scene_kind(std::string_view text);
MeaningType parse_meaning_type(std::string_view text);
VisualStructure parse_visual_structure(std::string_view text);
FilterOrigin parse_filter_origin(std::string_view text);

struct MetaphorSpec {
    std::string affective_element;        // what is affective
    std::vector<std::string> adjectives;  // how it felt, one or more
    std::string metaphor_concept;         // may stay empty until one is chosen
    MeaningType meaning_type = MeaningType::Connection;
    VisualStructure visual_structure = VisualStructure::Fusion;
    std::optional<std::string> extra_prompt;

    /// Affective element and at least one non-blank adjective are present.
    bool articulated() const;
    /// articulated() plus a non-blank metaphor concept.
    bool complete() const;

    friend bool operator==(const MetaphorSpec&, const MetaphorSpec&) = default;
};

struct GenerationParams {
    int width = 512;
    int height = 512;
    int steps = 30;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

struct GenerationRecord {
    std::string id;
    std::string prompt;
    GenerationParams params;
    std::string image_ref;
    Timestamp created_at{};
    bool accepted = false;

    friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct Depiction {
    std::string generation_id;
    std::string text;
    Timestamp created_at{};
    bool superseded = false;

    friend bool operator==(const Depiction&, const Depiction&) = default;
};

// Palette captured when a generation was accepted.
struct AcceptedPalette {
    std::string generation_id;
    Palette palette;

    friend bool operator==(const AcceptedPalette&, const AcceptedPalette&) = default;
};

struct Scene {
    std::string id;
    SceneKind kind = SceneKind::Literal;
    std::size_t position = 0;
    std::string text;
    std::optional<MetaphorSpec> metaphor;
    std::vector<GenerationRecord> generations;
    std::optional<std::string> displayed_generation;
    std::vector<Depiction> depictions;     // append-only, acceptance order
    std::vector<AcceptedPalette> palettes; // append-only, acceptance order
    // Only PalettePick / CustomHex are stored; the default filter is derived.
    std::optional<ColorFilter> user_filter;

    const GenerationRecord* find_generation(std::string_view generation_id) const;
    GenerationRecord* find_generation(std::string_view generation_id);

    /// Palette of the displayed generation when it has one, else the most
    /// recently accepted palette.
    const Palette* palette() const;

    /// User filter if set, otherwise the default derived from palette().
    std::optional<ColorFilter> filter() const;

    /// Latest depiction that has not been superseded.
    const Depiction* depiction() const;

    /// User text followed by the current depiction, if any.
    std::string display_text() const;

    friend bool operator==(const Scene&, const Scene&) = default;
};

struct Offset {
    double dx = 0.0;
    double dy = 0.0;

    friend bool operator==(const Offset&, const Offset&) = default;
};

struct LayoutItem {
    double anchor_x = 0.5;
    Offset image_offset{0.0, 0.15};
    double scale = 1.0;
    std::vector<std::string> history_slots;

    friend bool operator==(const LayoutItem&, const LayoutItem&) = default;
};

struct LayoutState {
    std::map<std::string, LayoutItem> items;  // keyed by scene id
    double axis_y = 0.5;

    friend bool operator==(const LayoutState&, const LayoutState&) = default;
};

struct Story {
    std::string id;
    std::string title;
    std::vector<Scene> scenes;  // always sorted by position
    LayoutState layout;
    Timestamp created_at{};
    Timestamp updated_at{};
    int schema_version = kSchemaVersion;

    const Scene* find_scene(std::string_view scene_id) const;
    Scene* find_scene(std::string_view scene_id);

    friend bool operator==(const Story&, const Story&) = default;
};

}  // namespace dreamloom
