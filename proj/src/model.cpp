#include "dreamloom/model.hpp"

#include <algorithm>

#include "dreamloom/error.hpp"
#include "dreamloom/palette.hpp"
#include "dreamloom/util.hpp"

namespace dreamloom {

std::string_view to_string(SceneKind v) noexcept {
    return v == SceneKind::Literal ? "literal" : "metaphorical";
}

std::string_view to_string(MeaningType v) noexcept {
    switch (v) {
    case MeaningType::Connection: return "connection";
    case MeaningType::Similarity: return "similarity";
    case MeaningType::Opposition: return "opposition";
    }
    return "connection";
}

std::string_view to_string(VisualStructure v) noexcept {
    switch (v) {
    case VisualStructure::Juxtaposition: return "juxtaposition";
    case VisualStructure::Fusion: return "fusion";
    case VisualStructure::Replacement: return "replacement";
    }
    return "fusion";
}

std::string_view to_string(BubbleShape v) noexcept {
    return v == BubbleShape::Spiky ? "spiky" : "rounded";
}

std::string_view to_string(FilterOrigin v) noexcept {
    switch (v) {
    case FilterOrigin::PaletteDefault: return "palette_default";
    case FilterOrigin::PalettePick: return "palette_pick";
    case FilterOrigin::CustomHex: return "custom_hex";
    }
    return "palette_default";
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const Enum (&values)[N], std::string_view what) {
    const std::string lowered = to_lower(trim(text));
    for (Enum v : values) {
        if (to_string(v) == lowered) {
            return v;
        }
    }
    throw Error(ErrorCode::InvalidRequest,
                std::string("unknown ") + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

SceneKind parse_scene_kind(std::string_view text) {
    static constexpr SceneKind values[] = {SceneKind::Literal, SceneKind::Metaphorical};
    return parse_enum(text, values, "scene kind");
}

MeaningType parse_meaning_type(std::string_view text) {
    return parse_enum(text, kAllMeaningTypes, "meaning type");
}

VisualStructure parse_visual_structure(std::string_view text) {
    return parse_enum(text, kAllVisualStructures, "visual structure");
}

FilterOrigin parse_filter_origin(std::string_view text) {
    static constexpr FilterOrigin values[] = {FilterOrigin::PaletteDefault,
                                              FilterOrigin::PalettePick, FilterOrigin::CustomHex};
    return parse_enum(text, values, "filter origin");
}

bool MetaphorSpec::articulated() const {
    if (trim(affective_element).empty() || adjectives.empty()) {
        return false;
    }
    return std::none_of(adjectives.begin(), adjectives.end(),
                        [](const std::string& a) { return trim(a).empty(); });
}

bool MetaphorSpec::complete() const {
    return articulated() && !trim(metaphor_concept).empty();
}

const GenerationRecord* Scene::find_generation(std::string_view generation_id) const {
    auto it = std::find_if(generations.begin(), generations.end(),
                           [&](const GenerationRecord& g) { return g.id == generation_id; });
    return it == generations.end() ? nullptr : &*it;
}

GenerationRecord* Scene::find_generation(std::string_view generation_id) {
    return const_cast<GenerationRecord*>(std::as_const(*this).find_generation(generation_id));
}

const Palette* Scene::palette() const {
    if (palettes.empty()) {
        return nullptr;
    }
    if (displayed_generation) {
        for (const auto& p : palettes) {
            if (p.generation_id == *displayed_generation) {
                return &p.palette;
            }
        }
    }
    return &palettes.back().palette;
}

std::optional<ColorFilter> Scene::filter() const {
    if (user_filter) {
        return user_filter;
    }
    const Palette* p = palette();
    if (p == nullptr || p->entries.empty()) {
        return std::nullopt;
    }
    return default_filter(*p);
}

const Depiction* Scene::depiction() const {
    for (auto it = depictions.rbegin(); it != depictions.rend(); ++it) {
        if (!it->superseded) {
            return &*it;
        }
    }
    return nullptr;
}

std::string Scene::display_text() const {
    const Depiction* d = depiction();
    if (d == nullptr) {
        return text;
    }
    if (text.empty()) {
        return d->text;
    }
    return text + "\n\n" + d->text;
}

const Scene* Story::find_scene(std::string_view scene_id) const {
    auto it = std::find_if(scenes.begin(), scenes.end(),
                           [&](const Scene& s) { return s.id == scene_id; });
    return it == scenes.end() ? nullptr : &*it;
}

Scene* Story::find_scene(std::string_view scene_id) {
    return const_cast<Scene*>(std::as_const(*this).find_scene(scene_id));
}

}  // namespace dreamloom
