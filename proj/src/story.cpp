#include "dreamloom/story.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "dreamloom/error.hpp"
#include "dreamloom/layout.hpp"
#include "dreamloom/palette.hpp"
#include "dreamloom/util.hpp"

namespace dreamloom::story {

namespace {

constexpr std::size_t kMaxPaletteEntries = 8;

Scene& scene_or_throw(Story& story, std::string_view scene_id) {
    Scene* scene = story.find_scene(scene_id);
    if (scene == nullptr) {
        throw Error(ErrorCode::UnknownScene, fmt::format("unknown scene {}", scene_id));
    }
    return *scene;
}

Scene& metaphorical_or_throw(Story& story, std::string_view scene_id) {
    Scene& scene = scene_or_throw(story, scene_id);
    if (scene.kind != SceneKind::Metaphorical) {
        throw Error(ErrorCode::NotMetaphorical,
                    fmt::format("scene {} is a literal scene", scene_id));
    }
    return scene;
}

GenerationRecord& generation_or_throw(Scene& scene, std::string_view generation_id) {
    GenerationRecord* record = scene.find_generation(generation_id);
    if (record == nullptr) {
        throw Error(ErrorCode::UnknownGeneration,
                    fmt::format("generation {} does not belong to scene {}", generation_id, scene.id));
    }
    return *record;
}

void renumber(Story& story) {
    for (std::size_t i = 0; i < story.scenes.size(); ++i) {
        story.scenes[i].position = i;
    }
}

void touch(Story& story) {
    story.updated_at = std::max(now_utc(), story.updated_at);
}

bool has_palette_for(const Scene& scene, std::string_view generation_id) {
    return std::any_of(scene.palettes.begin(), scene.palettes.end(),
                       [&](const AcceptedPalette& p) { return p.generation_id == generation_id; });
}

void scene_violations(const Scene& scene, std::vector<std::string>& out) {
    const auto report = [&](std::string what) {
        out.push_back(fmt::format("scene {}: {}", scene.id, what));
    };
    if (scene.kind == SceneKind::Literal) {
        if (scene.metaphor) report("literal scene carries a metaphor spec");
        if (!scene.generations.empty()) report("literal scene has generations");
        if (scene.displayed_generation) report("literal scene has a displayed generation");
        if (!scene.depictions.empty()) report("literal scene has depictions");
        if (!scene.palettes.empty()) report("literal scene has a palette");
        if (scene.user_filter) report("literal scene has a colour filter");
        return;
    }
    if (scene.metaphor && !scene.metaphor->articulated()) {
        report("metaphor spec lacks an affective element or adjectives");
    }
    if (!scene.generations.empty() && !scene.metaphor) {
        report("generations recorded without a metaphor spec");
    }
    std::set<std::string> gen_ids;
    bool any_accepted = false;
    for (const auto& g : scene.generations) {
        if (g.id.empty() || !gen_ids.insert(g.id).second) {
            report(fmt::format("duplicate or empty generation id '{}'", g.id));
        }
        if (g.image_ref.empty()) report(fmt::format("generation {} has no image", g.id));
        if (g.params.width <= 0 || g.params.height <= 0 || g.params.steps <= 0) {
            report(fmt::format("generation {} has non-positive parameters", g.id));
        }
        any_accepted = any_accepted || g.accepted;
    }
    if (scene.displayed_generation && !gen_ids.contains(*scene.displayed_generation)) {
        report(fmt::format("displayed generation {} is not in the history", *scene.displayed_generation));
    }
    if (any_accepted != !scene.palettes.empty()) {
        report(any_accepted ? "accepted generation without a palette"
                            : "palette present although nothing was accepted");
    }
    std::set<std::string> palette_ids;
    for (const auto& p : scene.palettes) {
        const GenerationRecord* g = scene.find_generation(p.generation_id);
        if (g == nullptr || !g->accepted) {
            report(fmt::format("palette for {} which is not an accepted generation", p.generation_id));
        }
        if (!palette_ids.insert(p.generation_id).second) {
            report(fmt::format("two palettes for generation {}", p.generation_id));
        }
        const auto& entries = p.palette.entries;
        if (entries.empty() || entries.size() > kMaxPaletteEntries) {
            report(fmt::format("palette for {} has {} entries", p.generation_id, entries.size()));
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            sum += entries[i].weight;
            if (!(entries[i].weight >= 0.0 && entries[i].weight <= 1.0)) {
                report("palette weight outside [0,1]");
            }
            if (i > 0 && (entries[i - 1].weight < entries[i].weight ||
                          (entries[i - 1].weight == entries[i].weight &&
                           entries[i - 1].color.hex() > entries[i].color.hex()))) {
                report(fmt::format("palette for {} is not dominance-ordered", p.generation_id));
            }
        }
        if (!entries.empty() && std::abs(sum - 1.0) > 1e-6) {
            report(fmt::format("palette weights for {} sum to {}", p.generation_id, sum));
        }
    }
    for (std::size_t i = 0; i < scene.depictions.size(); ++i) {
        const auto& d = scene.depictions[i];
        const GenerationRecord* g = scene.find_generation(d.generation_id);
        if (g == nullptr || !g->accepted) {
            report(fmt::format("depiction for {} which is not an accepted generation", d.generation_id));
        }
        if (!d.superseded && i + 1 != scene.depictions.size()) {
            report("only the latest depiction may be current");
        }
    }
    if (scene.user_filter) {
        if (scene.user_filter->origin == FilterOrigin::PaletteDefault) {
            report("stored filter has the derived PaletteDefault origin");
        } else if (scene.user_filter->origin == FilterOrigin::PalettePick) {
            const Color c = scene.user_filter->color;
            const bool found = std::any_of(scene.palettes.begin(), scene.palettes.end(), [&](const auto& p) {
                return std::any_of(p.palette.entries.begin(), p.palette.entries.end(),
                                   [&](const PaletteEntry& e) { return e.color == c; });
            });
            if (!found) report("picked filter colour is not in any palette");
        }
    }
}

}  // namespace

Story create_story(std::string_view title) {
    const std::string_view trimmed = trim(title);
    if (trimmed.empty()) {
        throw Error(ErrorCode::EmptyTitle, "story title must not be blank");
    }
    Story story;
    story.id = new_id();
    story.title = std::string(trimmed);
    story.created_at = now_utc();
    story.updated_at = story.created_at;
    story.schema_version = kSchemaVersion;
    return story;
}

Scene add_scene(Story& story, SceneKind kind, std::size_t position, std::string text) {
    if (position > story.scenes.size()) {
        throw Error(ErrorCode::PositionOutOfRange,
                    fmt::format("position {} outside 0..{}", position, story.scenes.size()));
    }
    Scene scene;
    scene.id = new_id();
    scene.kind = kind;
    scene.text = std::move(text);
    story.scenes.insert(story.scenes.begin() + static_cast<std::ptrdiff_t>(position), scene);
    renumber(story);
    if (kind == SceneKind::Metaphorical) {
        story.layout = layout::with_inserted_item(story, scene.id);
    }
    touch(story);
    return story.scenes[position];
}

void delete_scene(Story& story, std::string_view scene_id) {
    scene_or_throw(story, scene_id);
    story.layout = layout::with_removed_item(story, scene_id);
    std::erase_if(story.scenes, [&](const Scene& s) { return s.id == scene_id; });
    renumber(story);
    touch(story);
}

Scene set_scene_text(Story& story, std::string_view scene_id, std::string text) {
    Scene& scene = scene_or_throw(story, scene_id);
    scene.text = std::move(text);
    touch(story);
    return scene;
}

Scene set_metaphor_spec(Story& story, std::string_view scene_id, MetaphorSpec spec) {
    Scene& scene = metaphorical_or_throw(story, scene_id);
    if (!spec.articulated()) {
        throw Error(ErrorCode::InvalidSpec,
                    "a metaphor needs an affective element and at least one adjective");
    }
    scene.metaphor = std::move(spec);
    touch(story);
    return scene;
}

GenerationRecord record_generation(Story& story, std::string_view scene_id, std::string prompt,
                                   std::string image_ref, const GenerationParams& params) {
    Scene& scene = metaphorical_or_throw(story, scene_id);
    if (!scene.metaphor || !scene.metaphor->articulated()) {
        throw Error(ErrorCode::MissingSpec,
                    fmt::format("scene {} has no articulated metaphor spec", scene_id));
    }
    if (image_ref.empty() || params.width <= 0 || params.height <= 0 || params.steps <= 0) {
        throw Error(ErrorCode::InvalidRequest, "generation needs an image and positive parameters");
    }
    GenerationRecord record;
    record.id = new_id();
    record.prompt = std::move(prompt);
    record.params = params;
    record.image_ref = std::move(image_ref);
    record.created_at = now_utc();
    scene.generations.push_back(record);
    story.layout = layout::sync_history_slots(std::move(story.layout), scene);
    touch(story);
    return record;
}

AcceptanceEvent accept_generation(Story& story, std::string_view scene_id,
                                  std::string_view generation_id, Palette palette) {
    Scene& scene = metaphorical_or_throw(story, scene_id);
    GenerationRecord& record = generation_or_throw(scene, generation_id);
    AcceptanceEvent event{scene.id, record.id, record.image_ref, record.accepted};
    if (record.accepted) {
        return event;
    }
    if (palette.entries.empty()) {
        throw Error(ErrorCode::EmptyPalette, "accepting a generation requires its palette");
    }
    sort_palette_entries(palette);
    record.accepted = true;
    scene.displayed_generation = record.id;
    if (!has_palette_for(scene, record.id)) {
        scene.palettes.push_back({record.id, std::move(palette)});
    }
    story.layout = layout::sync_history_slots(std::move(story.layout), scene);
    touch(story);
    return event;
}

Scene switch_display(Story& story, std::string_view scene_id, std::string_view generation_id) {
    Scene& scene = metaphorical_or_throw(story, scene_id);
    const GenerationRecord& record = generation_or_throw(scene, generation_id);
    if (scene.displayed_generation == record.id) {
        return scene;
    }
    scene.displayed_generation = record.id;
    story.layout = layout::sync_history_slots(std::move(story.layout), scene);
    touch(story);
    return scene;
}

Scene append_depiction(Story& story, std::string_view scene_id, std::string_view generation_id,
                       std::string text) {
    Scene& scene = metaphorical_or_throw(story, scene_id);
    const GenerationRecord& record = generation_or_throw(scene, generation_id);
    if (!record.accepted) {
        throw Error(ErrorCode::InvalidRequest,
                    fmt::format("generation {} has not been accepted", generation_id));
    }
    for (auto& d : scene.depictions) {
        d.superseded = true;
    }
    scene.depictions.push_back({record.id, std::move(text), now_utc(), false});
    touch(story);
    return scene;
}

Scene set_user_filter(Story& story, std::string_view scene_id, std::optional<ColorFilter> filter) {
    Scene& scene = metaphorical_or_throw(story, scene_id);
    if (filter) {
        if (filter->origin == FilterOrigin::PaletteDefault) {
            throw Error(ErrorCode::InvalidRequest, "the palette default is derived, not stored");
        }
        if (filter->origin == FilterOrigin::PalettePick) {
            const Palette* p = scene.palette();
            if (p == nullptr) {
                throw Error(ErrorCode::EmptyPalette, "scene has no palette to pick from");
            }
            const bool in_palette = std::any_of(p->entries.begin(), p->entries.end(),
                                                [&](const PaletteEntry& e) { return e.color == filter->color; });
            if (!in_palette) {
                throw Error(ErrorCode::InvalidRequest,
                            fmt::format("{} is not in the displayed palette", filter->color.hex()));
            }
        }
    }
    scene.user_filter = filter;
    touch(story);
    return scene;
}

BubbleShape bubble_shape(const Scene& scene) noexcept {
    return scene.kind == SceneKind::Metaphorical ? BubbleShape::Spiky : BubbleShape::Rounded;
}

std::vector<std::string> violations(const Story& story) {
    std::vector<std::string> out;
    if (story.id.empty()) out.push_back("story has no id");
    if (trim(story.title).empty()) out.push_back("story title is blank");
    if (story.schema_version < 1) out.push_back("schema_version must be positive");
    std::set<std::string> scene_ids;
    std::set<std::string> generation_ids;
    for (std::size_t i = 0; i < story.scenes.size(); ++i) {
        const Scene& scene = story.scenes[i];
        if (scene.position != i) {
            out.push_back(fmt::format("scene {} at index {} has position {}", scene.id, i, scene.position));
        }
        if (scene.id.empty() || !scene_ids.insert(scene.id).second) {
            out.push_back(fmt::format("duplicate or empty scene id '{}'", scene.id));
        }
        for (const auto& g : scene.generations) {
            if (!generation_ids.insert(g.id).second) {
                out.push_back(fmt::format("generation id {} is used more than once", g.id));
            }
        }
        scene_violations(scene, out);
    }
    auto more = layout::violations(story);
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

}  // namespace dreamloom::story
