#include "dreamloom/layout.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dreamloom/error.hpp"

namespace dreamloom::layout {

namespace {

constexpr double kSpacingTolerance = 1e-12;

double default_anchor(std::size_t index, std::size_t count) {
    return static_cast<double>(index + 1) / static_cast<double>(count + 1);
}

bool is_default_spacing(const LayoutState& state, const std::vector<std::string>& ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = state.items.find(ids[i]);
        if (it == state.items.end() ||
            std::abs(it->second.anchor_x - default_anchor(i, ids.size())) > kSpacingTolerance) {
            return false;
        }
    }
    return true;
}

void respace(LayoutState& state, const std::vector<std::string>& ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        state.items[ids[i]].anchor_x = default_anchor(i, ids.size());
    }
}

bool strictly_increasing(const LayoutState& state, const std::vector<std::string>& ids) {
    for (std::size_t i = 1; i < ids.size(); ++i) {
        if (!(state.items.at(ids[i - 1]).anchor_x < state.items.at(ids[i]).anchor_x)) {
            return false;
        }
    }
    return true;
}

LayoutItem& item_or_throw(LayoutState& state, std::string_view scene_id) {
    auto it = state.items.find(std::string(scene_id));
    if (it == state.items.end()) {
        throw Error(ErrorCode::UnknownScene,
                    fmt::format("scene {} has no storyline anchor", scene_id));
    }
    return it->second;
}

void check_anchor_range(double x) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
        throw Error(ErrorCode::InvalidRequest,
                    fmt::format("anchor_x {} outside the normalized range [0,1]", x));
    }
}

double clamp_scale(double scale) {
    if (std::isnan(scale)) {
        throw Error(ErrorCode::InvalidRequest, "scale must be a number");
    }
    return std::clamp(scale, kMinScale, kMaxScale);
}

}  // namespace

std::vector<std::string> chronological_anchor_ids(const Story& story) {
    std::vector<const Scene*> ordered;
    for (const auto& s : story.scenes) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const Scene* a, const Scene* b) { return a->position < b->position; });
    std::vector<std::string> ids;
    for (const Scene* s : ordered) {
        if (s->kind == SceneKind::Metaphorical) ids.push_back(s->id);
    }
    return ids;
}

LayoutState default_layout(const Story& story) {
    LayoutState state;
    const auto ids = chronological_anchor_ids(story);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        LayoutItem item;
        item.anchor_x = default_anchor(i, ids.size());
        item.image_offset = kDefaultOffset;
        item.scale = 1.0;
        item.history_slots = history_slots_for(*story.find_scene(ids[i]));
        state.items.emplace(ids[i], std::move(item));
    }
    return state;
}

LayoutState move_item(const Story& story, std::string_view scene_id, double new_anchor_x,
                      Offset new_offset) {
    LayoutEdit edit;
    edit.items[std::string(scene_id)] = ItemEdit{new_anchor_x, new_offset, std::nullopt};
    return apply_edit(story, edit);
}

LayoutState resize_item(const Story& story, std::string_view scene_id, double scale) {
    LayoutState state = story.layout;
    item_or_throw(state, scene_id).scale = clamp_scale(scale);
    return state;
}

std::vector<std::string> history_slots_for(const Scene& scene) {
    std::vector<std::string> slots;
    for (const auto& g : scene.generations) {
        if (!scene.displayed_generation || g.id != *scene.displayed_generation) {
            slots.push_back(g.id);
        }
    }
    return slots;
}

LayoutState sync_history_slots(LayoutState state, const Scene& scene) {
    auto it = state.items.find(scene.id);
    if (it != state.items.end()) {
        it->second.history_slots = history_slots_for(scene);
    }
    return state;
}

LayoutState apply_edit(const Story& story, const LayoutEdit& edit) {
    LayoutState state = story.layout;
    for (const auto& [id, change] : edit.items) {
        LayoutItem& item = item_or_throw(state, id);
        if (change.anchor_x) {
            check_anchor_range(*change.anchor_x);
            item.anchor_x = *change.anchor_x;
        }
        if (change.image_offset) {
            if (!std::isfinite(change.image_offset->dx) || !std::isfinite(change.image_offset->dy)) {
                throw Error(ErrorCode::InvalidRequest, "image offset must be finite");
            }
            item.image_offset = *change.image_offset;
        }
        if (change.scale) {
            item.scale = clamp_scale(*change.scale);
        }
    }
    if (edit.axis_y) {
        if (!std::isfinite(*edit.axis_y) || *edit.axis_y < 0.0 || *edit.axis_y > 1.0) {
            throw Error(ErrorCode::InvalidRequest, "axis_y outside [0,1]");
        }
        state.axis_y = *edit.axis_y;
    }
    if (!strictly_increasing(state, chronological_anchor_ids(story))) {
        throw Error(ErrorCode::OrderViolation,
                    "anchors must stay in strictly increasing chronological order");
    }
    return state;
}

LayoutState with_inserted_item(const Story& story, std::string_view scene_id) {
    LayoutState state = story.layout;
    const auto ids = chronological_anchor_ids(story);
    std::vector<std::string> previous;
    std::copy_if(ids.begin(), ids.end(), std::back_inserter(previous),
                 [&](const std::string& id) { return id != scene_id; });

    LayoutItem item;
    item.image_offset = kDefaultOffset;
    if (const Scene* scene = story.find_scene(scene_id)) {
        item.history_slots = history_slots_for(*scene);
    }
    const bool untouched = is_default_spacing(state, previous);
    state.items[std::string(scene_id)] = item;
    if (untouched) {
        respace(state, ids);
        return state;
    }

    const auto pos = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), scene_id) - ids.begin());
    const double lo = pos == 0 ? 0.0 : state.items.at(ids[pos - 1]).anchor_x;
    const double hi = pos + 1 == ids.size() ? 1.0 : state.items.at(ids[pos + 1]).anchor_x;
    const double mid = lo + (hi - lo) / 2.0;
    state.items[std::string(scene_id)].anchor_x = mid;
    if (!(lo < mid && mid < hi) || !strictly_increasing(state, ids)) {
        // The gap has been halved below double precision.
        respace(state, ids);
    }
    return state;
}

LayoutState with_removed_item(const Story& story, std::string_view scene_id) {
    LayoutState state = story.layout;
    const auto before = chronological_anchor_ids(story);
    const bool untouched = is_default_spacing(state, before);
    if (state.items.erase(std::string(scene_id)) == 0) {
        return state;
    }
    if (untouched) {
        std::vector<std::string> after;
        std::copy_if(before.begin(), before.end(), std::back_inserter(after),
                     [&](const std::string& id) { return id != scene_id; });
        respace(state, after);
    }
    return state;
}

std::vector<std::string> violations(const Story& story) {
    std::vector<std::string> out;
    const auto ids = chronological_anchor_ids(story);
    for (const auto& id : ids) {
        if (!story.layout.items.contains(id)) {
            out.push_back(fmt::format("metaphorical scene {} has no layout item", id));
        }
    }
    for (const auto& [id, item] : story.layout.items) {
        const Scene* scene = story.find_scene(id);
        if (scene == nullptr) {
            out.push_back(fmt::format("layout item {} refers to no scene", id));
            continue;
        }
        if (scene->kind != SceneKind::Metaphorical) {
            out.push_back(fmt::format("literal scene {} has a layout item", id));
        }
        if (!std::isfinite(item.anchor_x) || item.anchor_x < 0.0 || item.anchor_x > 1.0) {
            out.push_back(fmt::format("anchor of {} outside [0,1]", id));
        }
        if (!(item.scale >= kMinScale && item.scale <= kMaxScale)) {
            out.push_back(fmt::format("scale of {} outside [{}, {}]", id, kMinScale, kMaxScale));
        }
        if (scene->displayed_generation &&
            std::find(item.history_slots.begin(), item.history_slots.end(),
                      *scene->displayed_generation) != item.history_slots.end()) {
            out.push_back(fmt::format("displayed generation of {} is in its history slots", id));
        }
        if (item.history_slots != history_slots_for(*scene)) {
            out.push_back(fmt::format("history slots of {} are out of sync", id));
        }
    }
    if (out.empty() && !strictly_increasing(story.layout, ids)) {
        out.push_back("anchor x-coordinates are not strictly increasing in scene order");
    }
    if (!(story.layout.axis_y >= 0.0 && story.layout.axis_y <= 1.0)) {
        out.push_back("axis_y outside [0,1]");
    }
    return out;
}

}  // namespace dreamloom::layout
