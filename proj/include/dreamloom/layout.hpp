#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dreamloom/model.hpp"

namespace dreamloom::layout {

inline constexpr double kMinScale = 0.25;
inline constexpr double kMaxScale = 4.0;
inline constexpr Offset kDefaultOffset{0.0, 0.15};

/// Ids of metaphorical scenes in position order.
std::vector<std::string> chronological_anchor_ids(const Story& story);

/// Evenly spaced anchors x = i/(m+1), default offsets and scale, slots synced.
LayoutState default_layout(const Story& story);

/// Moves one anchor and its dangling image. Offsets are unconstrained; the
/// anchor must stay inside [0,1] and strictly between its neighbours.
/// Throws Error(UnknownScene | OrderViolation | InvalidRequest).
LayoutState move_item(const Story& story, std::string_view scene_id, double new_anchor_x,
                      Offset new_offset);

/// Scale is clamped to [kMinScale, kMaxScale]. Throws Error(UnknownScene).
LayoutState resize_item(const Story& story, std::string_view scene_id, double scale);

/// Generations minus the displayed one, in creation order.
std::vector<std::string> history_slots_for(const Scene& scene);

/// Refreshes the slots of scene's item; a no-op for scenes without an item.
LayoutState sync_history_slots(LayoutState state, const Scene& scene);

struct ItemEdit {
    std::optional<double> anchor_x;
    std::optional<Offset> image_offset;
    std::optional<double> scale;
};

struct LayoutEdit {
    std::map<std::string, ItemEdit> items;
    std::optional<double> axis_y;
};

/// Applies several edits atomically; the resulting state must satisfy the
/// ordering invariant as a whole.
LayoutState apply_edit(const Story& story, const LayoutEdit& edit);

/// Layout after a metaphorical scene has been inserted into story.scenes
/// (story.layout does not yet hold an item for it). An untouched default
/// layout is re-spaced; a customised one gets the midpoint between the
/// neighbouring anchors.
LayoutState with_inserted_item(const Story& story, std::string_view scene_id);

/// Layout once scene_id is dropped; story still holds the scene.
LayoutState with_removed_item(const Story& story, std::string_view scene_id);

/// Every ordering, membership, bound and slot rule; empty when valid.
std::vector<std::string> violations(const Story& story);

}  // namespace dreamloom::layout
