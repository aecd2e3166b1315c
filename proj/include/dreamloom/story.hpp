#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dreamloom/model.hpp"

// State transitions on the story model. Every function either applies its
// change completely or throws dreamloom::Error and leaves the story untouched.
namespace dreamloom::story {

/// Throws Error(EmptyTitle) for blank titles.
Story create_story(std::string_view title);

/// Inserts at position, shifting later scenes. Metaphorical scenes get a
/// storyline anchor. Throws Error(PositionOutOfRange).
Scene add_scene(Story& story, SceneKind kind, std::size_t position, std::string text = {});

/// Removes the scene and its anchor, closing the position gap.
void delete_scene(Story& story, std::string_view scene_id);

Scene set_scene_text(Story& story, std::string_view scene_id, std::string text);

/// Existing generations are kept. Throws Error(NotMetaphorical | InvalidSpec).
Scene set_metaphor_spec(Story& story, std::string_view scene_id, MetaphorSpec spec);

/// Appends a not-yet-accepted, not-displayed record.
/// Throws Error(NotMetaphorical | MissingSpec | InvalidRequest).
GenerationRecord record_generation(Story& story, std::string_view scene_id, std::string prompt,
                                   std::string image_ref, const GenerationParams& params);

struct AcceptanceEvent {
    std::string scene_id;
    std::string generation_id;
    std::string image_ref;
    bool already_accepted = false;  // replay; nothing was changed
};

/// Marks the record accepted, displays it, and stores the palette extracted
/// from its image. Accepting an already accepted record changes nothing.
/// Throws Error(UnknownScene | UnknownGeneration).
AcceptanceEvent accept_generation(Story& story, std::string_view scene_id,
                                  std::string_view generation_id, Palette palette);

/// Changes only which record is displayed. Throws Error(UnknownGeneration).
Scene switch_display(Story& story, std::string_view scene_id, std::string_view generation_id);

/// Appends a depiction for an accepted record and supersedes the previous one.
Scene append_depiction(Story& story, std::string_view scene_id, std::string_view generation_id,
                       std::string text);

/// PalettePick or CustomHex; std::nullopt restores the palette default.
/// Throws Error(NotMetaphorical | InvalidRequest | EmptyPalette).
Scene set_user_filter(Story& story, std::string_view scene_id, std::optional<ColorFilter> filter);

BubbleShape bubble_shape(const Scene& scene) noexcept;

/// All model invariants, including the layout's. Empty when valid.
std::vector<std::string> violations(const Story& story);

}  // namespace dreamloom::story
