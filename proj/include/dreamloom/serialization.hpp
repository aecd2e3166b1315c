#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamloom/metaphor.hpp"
#include "dreamloom/model.hpp"
#include "dreamloom/providers.hpp"

// JSON forms shared by the story file and the HTTP API. Field names are
// documented in docs/bundle-format.md. Derived fields ("bubble", "palette",
// "filter", "depiction", "display_text") are written for readers and ignored
// when parsing.
namespace dreamloom::serial {

using json = nlohmann::json;

json to_json(const Color& c);
json to_json(const Palette& p);
json to_json(const ColorFilter& f);
json to_json(const MetaphorSpec& spec);
json to_json(const GenerationRecord& g);
json to_json(const Depiction& d);
json to_json(const Scene& scene);
json to_json(const LayoutItem& item);
json to_json(const LayoutState& layout);
json to_json(const Story& story);
json to_json(const MetaphorSuggestion& s);
json to_json(const ProviderHealth& h);

// Parsers throw Error(InvalidRequest) naming the offending field.
Color color_from_json(const json& j);
Palette palette_from_json(const json& j);
ColorFilter filter_from_json(const json& j);
MetaphorSpec metaphor_from_json(const json& j);
GenerationRecord generation_from_json(const json& j);
Depiction depiction_from_json(const json& j);
Scene scene_from_json(const json& j);
LayoutState layout_from_json(const json& j);
/// Also throws Error(UnsupportedSchema) for a schema_version newer than kSchemaVersion.
/// Does not check model invariants.
Story story_from_json(const json& j);

/// Pretty-printed story file text.
std::string dump_story(const Story& story);
/// Throws Error(InvalidRequest) for malformed JSON text.
Story parse_story(std::string_view text);

}  // namespace dreamloom::serial
