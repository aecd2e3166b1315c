#include "dreamloom/serialization.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dreamloom/error.hpp"
#include "dreamloom/palette.hpp"
#include "dreamloom/story.hpp"
#include "dreamloom/util.hpp"

namespace dreamloom::serial {

namespace {

[[noreturn]] void bad(std::string_view what) {
    throw Error(ErrorCode::InvalidRequest, std::string(what));
}

const json& need(const json& j, const char* key) {
    if (!j.is_object()) bad(fmt::format("expected an object holding '{}'", key));
    auto it = j.find(key);
    if (it == j.end()) bad(fmt::format("missing field '{}'", key));
    return *it;
}

const json* maybe(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return nullptr;
    return &*it;
}

std::string str(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_string()) bad(fmt::format("field '{}' must be a string", key));
    return v.get<std::string>();
}

double num(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_number()) bad(fmt::format("field '{}' must be a number", key));
    const double d = v.get<double>();
    if (!std::isfinite(d)) bad(fmt::format("field '{}' must be finite", key));
    return d;
}

int integer(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_number_integer()) bad(fmt::format("field '{}' must be an integer", key));
    return v.get<int>();
}

bool boolean(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_boolean()) bad(fmt::format("field '{}' must be a boolean", key));
    return v.get<bool>();
}

const json& array(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_array()) bad(fmt::format("field '{}' must be an array", key));
    return v;
}

Timestamp timestamp(const json& j, const char* key) {
    const std::string text = str(j, key);
    auto ts = parse_timestamp(text);
    if (!ts) bad(fmt::format("field '{}' is not a timestamp: '{}'", key, text));
    return *ts;
}

json opt_string(const std::optional<std::string>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const Color& c) {
    return c.hex();
}

json to_json(const Palette& p) {
    json entries = json::array();
    for (const auto& e : p.entries) {
        entries.push_back({{"hex", e.color.hex()}, {"weight", e.weight}});
    }
    return {{"source_image", p.source_image}, {"entries", std::move(entries)}};
}

json to_json(const ColorFilter& f) {
    return {{"hex", f.color.hex()}, {"origin", to_string(f.origin)}};
}

json to_json(const MetaphorSpec& spec) {
    return {
        {"affective_element", spec.affective_element},
        {"adjectives", spec.adjectives},
        {"metaphor_concept", spec.metaphor_concept},
        {"meaning_type", to_string(spec.meaning_type)},
        {"visual_structure", to_string(spec.visual_structure)},
        {"extra_prompt", opt_string(spec.extra_prompt)},
    };
}

json to_json(const GenerationRecord& g) {
    json params = {{"width", g.params.width}, {"height", g.params.height}, {"steps", g.params.steps}};
    params["seed"] = g.params.seed ? json(*g.params.seed) : json(nullptr);
    return {
        {"id", g.id},
        {"prompt", g.prompt},
        {"params", std::move(params)},
        {"image_ref", g.image_ref},
        {"created_at", format_timestamp(g.created_at)},
        {"accepted", g.accepted},
    };
}

json to_json(const Depiction& d) {
    return {
        {"generation_id", d.generation_id},
        {"text", d.text},
        {"created_at", format_timestamp(d.created_at)},
        {"superseded", d.superseded},
    };
}

json to_json(const Scene& scene) {
    json generations = json::array();
    for (const auto& g : scene.generations) generations.push_back(to_json(g));
    json depictions = json::array();
    for (const auto& d : scene.depictions) depictions.push_back(to_json(d));
    json palettes = json::array();
    for (const auto& p : scene.palettes) {
        palettes.push_back({{"generation_id", p.generation_id}, {"palette", to_json(p.palette)}});
    }
    const Palette* current = scene.palette();
    const auto filter = scene.filter();
    const Depiction* depiction = scene.depiction();
    return {
        {"id", scene.id},
        {"kind", to_string(scene.kind)},
        {"position", scene.position},
        {"text", scene.text},
        {"metaphor", scene.metaphor ? to_json(*scene.metaphor) : json(nullptr)},
        {"generations", std::move(generations)},
        {"displayed_generation", opt_string(scene.displayed_generation)},
        {"depictions", std::move(depictions)},
        {"palettes", std::move(palettes)},
        {"user_filter", scene.user_filter ? to_json(*scene.user_filter) : json(nullptr)},
        {"bubble", to_string(story::bubble_shape(scene))},
        {"palette", current ? to_json(*current) : json(nullptr)},
        {"filter", filter ? to_json(*filter) : json(nullptr)},
        {"depiction", depiction ? json(depiction->text) : json(nullptr)},
        {"display_text", scene.display_text()},
    };
}

json to_json(const LayoutItem& item) {
    return {
        {"anchor_x", item.anchor_x},
        {"image_offset", {{"dx", item.image_offset.dx}, {"dy", item.image_offset.dy}}},
        {"scale", item.scale},
        {"history_slots", item.history_slots},
    };
}

json to_json(const LayoutState& layout) {
    json items = json::object();
    for (const auto& [id, item] : layout.items) items[id] = to_json(item);
    return {{"axis_y", layout.axis_y}, {"items", std::move(items)}};
}

json to_json(const Story& story) {
    json scenes = json::array();
    for (const auto& s : story.scenes) scenes.push_back(to_json(s));
    return {
        {"schema_version", story.schema_version},
        {"id", story.id},
        {"title", story.title},
        {"created_at", format_timestamp(story.created_at)},
        {"updated_at", format_timestamp(story.updated_at)},
        {"scenes", std::move(scenes)},
        {"layout", to_json(story.layout)},
    };
}

json to_json(const MetaphorSuggestion& s) {
    return {{"concept", s.phrase}, {"rationale", opt_string(s.rationale)}};
}

json to_json(const ProviderHealth& h) {
    return {
        {"provider", h.provider},
        {"mode", to_string(h.mode)},
        {"state", to_string(h.state)},
        {"detail", h.detail},
    };
}

Color color_from_json(const json& j) {
    if (!j.is_string()) bad("colour must be a hex string");
    try {
        return parse_hex(j.get<std::string>());
    } catch (const Error& e) {
        bad(e.what());
    }
}

Palette palette_from_json(const json& j) {
    Palette p;
    p.source_image = str(j, "source_image");
    for (const auto& e : array(j, "entries")) {
        p.entries.push_back({color_from_json(need(e, "hex")), num(e, "weight")});
    }
    return p;
}

ColorFilter filter_from_json(const json& j) {
    return {color_from_json(need(j, "hex")), parse_filter_origin(str(j, "origin"))};
}

MetaphorSpec metaphor_from_json(const json& j) {
    MetaphorSpec spec;
    spec.affective_element = str(j, "affective_element");
    for (const auto& a : array(j, "adjectives")) {
        if (!a.is_string()) bad("adjectives must be strings");
        spec.adjectives.push_back(a.get<std::string>());
    }
    if (const json* c = maybe(j, "metaphor_concept")) {
        if (!c->is_string()) bad("field 'metaphor_concept' must be a string");
        spec.metaphor_concept = c->get<std::string>();
    }
    if (const json* m = maybe(j, "meaning_type")) {
        if (!m->is_string()) bad("field 'meaning_type' must be a string");
        spec.meaning_type = parse_meaning_type(m->get<std::string>());
    }
    if (const json* v = maybe(j, "visual_structure")) {
        if (!v->is_string()) bad("field 'visual_structure' must be a string");
        spec.visual_structure = parse_visual_structure(v->get<std::string>());
    }
    if (const json* e = maybe(j, "extra_prompt")) {
        if (!e->is_string()) bad("field 'extra_prompt' must be a string");
        spec.extra_prompt = e->get<std::string>();
    }
    return spec;
}

GenerationRecord generation_from_json(const json& j) {
    GenerationRecord g;
    g.id = str(j, "id");
    g.prompt = str(j, "prompt");
    const json& params = need(j, "params");
    g.params.width = integer(params, "width");
    g.params.height = integer(params, "height");
    g.params.steps = integer(params, "steps");
    if (const json* seed = maybe(params, "seed")) {
        if (!seed->is_number_unsigned() && !seed->is_number_integer()) bad("field 'seed' must be an integer");
        g.params.seed = seed->get<std::uint64_t>();
    }
    g.image_ref = str(j, "image_ref");
    g.created_at = timestamp(j, "created_at");
    g.accepted = boolean(j, "accepted");
    return g;
}

Depiction depiction_from_json(const json& j) {
    Depiction d;
    d.generation_id = str(j, "generation_id");
    d.text = str(j, "text");
    d.created_at = timestamp(j, "created_at");
    d.superseded = boolean(j, "superseded");
    return d;
}

Scene scene_from_json(const json& j) {
    Scene s;
    s.id = str(j, "id");
    s.kind = parse_scene_kind(str(j, "kind"));
    const json& pos = need(j, "position");
    if (!pos.is_number_unsigned() && !(pos.is_number_integer() && pos.get<long long>() >= 0)) {
        bad("field 'position' must be a non-negative integer");
    }
    s.position = pos.get<std::size_t>();
    s.text = str(j, "text");
    if (const json* m = maybe(j, "metaphor")) s.metaphor = metaphor_from_json(*m);
    for (const auto& g : array(j, "generations")) s.generations.push_back(generation_from_json(g));
    if (const json* d = maybe(j, "displayed_generation")) {
        if (!d->is_string()) bad("field 'displayed_generation' must be a string");
        s.displayed_generation = d->get<std::string>();
    }
    for (const auto& d : array(j, "depictions")) s.depictions.push_back(depiction_from_json(d));
    for (const auto& p : array(j, "palettes")) {
        s.palettes.push_back({str(p, "generation_id"), palette_from_json(need(p, "palette"))});
    }
    if (const json* f = maybe(j, "user_filter")) s.user_filter = filter_from_json(*f);
    return s;
}

LayoutState layout_from_json(const json& j) {
    LayoutState layout;
    layout.axis_y = num(j, "axis_y");
    const json& items = need(j, "items");
    if (!items.is_object()) bad("field 'items' must be an object");
    for (const auto& [id, v] : items.items()) {
        LayoutItem item;
        item.anchor_x = num(v, "anchor_x");
        const json& off = need(v, "image_offset");
        item.image_offset = {num(off, "dx"), num(off, "dy")};
        item.scale = num(v, "scale");
        for (const auto& slot : array(v, "history_slots")) {
            if (!slot.is_string()) bad("history slots must be strings");
            item.history_slots.push_back(slot.get<std::string>());
        }
        layout.items.emplace(id, std::move(item));
    }
    return layout;
}

Story story_from_json(const json& j) {
    if (!j.is_object()) bad("story must be a JSON object");
    const int version = integer(j, "schema_version");
    if (version > kSchemaVersion) {
        throw Error(ErrorCode::UnsupportedSchema,
                    fmt::format("schema_version {} is newer than supported version {}", version, kSchemaVersion));
    }
    if (version < 1) bad(fmt::format("schema_version {} is not valid", version));
    Story story;
    story.schema_version = version;
    story.id = str(j, "id");
    story.title = str(j, "title");
    story.created_at = timestamp(j, "created_at");
    story.updated_at = timestamp(j, "updated_at");
    for (const auto& s : array(j, "scenes")) story.scenes.push_back(scene_from_json(s));
    story.layout = layout_from_json(need(j, "layout"));
    return story;
}

std::string dump_story(const Story& story) {
    return to_json(story).dump(2) + "\n";
}

Story parse_story(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        bad(fmt::format("story is not valid JSON: {}", e.what()));
    }
    return story_from_json(j);
}

}  // namespace dreamloom::serial
