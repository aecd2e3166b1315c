#include "dreamloom/studio.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "dreamloom/palette.hpp"
#include "dreamloom/util.hpp"

namespace dreamloom {

ApiErrorInfo ApiErrorInfo::from(const Error& e) {
    return {std::string(error_code_name(e.code())), e.what(), error_code_retryable(e.code())};
}

Studio::Studio(std::filesystem::path data_dir, Providers providers, PromptTemplates templates,
               ProviderConfig config)
    : store_(std::move(data_dir)),
      providers_(std::move(providers)),
      engine_(std::move(templates)),
      config_(std::move(config)) {
    for (const auto& id : store_.list_ids()) {
        auto e = std::make_shared<Entry>();
        e->story = store_.load(id);
        for (const auto& s : e->story.scenes) scene_index_[s.id] = e->story.id;
        stories_.emplace(id, std::move(e));
    }
}

std::filesystem::path Studio::bundle_dir(std::string_view story_id) const {
    return store_.bundle_dir(story_id);
}

std::shared_ptr<Studio::Entry> Studio::entry(std::string_view story_id) const {
    std::shared_lock lock(index_mutex_);
    auto it = stories_.find(story_id);
    if (it == stories_.end()) {
        throw Error(ErrorCode::UnknownStory, fmt::format("no story with id '{}'", story_id));
    }
    return it->second;
}

std::shared_ptr<Studio::Entry> Studio::entry_for_scene(std::string_view scene_id, std::string* story_id) const {
    std::shared_lock lock(index_mutex_);
    auto it = scene_index_.find(scene_id);
    if (it == scene_index_.end()) {
        throw Error(ErrorCode::UnknownScene, fmt::format("no scene with id '{}'", scene_id));
    }
    auto st = stories_.find(it->second);
    if (st == stories_.end()) {
        throw Error(ErrorCode::UnknownScene, fmt::format("no scene with id '{}'", scene_id));
    }
    if (story_id != nullptr) *story_id = it->second;
    return st->second;
}

void Studio::reindex(const Story& before, const Story& after) {
    std::unique_lock lock(index_mutex_);
    for (const auto& s : before.scenes) {
        auto it = scene_index_.find(s.id);
        if (it != scene_index_.end() && it->second == before.id) scene_index_.erase(it);
    }
    for (const auto& s : after.scenes) scene_index_[s.id] = after.id;
}

template <typename Fn>
auto Studio::commit(Entry& e, Fn&& fn, const std::map<std::string, std::string>& images) {
    Story next = e.story;
    auto result = fn(next);
    store_.save(next, images);
    Story before = std::move(e.story);
    e.story = std::move(next);
    reindex(before, e.story);
    return result;
}

namespace {

const Scene& scene_in(const Story& story, std::string_view scene_id) {
    const Scene* s = story.find_scene(scene_id);
    if (s == nullptr) throw Error(ErrorCode::UnknownScene, fmt::format("no scene with id '{}'", scene_id));
    return *s;
}

const MetaphorSpec& spec_of(const Scene& scene, bool need_concept) {
    if (scene.kind != SceneKind::Metaphorical) {
        throw Error(ErrorCode::NotMetaphorical, fmt::format("scene '{}' is literal", scene.id));
    }
    const bool ok = scene.metaphor && (need_concept ? scene.metaphor->complete() : scene.metaphor->articulated());
    if (!ok) {
        throw Error(ErrorCode::MissingSpec,
                    need_concept ? "scene needs an affective element, adjectives and a metaphor concept"
                                 : "scene needs an affective element and at least one adjective");
    }
    return *scene.metaphor;
}

bool has_depiction_for(const Scene& scene, std::string_view generation_id) {
    return std::any_of(scene.depictions.begin(), scene.depictions.end(),
                       [&](const Depiction& d) { return d.generation_id == generation_id; });
}

}  // namespace

Story Studio::create_story(std::string_view title) {
    Story story = story::create_story(title);
    store_.save(story);
    auto e = std::make_shared<Entry>();
    e->story = story;
    std::unique_lock lock(index_mutex_);
    stories_.emplace(story.id, std::move(e));
    return story;
}

std::vector<StorySummary> Studio::list_stories() const {
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::shared_lock lock(index_mutex_);
        for (const auto& [id, e] : stories_) entries.push_back(e);
    }
    std::vector<StorySummary> out;
    for (const auto& e : entries) {
        std::lock_guard lock(e->mutex);
        out.push_back({e->story.id, e->story.title, e->story.scenes.size(), e->story.updated_at});
    }
    return out;
}

Story Studio::get_story(std::string_view story_id) const {
    auto e = entry(story_id);
    std::lock_guard lock(e->mutex);
    return e->story;
}

Story Studio::import_story(Story story, const std::map<std::string, std::string>& images) {
    if (auto problems = story::violations(story); !problems.empty()) {
        throw Error(ErrorCode::InvalidRequest, fmt::format("imported story is invalid: {}", problems.front()));
    }
    const auto bundle = store_.bundle_dir(story.id);
    {
        std::shared_lock lock(index_mutex_);
        for (const auto& s : story.scenes) {
            auto it = scene_index_.find(s.id);
            if (it != scene_index_.end() && it->second != story.id) {
                throw Error(ErrorCode::InvalidRequest,
                            fmt::format("scene id '{}' already belongs to story '{}'", s.id, it->second));
            }
        }
    }
    std::map<std::string, std::string> pending = images;
    for (const auto& ref : store::image_refs(story)) {
        if (pending.count(ref) || store::has_image(bundle, ref)) continue;
        if (auto bytes = store_.find_image(ref)) pending.emplace(ref, std::move(*bytes));
    }

    std::shared_ptr<Entry> e;
    {
        std::unique_lock lock(index_mutex_);
        auto [it, inserted] = stories_.try_emplace(story.id, nullptr);
        if (inserted) it->second = std::make_shared<Entry>();
        e = it->second;
    }
    std::lock_guard lock(e->mutex);
    try {
        store_.save(story, pending);
    } catch (...) {
        if (e->story.id.empty()) {
            std::unique_lock index_lock(index_mutex_);
            stories_.erase(story.id);
        }
        throw;
    }
    Story before = std::move(e->story);
    e->story = std::move(story);
    reindex(before, e->story);
    return e->story;
}

Scene Studio::add_scene(std::string_view story_id, SceneDraft draft) {
    auto e = entry(story_id);
    std::lock_guard lock(e->mutex);
    return commit(*e, [&](Story& s) {
        const std::size_t position = draft.position.value_or(s.scenes.size());
        Scene scene = story::add_scene(s, draft.kind, position, std::move(draft.text));
        if (draft.metaphor) scene = story::set_metaphor_spec(s, scene.id, std::move(*draft.metaphor));
        return scene;
    });
}

Scene Studio::update_scene(std::string_view scene_id, SceneUpdate update) {
    auto e = entry_for_scene(scene_id);
    std::lock_guard lock(e->mutex);
    return commit(*e, [&](Story& s) {
        if (update.metaphor) story::set_metaphor_spec(s, scene_id, std::move(*update.metaphor));
        if (update.text) story::set_scene_text(s, scene_id, std::move(*update.text));
        return scene_in(s, scene_id);
    });
}

void Studio::delete_scene(std::string_view scene_id) {
    auto e = entry_for_scene(scene_id);
    std::lock_guard lock(e->mutex);
    commit(*e, [&](Story& s) {
        story::delete_scene(s, scene_id);
        return 0;
    });
}

Scene Studio::get_scene(std::string_view scene_id) const {
    auto e = entry_for_scene(scene_id);
    std::lock_guard lock(e->mutex);
    return scene_in(e->story, scene_id);
}

std::string Studio::story_of_scene(std::string_view scene_id) const {
    std::string id;
    entry_for_scene(scene_id, &id);
    return id;
}

std::vector<MetaphorSuggestion> Studio::request_suggestions(std::string_view scene_id,
                                                            std::optional<MeaningType> meaning_type,
                                                            std::size_t n) {
    MetaphorSpec spec;
    {
        auto e = entry_for_scene(scene_id);
        std::lock_guard lock(e->mutex);
        spec = spec_of(scene_in(e->story, scene_id), false);
    }
    if (n == 0) throw Error(ErrorCode::InvalidRequest, "suggestion count must be at least 1");
    const PromptText prompt = engine_.build_suggestion_prompt(spec, meaning_type.value_or(spec.meaning_type), n);
    const std::string response =
        providers_.chat->chat_complete(make_chat_request(config_, prompt, ChatPurpose::Suggestion));
    return parse_suggestions(response);
}

GenerationRecord Studio::request_generation(std::string_view scene_id, std::optional<std::uint64_t> seed) {
    MetaphorSpec spec;
    {
        auto e = entry_for_scene(scene_id);
        std::lock_guard lock(e->mutex);
        spec = spec_of(scene_in(e->story, scene_id), true);
    }
    const PromptText prompt = engine_.build_image_prompt(spec);
    const ImageRequest request = make_image_request(config_, prompt, seed);
    ImageResult result = providers_.image->generate_image(request);
    if (result.image_ref != sha256_hex(result.bytes)) {
        throw Error(ErrorCode::BadImagePayload, "image ref does not match the image bytes");
    }

    auto e = entry_for_scene(scene_id);
    std::lock_guard lock(e->mutex);
    const GenerationParams params{request.width, request.height, request.steps, request.seed};
    return commit(
        *e,
        [&](Story& s) { return story::record_generation(s, scene_id, prompt.full, result.image_ref, params); },
        {{result.image_ref, result.bytes}});
}

AcceptanceResult Studio::finalize_acceptance(std::string_view scene_id, std::string_view generation_id) {
    std::string story_id;
    auto e = entry_for_scene(scene_id, &story_id);
    std::string image_ref;
    bool accepted = false;
    bool depicted = false;
    {
        std::lock_guard lock(e->mutex);
        const Scene& scene = scene_in(e->story, scene_id);
        const GenerationRecord* g = scene.find_generation(generation_id);
        if (g == nullptr) {
            throw Error(ErrorCode::UnknownGeneration,
                        fmt::format("scene '{}' has no generation '{}'", scene_id, generation_id));
        }
        image_ref = g->image_ref;
        accepted = g->accepted;
        depicted = has_depiction_for(scene, generation_id);
    }

    AcceptanceResult result;
    if (!accepted) {
        const auto bytes = store::read_image(store_.bundle_dir(story_id), image_ref);
        if (!bytes) {
            throw Error(ErrorCode::IoFailure, fmt::format("image bytes missing for ref {}", image_ref));
        }
        Palette palette = extract_palette(*bytes);
        std::lock_guard lock(e->mutex);
        result.event = commit(*e, [&](Story& s) {
            return story::accept_generation(s, scene_id, generation_id, palette);
        });
    } else {
        result.event = {std::string(scene_id), std::string(generation_id), image_ref, true};
    }

    if (!depicted) {
        try {
            MetaphorSpec spec;
            {
                std::lock_guard lock(e->mutex);
                spec = spec_of(scene_in(e->story, scene_id), true);
            }
            const PromptText prompt = engine_.build_depiction_prompt(spec);
            const std::string text = std::string(trim(
                providers_.chat->chat_complete(make_chat_request(config_, prompt, ChatPurpose::Depiction))));
            if (text.empty()) throw Error(ErrorCode::UnparseableResponse, "depiction response was empty");
            std::lock_guard lock(e->mutex);
            const Scene& now = scene_in(e->story, scene_id);
            const GenerationRecord* g = now.find_generation(generation_id);
            if (g != nullptr && g->accepted && !has_depiction_for(now, generation_id)) {
                commit(*e, [&](Story& s) { return story::append_depiction(s, scene_id, generation_id, text); });
                result.depiction_added = true;
            }
        } catch (const Error& err) {
            result.depiction_error = ApiErrorInfo::from(err);
        }
    }

    std::lock_guard lock(e->mutex);
    result.scene = scene_in(e->story, scene_id);
    return result;
}

Scene Studio::switch_display(std::string_view scene_id, std::string_view generation_id) {
    auto e = entry_for_scene(scene_id);
    std::lock_guard lock(e->mutex);
    return commit(*e, [&](Story& s) { return story::switch_display(s, scene_id, generation_id); });
}

PaletteView Studio::palette_view(std::string_view scene_id) const {
    auto e = entry_for_scene(scene_id);
    std::lock_guard lock(e->mutex);
    const Scene& scene = scene_in(e->story, scene_id);
    PaletteView view;
    if (const Palette* p = scene.palette()) view.palette = *p;
    view.filter = scene.filter();
    return view;
}

Scene Studio::set_filter(std::string_view scene_id, std::optional<ColorFilter> filter) {
    auto e = entry_for_scene(scene_id);
    std::lock_guard lock(e->mutex);
    return commit(*e, [&](Story& s) { return story::set_user_filter(s, scene_id, filter); });
}

LayoutState Studio::update_layout(std::string_view story_id, const layout::LayoutEdit& edit) {
    auto e = entry(story_id);
    std::lock_guard lock(e->mutex);
    return commit(*e, [&](Story& s) {
        s.layout = layout::apply_edit(s, edit);
        s.updated_at = now_utc();
        return s.layout;
    });
}

store::PlaybackManifest Studio::playback(std::string_view story_id) const {
    auto e = entry(story_id);
    std::lock_guard lock(e->mutex);
    return store::export_playback(e->story);
}

std::optional<std::string> Studio::image(std::string_view ref) const {
    return store_.find_image(ref);
}

std::vector<ProviderHealth> Studio::health() const {
    return providers_.health_check();
}

}  // namespace dreamloom
