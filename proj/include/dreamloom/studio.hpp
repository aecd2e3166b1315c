#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "dreamloom/error.hpp"
#include "dreamloom/layout.hpp"
#include "dreamloom/metaphor.hpp"
#include "dreamloom/model.hpp"
#include "dreamloom/providers.hpp"
#include "dreamloom/store.hpp"
#include "dreamloom/story.hpp"

namespace dreamloom {

struct ApiErrorInfo {
    std::string code;
    std::string message;
    bool retryable = false;

    static ApiErrorInfo from(const Error& e);
};

struct StorySummary {
    std::string id;
    std::string title;
    std::size_t scene_count = 0;
    Timestamp updated_at{};
};

struct SceneDraft {
    SceneKind kind = SceneKind::Literal;
    std::optional<std::size_t> position;  // default: append
    std::string text;
    std::optional<MetaphorSpec> metaphor;
};

struct SceneUpdate {
    std::optional<std::string> text;
    std::optional<MetaphorSpec> metaphor;
};

struct AcceptanceResult {
    Scene scene;
    story::AcceptanceEvent event;
    bool depiction_added = false;
    std::optional<ApiErrorInfo> depiction_error;  // image and palette stay committed
};

struct PaletteView {
    std::optional<Palette> palette;
    std::optional<ColorFilter> filter;
};

// Workflow orchestration over the story model, providers and the bundle
// store. Mutations on one story are serialized; provider calls run without
// holding the story lock. Every committed change is saved before it becomes
// visible, so a failed save leaves the previous state in place.
class Studio {
public:
    Studio(std::filesystem::path data_dir, Providers providers, PromptTemplates templates,
           ProviderConfig config = {});

    Story create_story(std::string_view title);
    std::vector<StorySummary> list_stories() const;
    Story get_story(std::string_view story_id) const;
    /// Replaces any story with the same id. images maps ref to bytes for
    /// refs not already stored. Throws Error(InvalidRequest | IoFailure).
    Story import_story(Story story, const std::map<std::string, std::string>& images = {});

    Scene add_scene(std::string_view story_id, SceneDraft draft);
    Scene update_scene(std::string_view scene_id, SceneUpdate update);
    void delete_scene(std::string_view scene_id);
    Scene get_scene(std::string_view scene_id) const;
    std::string story_of_scene(std::string_view scene_id) const;

    /// meaning_type defaults to the metaphor's. Throws Error(MissingSpec |
    /// UnparseableResponse | ProviderTimeout | ...).
    std::vector<MetaphorSuggestion> request_suggestions(std::string_view scene_id,
                                                        std::optional<MeaningType> meaning_type,
                                                        std::size_t n = kDefaultSuggestionCount);

    /// Nothing is recorded when the provider fails.
    GenerationRecord request_generation(std::string_view scene_id,
                                        std::optional<std::uint64_t> seed = std::nullopt);

    /// Accept, extract the palette, then request a depiction. Replays of an
    /// accepted generation change nothing unless its depiction is missing.
    AcceptanceResult finalize_acceptance(std::string_view scene_id, std::string_view generation_id);

    Scene switch_display(std::string_view scene_id, std::string_view generation_id);
    PaletteView palette_view(std::string_view scene_id) const;
    Scene set_filter(std::string_view scene_id, std::optional<ColorFilter> filter);
    LayoutState update_layout(std::string_view story_id, const layout::LayoutEdit& edit);

    store::PlaybackManifest playback(std::string_view story_id) const;
    std::optional<std::string> image(std::string_view ref) const;
    std::vector<ProviderHealth> health() const;

    const ProviderConfig& config() const noexcept { return config_; }
    const MetaphorEngine& engine() const noexcept { return engine_; }
    std::filesystem::path bundle_dir(std::string_view story_id) const;

private:
    struct Entry {
        mutable std::mutex mutex;
        Story story;
    };

    std::shared_ptr<Entry> entry(std::string_view story_id) const;
    std::shared_ptr<Entry> entry_for_scene(std::string_view scene_id, std::string* story_id = nullptr) const;
    void reindex(const Story& before, const Story& after);
    // Applies fn to a copy, saves it, then publishes it. Caller holds the entry lock.
    template <typename Fn>
    auto commit(Entry& e, Fn&& fn, const std::map<std::string, std::string>& images = {});

    store::StoryStore store_;
    Providers providers_;
    MetaphorEngine engine_;
    ProviderConfig config_;

    mutable std::shared_mutex index_mutex_;
    std::map<std::string, std::shared_ptr<Entry>, std::less<>> stories_;
    std::map<std::string, std::string, std::less<>> scene_index_;  // scene id -> story id
};

}  // namespace dreamloom
