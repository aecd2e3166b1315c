#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamloom/model.hpp"

// Bundle layout:
//   <bundle>/story.json        story file, schema_version 1
//   <bundle>/images/<ref>      image bytes as received, ref = sha256 of bytes
namespace dreamloom::store {

namespace fs = std::filesystem;

inline constexpr std::string_view kStoryFile = "story.json";
inline constexpr std::string_view kImagesDir = "images";

/// Every image ref referenced by the story, sorted and unique.
std::vector<std::string> image_refs(const Story& story);

/// Writes path through a sibling temp file and rename. Throws Error(IoFailure).
void write_file_atomic(const fs::path& path, std::string_view bytes);
/// Throws Error(IoFailure) when the file cannot be read.
std::string read_file(const fs::path& path);

/// Stores bytes under images/<sha256> unless already present; returns the ref.
std::string put_image(const fs::path& bundle, std::string_view bytes);
std::optional<std::string> read_image(const fs::path& bundle, std::string_view ref);
bool has_image(const fs::path& bundle, std::string_view ref);

/// Writes pending images, then the story file atomically, then drops image
/// files no longer referenced. Throws Error(IoFailure) naming a ref that is
/// neither in the bundle nor in pending, and Error(InvalidRequest) for a
/// story that breaks model invariants.
fs::path save_story(const fs::path& bundle, const Story& story,
                    const std::map<std::string, std::string>& pending_images = {});

/// Throws Error(IoFailure | CorruptBundle | UnsupportedSchema).
Story load_story(const fs::path& bundle);

struct BundleReport {
    fs::path bundle;
    std::vector<std::string> violations;
    bool clean() const { return violations.empty(); }
};

/// Never throws for bundle content; problems are listed in the report.
BundleReport validate_bundle(const fs::path& bundle);

struct PlaybackFrame {
    std::string scene_id;
    std::size_t position = 0;
    SceneKind kind = SceneKind::Literal;
    BubbleShape bubble = BubbleShape::Rounded;
    std::string text;
    std::optional<std::string> title;  // "<adjectives> <affective element> - <concept>"
    std::optional<std::string> depiction;
    std::optional<std::string> image_ref;
    std::optional<std::string> filter_color;
    bool missing_image = false;  // metaphorical scene without a displayed image

    friend bool operator==(const PlaybackFrame&, const PlaybackFrame&) = default;
};

struct PlaybackManifest {
    std::string story_id;
    std::string title;
    std::vector<PlaybackFrame> frames;  // scene position order
};

PlaybackManifest export_playback(const Story& story);
nlohmann::json to_json(const PlaybackManifest& manifest);
/// Standalone manifest file for sharing.
void write_playback(const fs::path& path, const PlaybackManifest& manifest);

// Stories under <data_dir>/stories/<story id>/.
class StoryStore {
public:
    explicit StoryStore(fs::path data_dir);

    const fs::path& data_dir() const noexcept { return data_dir_; }
    fs::path bundle_dir(std::string_view story_id) const;
    std::vector<std::string> list_ids() const;
    bool exists(std::string_view story_id) const;

    fs::path save(const Story& story, const std::map<std::string, std::string>& pending_images = {});
    Story load(std::string_view story_id) const;
    std::optional<std::string> find_image(std::string_view ref) const;

private:
    fs::path data_dir_;
};

}  // namespace dreamloom::store
