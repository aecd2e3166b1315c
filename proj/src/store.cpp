#include "dreamloom/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dreamloom/error.hpp"
#include "dreamloom/metaphor.hpp"
#include "dreamloom/serialization.hpp"
#include "dreamloom/story.hpp"
#include "dreamloom/util.hpp"

namespace dreamloom::store {

namespace {

bool valid_ref(std::string_view ref) {
    return ref.size() == 64 && std::all_of(ref.begin(), ref.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

bool valid_story_id(std::string_view id) {
    return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](char c) {
               return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
           });
}

[[noreturn]] void io_fail(const std::string& what) {
    throw Error(ErrorCode::IoFailure, fmt::format("{}: {}", what, std::strerror(errno)));
}

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

}  // namespace

std::vector<std::string> image_refs(const Story& story) {
    std::set<std::string> refs;
    for (const auto& scene : story.scenes) {
        for (const auto& g : scene.generations) refs.insert(g.image_ref);
    }
    return {refs.begin(), refs.end()};
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
        throw Error(ErrorCode::IoFailure,
                    fmt::format("cannot create {}: {}", path.parent_path().string(), ec.message()));
    }
    const fs::path tmp = path.parent_path() / fmt::format(".{}.tmp-{}", path.filename().string(), new_id());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) io_fail(fmt::format("cannot create {}", tmp.string()));
    std::size_t written = 0;
    while (written < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + written, bytes.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int saved = errno;
            ::close(fd);
            fs::remove(tmp, ec);
            errno = saved;
            io_fail(fmt::format("cannot write {}", tmp.string()));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        fs::remove(tmp, ec);
        io_fail(fmt::format("cannot flush {}", tmp.string()));
    }
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        const int saved = errno;
        fs::remove(tmp, ec);
        errno = saved;
        io_fail(fmt::format("cannot replace {}", path.string()));
    }
    fsync_dir(path.parent_path());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, fmt::format("cannot read {}", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string put_image(const fs::path& bundle, std::string_view bytes) {
    std::string ref = sha256_hex(bytes);
    const fs::path path = bundle / kImagesDir / ref;
    if (!fs::exists(path)) write_file_atomic(path, bytes);
    return ref;
}

bool has_image(const fs::path& bundle, std::string_view ref) {
    return valid_ref(ref) && fs::is_regular_file(bundle / kImagesDir / std::string(ref));
}

std::optional<std::string> read_image(const fs::path& bundle, std::string_view ref) {
    if (!has_image(bundle, ref)) return std::nullopt;
    try {
        return read_file(bundle / kImagesDir / std::string(ref));
    } catch (const Error&) {
        return std::nullopt;
    }
}

fs::path save_story(const fs::path& bundle, const Story& story,
                    const std::map<std::string, std::string>& pending_images) {
    if (auto problems = story::violations(story); !problems.empty()) {
        throw Error(ErrorCode::InvalidRequest,
                    fmt::format("refusing to save an invalid story: {}", problems.front()));
    }
    const auto refs = image_refs(story);
    for (const auto& ref : refs) {
        if (!valid_ref(ref)) {
            throw Error(ErrorCode::IoFailure, fmt::format("image ref '{}' is not a sha256 digest", ref));
        }
        if (!pending_images.count(ref) && !has_image(bundle, ref)) {
            throw Error(ErrorCode::IoFailure, fmt::format("image bytes missing for ref {}", ref));
        }
    }
    for (const auto& [ref, bytes] : pending_images) {
        if (!std::binary_search(refs.begin(), refs.end(), ref)) continue;
        if (sha256_hex(bytes) != ref) {
            throw Error(ErrorCode::IoFailure, fmt::format("image bytes do not hash to ref {}", ref));
        }
        put_image(bundle, bytes);
    }
    write_file_atomic(bundle / kStoryFile, serial::dump_story(story));

    std::error_code ec;
    const fs::path images = bundle / kImagesDir;
    if (fs::is_directory(images, ec)) {
        for (const auto& entry : fs::directory_iterator(images, ec)) {
            const std::string name = entry.path().filename().string();
            const bool stale_tmp = name.rfind('.', 0) == 0;
            if (stale_tmp || !std::binary_search(refs.begin(), refs.end(), name)) {
                fs::remove(entry.path(), ec);
            }
        }
    }
    return bundle;
}

Story load_story(const fs::path& bundle) {
    const fs::path file = bundle / kStoryFile;
    if (!fs::is_regular_file(file)) {
        throw Error(ErrorCode::IoFailure, fmt::format("no story file at {}", file.string()));
    }
    const std::string text = read_file(file);
    Story story;
    try {
        story = serial::parse_story(text);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::UnsupportedSchema) throw;
        throw Error(ErrorCode::CorruptBundle, fmt::format("{}: {}", file.string(), e.what()));
    }
    if (auto problems = story::violations(story); !problems.empty()) {
        throw Error(ErrorCode::CorruptBundle, fmt::format("{}: {}", file.string(), problems.front()));
    }
    for (const auto& ref : image_refs(story)) {
        if (!has_image(bundle, ref)) {
            throw Error(ErrorCode::CorruptBundle, fmt::format("dangling image ref {}", ref));
        }
    }
    return story;
}

BundleReport validate_bundle(const fs::path& bundle) {
    BundleReport report{bundle, {}};
    auto& v = report.violations;
    const fs::path file = bundle / kStoryFile;
    if (!fs::is_directory(bundle)) {
        v.push_back(fmt::format("bundle directory {} does not exist", bundle.string()));
        return report;
    }
    if (!fs::is_regular_file(file)) {
        v.push_back(fmt::format("missing {}", kStoryFile));
        return report;
    }
    Story story;
    try {
        story = serial::parse_story(read_file(file));
    } catch (const Error& e) {
        v.push_back(fmt::format("parse: {}", e.what()));
        return report;
    }
    for (auto& p : story::violations(story)) v.push_back(std::move(p));
    for (const auto& scene : story.scenes) {
        for (const auto& g : scene.generations) {
            if (!valid_ref(g.image_ref)) {
                v.push_back(fmt::format("scene {} generation {}: image ref '{}' is not a sha256 digest",
                                        scene.id, g.id, g.image_ref));
            } else if (!has_image(bundle, g.image_ref)) {
                v.push_back(fmt::format("scene {} generation {}: dangling image ref {}", scene.id, g.id,
                                        g.image_ref));
            }
        }
    }
    for (const auto& ref : image_refs(story)) {
        if (auto bytes = read_image(bundle, ref); bytes && sha256_hex(*bytes) != ref) {
            v.push_back(fmt::format("image {} does not match its content hash", ref));
        }
    }
    return report;
}

PlaybackManifest export_playback(const Story& story) {
    PlaybackManifest m{story.id, story.title, {}};
    std::vector<const Scene*> ordered;
    for (const auto& s : story.scenes) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Scene* a, const Scene* b) { return a->position < b->position; });
    for (const Scene* s : ordered) {
        PlaybackFrame f;
        f.scene_id = s->id;
        f.position = s->position;
        f.kind = s->kind;
        f.bubble = story::bubble_shape(*s);
        f.text = s->text;
        if (s->kind == SceneKind::Metaphorical) {
            if (s->metaphor && !trim(s->metaphor->metaphor_concept).empty()) {
                f.title = fmt::format("{} {} - {}", join_adjectives(s->metaphor->adjectives),
                                      s->metaphor->affective_element, s->metaphor->metaphor_concept);
            }
            if (const Depiction* d = s->depiction()) f.depiction = d->text;
            const GenerationRecord* g =
                s->displayed_generation ? s->find_generation(*s->displayed_generation) : nullptr;
            if (g != nullptr) {
                f.image_ref = g->image_ref;
            } else {
                f.missing_image = true;
            }
            if (auto filter = s->filter()) f.filter_color = filter->color.hex();
        }
        m.frames.push_back(std::move(f));
    }
    return m;
}

nlohmann::json to_json(const PlaybackManifest& manifest) {
    auto opt = [](const std::optional<std::string>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : manifest.frames) {
        frames.push_back({
            {"scene_id", f.scene_id},
            {"position", f.position},
            {"kind", to_string(f.kind)},
            {"bubble", to_string(f.bubble)},
            {"text", f.text},
            {"title", opt(f.title)},
            {"depiction", opt(f.depiction)},
            {"image_ref", opt(f.image_ref)},
            {"filter_color", opt(f.filter_color)},
            {"missing_image", f.missing_image},
        });
    }
    return {{"story_id", manifest.story_id}, {"title", manifest.title}, {"frames", std::move(frames)}};
}

void write_playback(const fs::path& path, const PlaybackManifest& manifest) {
    write_file_atomic(path, to_json(manifest).dump(2) + "\n");
}

StoryStore::StoryStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
    std::error_code ec;
    fs::create_directories(data_dir_ / "stories", ec);
    if (ec) {
        throw Error(ErrorCode::IoFailure,
                    fmt::format("cannot create data directory {}: {}", data_dir_.string(), ec.message()));
    }
}

fs::path StoryStore::bundle_dir(std::string_view story_id) const {
    if (!valid_story_id(story_id)) {
        throw Error(ErrorCode::InvalidRequest, fmt::format("'{}' is not a valid story id", story_id));
    }
    return data_dir_ / "stories" / std::string(story_id);
}

std::vector<std::string> StoryStore::list_ids() const {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(data_dir_ / "stories", ec)) {
        const std::string name = entry.path().filename().string();
        if (valid_story_id(name) && fs::is_regular_file(entry.path() / kStoryFile)) ids.push_back(name);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool StoryStore::exists(std::string_view story_id) const {
    return valid_story_id(story_id) && fs::is_regular_file(bundle_dir(story_id) / kStoryFile);
}

fs::path StoryStore::save(const Story& story, const std::map<std::string, std::string>& pending_images) {
    return save_story(bundle_dir(story.id), story, pending_images);
}

Story StoryStore::load(std::string_view story_id) const {
    if (!exists(story_id)) {
        throw Error(ErrorCode::UnknownStory, fmt::format("no story with id '{}'", story_id));
    }
    return load_story(bundle_dir(story_id));
}

std::optional<std::string> StoryStore::find_image(std::string_view ref) const {
    if (!valid_ref(ref)) return std::nullopt;
    for (const auto& id : list_ids()) {
        if (auto bytes = read_image(bundle_dir(id), ref)) return bytes;
    }
    return std::nullopt;
}

}  // namespace dreamloom::store
