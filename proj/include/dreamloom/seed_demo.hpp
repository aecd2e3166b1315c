#pragma once

#include <filesystem>
#include <string>

#include "dreamloom/metaphor.hpp"
#include "dreamloom/studio.hpp"

namespace dreamloom {

struct DemoSeed {
    std::string story_id;
    std::filesystem::path bundle;
};

/// Builds the four-scene demo story (literal opening, two metaphorical
/// scenes with accepted images, literal ending) through studio.
DemoSeed seed_demo_story(Studio& studio);

/// Same story under data_dir using mock providers regardless of environment.
/// Throws Error(IoFailure).
DemoSeed seed_demo(const std::filesystem::path& data_dir,
                   const PromptTemplates& templates = PromptTemplates::builtin());

}  // namespace dreamloom
