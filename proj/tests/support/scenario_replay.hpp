#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dltest {

struct ReplayResult {
    bool ok = false;
    std::string failure;  // first failed check, empty when ok
    std::string story_id;
    std::filesystem::path bundle;
    nlohmann::json playback;
    std::vector<std::string> suggestions_first;   // concepts offered for scene 2
    std::vector<std::string> suggestions_second;  // concepts offered for scene 3
    std::chrono::milliseconds elapsed{0};
};

// Drives the dream scenario through the HTTP API of a mock-mode server
// bound to a free local port: literal opening, two metaphorical scenes
// (suggest, pick, generate, accept), literal ending, then playback.
ReplayResult replay_scenario_over_http(const std::filesystem::path& data_dir);

}  // namespace dltest
