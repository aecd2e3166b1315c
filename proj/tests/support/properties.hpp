#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dltest {

// Outcome of one randomized suite. Every suite runs at least kMinCases
// independent cases from a fixed seed and stops collecting after the
// first few failures.
struct PropertyReport {
    std::string name;
    std::size_t cases = 0;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::vector<std::string> samples;  // first failures, for diagnostics

    bool passed() const { return failures == 0 && cases > 0; }
    void fail(std::string what);
};

inline constexpr std::size_t kMinCases = 1000;

// story_core: append-only histories, displayed record inside history,
// literal scenes never carry metaphor data, contiguous positions, failed
// operations leave the story untouched.
PropertyReport story_invariants(std::uint64_t seed, std::size_t cases = kMinCases);

// layout: anchors strictly increasing in scene order after any accepted
// move/resize/insert/delete; rejections agree with an independent oracle.
PropertyReport layout_monotonicity(std::uint64_t seed, std::size_t cases = kMinCases);

// store: load(save(s)) == s for randomized valid stories.
PropertyReport store_round_trip(std::uint64_t seed, const std::filesystem::path& scratch,
                                std::size_t cases = kMinCases);

// Studio with providers failing at random: every operation either fails
// without changing the story or commits a valid one, and disk matches memory.
PropertyReport faulty_orchestration(std::uint64_t seed, const std::filesystem::path& scratch,
                                    std::size_t cases = kMinCases);

// parse_suggestions(render_numbered_list(xs)) recovers xs.
PropertyReport suggestion_round_trip(std::uint64_t seed, std::size_t cases = kMinCases);

// Built prompts contain the metaphor's phrases verbatim.
PropertyReport prompt_containment(std::uint64_t seed, std::size_t cases = kMinCases);

// Palette weights sum to 1, stay ordered and within k; shuffling the pixels
// of an image small enough to skip downsampling changes nothing.
PropertyReport palette_conservation(std::uint64_t seed, std::size_t cases = kMinCases);

}  // namespace dltest
