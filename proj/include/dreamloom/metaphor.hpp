#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dreamloom/model.hpp"

namespace dreamloom {

struct PromptText {
    std::string role_preamble;
    std::string body;
    std::string full;  // preamble, blank line, body (or just body)

    friend bool operator==(const PromptText&, const PromptText&) = default;
};

struct MetaphorSuggestion {
    std::string phrase;
    std::optional<std::string> rationale;

    friend bool operator==(const MetaphorSuggestion&, const MetaphorSuggestion&) = default;
};

inline constexpr std::size_t kMaxConceptWords = 8;
inline constexpr std::size_t kDefaultSuggestionCount = 5;

// Versioned prompt wording loaded from a template file. Sections and the
// placeholders they may reference are fixed; anything else is rejected at
// load time so a built prompt always contains the metaphor's phrases.
class PromptTemplates {
public:
    static constexpr int kSupportedVersion = 1;

    /// Throws Error(InvalidTemplate).
    static PromptTemplates parse(std::string_view text);
    /// Throws Error(IoFailure | InvalidTemplate).
    static PromptTemplates load(const std::filesystem::path& path);
    /// The copy of templates/prompts.txt compiled into the library.
    static const PromptTemplates& builtin();

    int version() const noexcept { return version_; }
    const std::string& section(std::string_view name) const;

private:
    int version_ = 0;
    std::map<std::string, std::string, std::less<>> sections_;
};

/// Adjectives joined with ", " in the order given.
std::string join_adjectives(const std::vector<std::string>& adjectives);

class MetaphorEngine {
public:
    explicit MetaphorEngine(PromptTemplates templates = PromptTemplates::builtin())
        : templates_(std::move(templates)) {}

    /// Needs an articulated spec and n >= 1. Throws Error(InvalidSpec).
    PromptText build_suggestion_prompt(const MetaphorSpec& spec, MeaningType meaning_type,
                                       std::size_t n = kDefaultSuggestionCount) const;

    /// Needs a complete spec (concept chosen). Throws Error(InvalidSpec).
    PromptText build_image_prompt(const MetaphorSpec& spec) const;

    /// Needs a complete spec. Throws Error(InvalidSpec).
    PromptText build_depiction_prompt(const MetaphorSpec& spec) const;

    std::string_view relation_phrase(MeaningType meaning_type) const;

    const PromptTemplates& templates() const noexcept { return templates_; }

private:
    PromptTemplates templates_;
};

/// Extracts list items in order. Numbering, bullets, quotes and trailing
/// punctuation are stripped; a " - " or ": " tail becomes the rationale.
/// Items that end up empty or longer than kMaxConceptWords are dropped.
/// Throws Error(UnparseableResponse) when nothing usable remains.
std::vector<MetaphorSuggestion> parse_suggestions(std::string_view response_text);

/// "1. first\n2. second\n..." -- the inverse of parse_suggestions for
/// plain phrases.
std::string render_numbered_list(const std::vector<std::string>& items);

}  // namespace dreamloom
