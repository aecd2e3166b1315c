#include "dreamloom/metaphor.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dreamloom/error.hpp"
#include "dreamloom/util.hpp"
#include "dreamloom_embedded.hpp"

namespace dreamloom {

namespace {

struct SectionRule {
    std::set<std::string, std::less<>> allowed;
    std::set<std::string, std::less<>> required;
};

const std::map<std::string, SectionRule, std::less<>>& section_rules() {
    static const std::map<std::string, SectionRule, std::less<>> rules = {
        {"suggestion.preamble", {{}, {}}},
        {"suggestion.body",
         {{"affective_element", "adjectives", "relation", "count"},
          {"affective_element", "adjectives", "relation", "count"}}},
        {"relation.connection", {{}, {}}},
        {"relation.similarity", {{}, {}}},
        {"relation.opposition", {{}, {}}},
        {"image.body",
         {{"affective_element", "adjectives", "concept", "relation", "structure_directive"},
          {"affective_element", "concept", "relation", "structure_directive"}}},
        {"image.extra", {{"extra"}, {"extra"}}},
        {"structure.juxtaposition", {{"affective_element", "concept"}, {}}},
        {"structure.fusion", {{"affective_element", "concept"}, {}}},
        {"structure.replacement", {{"affective_element", "concept"}, {}}},
        {"depiction.preamble", {{}, {}}},
        {"depiction.body",
         {{"affective_element", "adjectives", "concept"},
          {"affective_element", "adjectives", "concept"}}},
    };
    return rules;
}

bool is_placeholder_char(char c) {
    return (c >= 'a' && c <= 'z') || c == '_';
}

// Calls on_placeholder(name) for every {name}; returns the text with each
// placeholder replaced by the callback's result. Substituted values are
// never re-scanned.
template <typename Fn>
std::string expand(std::string_view text, Fn&& on_placeholder) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_placeholder_char(text[j])) ++j;
            if (j < text.size() && text[j] == '}' && j > i + 1) {
                out += on_placeholder(text.substr(i + 1, j - i - 1));
                i = j + 1;
                continue;
            }
        }
        out += text[i++];
    }
    return out;
}

std::string render(std::string_view text, const std::map<std::string, std::string, std::less<>>& values) {
    return expand(text, [&](std::string_view name) -> std::string {
        auto it = values.find(name);
        if (it == values.end()) {
            throw Error(ErrorCode::InvalidTemplate, fmt::format("no value for {{{}}}", name));
        }
        return it->second;
    });
}

PromptText make_prompt(std::string preamble, std::string body) {
    PromptText p;
    p.full = preamble.empty() ? body : preamble + "\n\n" + body;
    p.role_preamble = std::move(preamble);
    p.body = std::move(body);
    return p;
}

std::string_view meaning_key(MeaningType m) {
    switch (m) {
    case MeaningType::Connection: return "relation.connection";
    case MeaningType::Similarity: return "relation.similarity";
    case MeaningType::Opposition: return "relation.opposition";
    }
    return "relation.connection";
}

std::string_view structure_key(VisualStructure v) {
    switch (v) {
    case VisualStructure::Juxtaposition: return "structure.juxtaposition";
    case VisualStructure::Fusion: return "structure.fusion";
    case VisualStructure::Replacement: return "structure.replacement";
    }
    return "structure.fusion";
}

std::size_t word_count(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::size_t n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

// Strips wrapping quotes/emphasis and trailing punctuation, repeatedly.
std::string clean_phrase(std::string_view text) {
    static const std::vector<std::string_view> wrappers = {
        "\"", "'", "*", "_", "`", "“", "”", "‘", "’"};
    static const std::string_view trailing = ".,;:!?";
    std::string s{trim(text)};
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        for (std::string_view w : wrappers) {
            if (s.size() >= w.size() && s.compare(0, w.size(), w) == 0) {
                s.erase(0, w.size());
                changed = true;
            }
            if (s.size() >= w.size() && s.compare(s.size() - w.size(), w.size(), w) == 0) {
                s.erase(s.size() - w.size());
                changed = true;
            }
        }
        while (!s.empty() && trailing.find(s.back()) != std::string_view::npos) {
            s.pop_back();
            changed = true;
        }
        const std::string t{trim(s)};
        if (t.size() != s.size()) changed = true;
        s = t;
    }
    return s;
}

}  // namespace

PromptTemplates PromptTemplates::parse(std::string_view text) {
    PromptTemplates t;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string current;
    std::vector<std::string> lines;
    bool seen_version = false;

    const auto flush = [&] {
        if (current.empty()) return;
        while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
        std::size_t first = 0;
        while (first < lines.size() && trim(lines[first]).empty()) ++first;
        std::string body;
        for (std::size_t i = first; i < lines.size(); ++i) {
            if (i > first) body += '\n';
            body += lines[i];
        }
        t.sections_[current] = body;
        lines.clear();
    };

    static const std::regex header{R"(^\[([a-z_]+\.[a-z_]+)\]\s*$)"};
    static const std::regex version_line{R"(^version\s*=\s*(\d+)\s*$)"};
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, header)) {
            flush();
            current = m[1];
            if (!section_rules().contains(current)) {
                throw Error(ErrorCode::InvalidTemplate, fmt::format("unknown section [{}]", current));
            }
            if (t.sections_.contains(current)) {
                throw Error(ErrorCode::InvalidTemplate, fmt::format("duplicate section [{}]", current));
            }
            continue;
        }
        if (!current.empty()) {
            lines.push_back(line);
            continue;
        }
        const std::string_view bare = trim(line);
        if (bare.empty() || bare.front() == '#') continue;
        if (std::regex_match(line, m, version_line) && !seen_version) {
            t.version_ = std::stoi(m[1]);
            seen_version = true;
            continue;
        }
        throw Error(ErrorCode::InvalidTemplate, fmt::format("unexpected line '{}'", line));
    }
    flush();

    if (!seen_version) {
        throw Error(ErrorCode::InvalidTemplate, "template file has no version line");
    }
    if (t.version_ != kSupportedVersion) {
        throw Error(ErrorCode::InvalidTemplate,
                    fmt::format("template version {} is not supported (expected {})", t.version_,
                                kSupportedVersion));
    }
    for (const auto& [name, rule] : section_rules()) {
        auto it = t.sections_.find(name);
        if (it == t.sections_.end() || trim(it->second).empty()) {
            throw Error(ErrorCode::InvalidTemplate, fmt::format("section [{}] is missing or empty", name));
        }
        std::set<std::string, std::less<>> used;
        expand(it->second, [&](std::string_view ph) {
            used.emplace(ph);
            return std::string{};
        });
        for (const auto& ph : used) {
            if (!rule.allowed.contains(ph)) {
                throw Error(ErrorCode::InvalidTemplate,
                            fmt::format("placeholder {{{}}} is not allowed in [{}]", ph, name));
            }
        }
        for (const auto& ph : rule.required) {
            if (!used.contains(ph)) {
                throw Error(ErrorCode::InvalidTemplate,
                            fmt::format("section [{}] must use {{{}}}", name, ph));
            }
        }
    }
    return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, fmt::format("cannot read templates from {}", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const PromptTemplates& PromptTemplates::builtin() {
    static const PromptTemplates t = parse(embedded::kPromptTemplates);
    return t;
}

const std::string& PromptTemplates::section(std::string_view name) const {
    auto it = sections_.find(name);
    if (it == sections_.end()) {
        throw Error(ErrorCode::InvalidTemplate, fmt::format("no section [{}]", name));
    }
    return it->second;
}

std::string join_adjectives(const std::vector<std::string>& adjectives) {
    std::string out;
    for (std::size_t i = 0; i < adjectives.size(); ++i) {
        if (i > 0) out += ", ";
        out += adjectives[i];
    }
    return out;
}

std::string_view MetaphorEngine::relation_phrase(MeaningType meaning_type) const {
    return templates_.section(meaning_key(meaning_type));
}

PromptText MetaphorEngine::build_suggestion_prompt(const MetaphorSpec& spec, MeaningType meaning_type,
                                                   std::size_t n) const {
    if (!spec.articulated()) {
        throw Error(ErrorCode::InvalidSpec, "suggestions need an affective element and adjectives");
    }
    if (n == 0) {
        throw Error(ErrorCode::InvalidSpec, "suggestion count must be at least 1");
    }
    const std::map<std::string, std::string, std::less<>> values = {
        {"affective_element", spec.affective_element},
        {"adjectives", join_adjectives(spec.adjectives)},
        {"relation", std::string(relation_phrase(meaning_type))},
        {"count", std::to_string(n)},
    };
    return make_prompt(templates_.section("suggestion.preamble"),
                       render(templates_.section("suggestion.body"), values));
}

PromptText MetaphorEngine::build_image_prompt(const MetaphorSpec& spec) const {
    if (!spec.complete()) {
        throw Error(ErrorCode::InvalidSpec,
                    "image prompts need an affective element, adjectives and a metaphor concept");
    }
    std::map<std::string, std::string, std::less<>> values = {
        {"affective_element", spec.affective_element},
        {"adjectives", join_adjectives(spec.adjectives)},
        {"concept", spec.metaphor_concept},
        {"relation", std::string(relation_phrase(spec.meaning_type))},
    };
    values["structure_directive"] = render(templates_.section(structure_key(spec.visual_structure)), values);
    std::string body = render(templates_.section("image.body"), values);
    if (spec.extra_prompt && !trim(*spec.extra_prompt).empty()) {
        body += ' ';
        body += render(templates_.section("image.extra"), {{"extra", std::string(trim(*spec.extra_prompt))}});
    }
    return make_prompt({}, std::move(body));
}

PromptText MetaphorEngine::build_depiction_prompt(const MetaphorSpec& spec) const {
    if (!spec.complete()) {
        throw Error(ErrorCode::InvalidSpec,
                    "depictions need an affective element, adjectives and a metaphor concept");
    }
    const std::map<std::string, std::string, std::less<>> values = {
        {"affective_element", spec.affective_element},
        {"adjectives", join_adjectives(spec.adjectives)},
        {"concept", spec.metaphor_concept},
    };
    return make_prompt(templates_.section("depiction.preamble"),
                       render(templates_.section("depiction.body"), values));
}

std::vector<MetaphorSuggestion> parse_suggestions(std::string_view response_text) {
    static const std::regex item{R"(^\s*(?:\d+\s*[.)]|[-*+]|\xE2\x80\xA2)\s+(.*)$)"};
    static const std::vector<std::string_view> separators = {
        " - ", " – ", " — ", ": "};

    std::vector<MetaphorSuggestion> out;
    bool any_item = false;
    std::istringstream in{std::string(response_text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (!std::regex_match(line, m, item)) continue;
        any_item = true;
        std::string content = m[1];
        std::optional<std::string> rationale;
        std::size_t cut = std::string::npos;
        std::size_t cut_len = 0;
        for (std::string_view sep : separators) {
            const std::size_t at = content.find(sep);
            if (at != std::string::npos && at < cut) {
                cut = at;
                cut_len = sep.size();
            }
        }
        if (cut != std::string::npos) {
            std::string tail = std::string(trim(content.substr(cut + cut_len)));
            if (!tail.empty()) rationale = tail;
            content.resize(cut);
        }
        std::string phrase = clean_phrase(content);
        if (phrase.empty() || word_count(phrase) > kMaxConceptWords) continue;
        out.push_back({std::move(phrase), std::move(rationale)});
    }
    if (!any_item || out.empty()) {
        throw Error(ErrorCode::UnparseableResponse, "no metaphor list items in the response");
    }
    return out;
}

std::string render_numbered_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += fmt::format("{}. {}\n", i + 1, items[i]);
    }
    return out;
}

}  // namespace dreamloom
