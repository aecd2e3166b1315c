#include "dreamloom/seed_demo.hpp"

#include "dreamloom/error.hpp"

namespace dreamloom {

namespace {

constexpr const char* kTitle = "Lanterns at Low Tide";

constexpr const char* kOpening =
    "I was back in my home town for a wedding, walking along the harbour wall while the "
    "evening ferry pulled away. Someone called my name from the pier.";

constexpr const char* kFirst =
    "It was the person I had a crush on when I was fifteen. Without a word they reached out "
    "and took both my hands, and we stood there while the sun went down over the beach.";

constexpr const char* kSecond =
    "Then we were hugging and kissing as if no time had passed at all, but a voice in the "
    "back of my head kept asking what I was doing.";

constexpr const char* kEnding =
    "The tide came in around our ankles and I woke up before either of us said anything. "
    "My phone was buzzing on the nightstand.";

}  // namespace

DemoSeed seed_demo_story(Studio& studio) {
    const Story story = studio.create_story(kTitle);

    studio.add_scene(story.id, {SceneKind::Literal, std::nullopt, kOpening, std::nullopt});

    MetaphorSpec first;
    first.affective_element = "old crush holding my hands";
    first.adjectives = {"exciting"};
    first.meaning_type = MeaningType::Connection;
    first.visual_structure = VisualStructure::Fusion;
    first.extra_prompt = "sunset on the beach";
    Scene s1 = studio.add_scene(story.id, {SceneKind::Metaphorical, std::nullopt, kFirst, first});
    const auto suggestions = studio.request_suggestions(s1.id, first.meaning_type, kDefaultSuggestionCount);
    first.metaphor_concept = suggestions.front().phrase;
    studio.update_scene(s1.id, {std::nullopt, first});
    const GenerationRecord g1 = studio.request_generation(s1.id);
    studio.finalize_acceptance(s1.id, g1.id);

    MetaphorSpec second;
    second.affective_element = "hugging and kissing";
    second.adjectives = {"thrilling", "worrying"};
    second.meaning_type = MeaningType::Similarity;
    second.visual_structure = VisualStructure::Juxtaposition;
    Scene s2 = studio.add_scene(story.id, {SceneKind::Metaphorical, std::nullopt, kSecond, second});
    const auto more = studio.request_suggestions(s2.id, second.meaning_type, kDefaultSuggestionCount);
    second.metaphor_concept = more.front().phrase;
    studio.update_scene(s2.id, {std::nullopt, second});
    const GenerationRecord g2 = studio.request_generation(s2.id);
    studio.finalize_acceptance(s2.id, g2.id);

    studio.add_scene(story.id, {SceneKind::Literal, std::nullopt, kEnding, std::nullopt});
    return {story.id, studio.bundle_dir(story.id)};
}

DemoSeed seed_demo(const std::filesystem::path& data_dir, const PromptTemplates& templates) {
    ProviderConfig config;
    config.chat_mode = ProviderMode::Mock;
    config.image_mode = ProviderMode::Mock;
    Studio studio(data_dir, make_providers(config), templates, config);
    return seed_demo_story(studio);
}

}  // namespace dreamloom
