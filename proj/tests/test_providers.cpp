#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "dreamloom/error.hpp"
#include "dreamloom/palette.hpp"
#include "dreamloom/providers.hpp"
#include "dreamloom/util.hpp"
#include "test_support.hpp"

using namespace dreamloom;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Internal;
}

ProviderConfig live_config() {
    ProviderConfig c;
    c.chat_mode = ProviderMode::Live;
    c.image_mode = ProviderMode::Live;
    c.chat_base_url = "http://chat.test/v1";
    c.chat_api_key = "sk-test";
    c.chat_model = "test-model";
    c.image_base_url = "http://image.test";
    c.backoff_initial = 1ms;
    c.deadline = 5s;
    return c;
}

HttpResponse chat_ok(const std::string& content) {
    json body = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
    return {200, {{"Content-Type", "application/json"}}, body.dump()};
}

std::string png_of(int w, int h) {
    return encode_png(dltest::solid_image(w, h, {10, 20, 30}));
}

// Answers chat and image endpoints the way a well-behaved service would.
HttpResponse happy_service(const HttpRequest& req, std::chrono::milliseconds) {
    if (req.url.find("/chat/completions") != std::string::npos) return chat_ok("1. Electric Sparks");
    const json body = json::parse(req.body);
    return {200, {{"Content-Type", "image/png"}}, png_of(body.at("width"), body.at("height"))};
}

PromptText prompt(const std::string& body, const std::string& preamble = "") {
    PromptText p;
    p.role_preamble = preamble;
    p.body = body;
    p.full = preamble.empty() ? body : preamble + "\n\n" + body;
    return p;
}

}  // namespace

TEST(ProviderConfig, Defaults) {
    const ProviderConfig c;
    EXPECT_EQ(c.chat_mode, ProviderMode::Mock);
    EXPECT_EQ(c.image_width, 512);
    EXPECT_EQ(c.image_height, 512);
    EXPECT_EQ(c.image_steps, 30);
    EXPECT_EQ(c.suggestion_temperature, 1.0);
    EXPECT_EQ(c.depiction_temperature, 0.7);
}

TEST(ProviderConfig, FromEnv) {
    const std::map<std::string, std::string> env = {
        {"MM_PROVIDER_MODE", "live"},
        {"MM_IMAGE_PROVIDER_MODE", "mock"},
        {"MM_CHAT_API_KEY", "k"},
        {"MM_CHAT_MODEL", "m"},
        {"MM_IMAGE_BASE_URL", "http://img:7860"},
        {"MM_REQUEST_DEADLINE_SECS", "2.5"},
        {"MM_IMAGE_GUIDANCE_SCALE", "7.5"},
        {"MM_IMAGE_SAMPLER", "euler"},
    };
    const auto lookup = [&](std::string_view n) -> std::optional<std::string> {
        auto it = env.find(std::string(n));
        if (it == env.end()) return std::nullopt;
        return it->second;
    };
    const ProviderConfig c = ProviderConfig::from_env(lookup);
    EXPECT_EQ(c.chat_mode, ProviderMode::Live);
    EXPECT_EQ(c.image_mode, ProviderMode::Mock);
    EXPECT_EQ(c.chat_api_key, "k");
    EXPECT_EQ(c.chat_model, "m");
    EXPECT_EQ(c.image_base_url, "http://img:7860");
    EXPECT_EQ(c.deadline, 2500ms);
    EXPECT_EQ(c.guidance_scale.value(), 7.5);
    EXPECT_EQ(c.sampler.value(), "euler");
    EXPECT_FALSE(c.negative_prompt.has_value());

    const auto bad = [](std::string key, std::string value) {
        return [key, value](std::string_view n) -> std::optional<std::string> {
            if (n == key) return value;
            return std::nullopt;
        };
    };
    EXPECT_EQ(code_of([&] { ProviderConfig::from_env(bad("MM_PROVIDER_MODE", "remote")); }), ErrorCode::InvalidRequest);
    EXPECT_EQ(code_of([&] { ProviderConfig::from_env(bad("MM_REQUEST_DEADLINE_SECS", "0")); }), ErrorCode::InvalidRequest);
    EXPECT_EQ(code_of([&] { ProviderConfig::from_env(bad("MM_REQUEST_DEADLINE_SECS", "5s")); }), ErrorCode::InvalidRequest);
}

TEST(ProviderMode, Parse) {
    EXPECT_EQ(parse_provider_mode("live"), ProviderMode::Live);
    EXPECT_EQ(parse_provider_mode("MOCK"), ProviderMode::Mock);
    EXPECT_EQ(code_of([] { parse_provider_mode("x"); }), ErrorCode::InvalidRequest);
}

TEST(LiveChat, RequestCarriesPurposeTemperature) {
    const ProviderConfig config = live_config();
    auto transport = std::make_shared<RecordingTransport>(happy_service);
    LiveChatProvider chat(config, transport);

    EXPECT_EQ(chat.chat_complete(make_chat_request(config, prompt("body", "pre"), ChatPurpose::Suggestion)),
              "1. Electric Sparks");
    chat.chat_complete(make_chat_request(config, prompt("body2"), ChatPurpose::Depiction));
    const auto reqs = transport->requests();
    ASSERT_EQ(reqs.size(), 2u);

    EXPECT_EQ(reqs[0].method, "POST");
    EXPECT_EQ(reqs[0].url, "http://chat.test/v1/chat/completions");
    EXPECT_EQ(reqs[0].header("Authorization"), "Bearer sk-test");
    const json s = json::parse(reqs[0].body);
    EXPECT_EQ(s.at("temperature").get<double>(), 1.0);
    EXPECT_EQ(s.at("max_tokens").get<int>(), config.suggestion_max_tokens);
    EXPECT_EQ(s.at("model"), "test-model");
    ASSERT_EQ(s.at("messages").size(), 2u);
    EXPECT_EQ(s["messages"][0]["role"], "system");
    EXPECT_EQ(s["messages"][0]["content"], "pre");
    EXPECT_EQ(s["messages"][1]["role"], "user");
    EXPECT_EQ(s["messages"][1]["content"], "body");

    const json d = json::parse(reqs[1].body);
    EXPECT_EQ(d.at("temperature").get<double>(), 0.7);
    EXPECT_EQ(d.at("max_tokens").get<int>(), config.depiction_max_tokens);
    ASSERT_EQ(d.at("messages").size(), 1u);
}

TEST(LiveChat, ConfiguredTemperatureOverrides) {
    ProviderConfig config = live_config();
    config.suggestion_temperature = 0.2;
    EXPECT_EQ(make_chat_request(config, prompt("x"), ChatPurpose::Suggestion).temperature, 0.2);
    EXPECT_EQ(make_chat_request(config, prompt("x"), ChatPurpose::Depiction).temperature, 0.7);
}

TEST(LiveChat, RejectedIsNotRetried) {
    auto transport = std::make_shared<RecordingTransport>(
        [](const HttpRequest&, std::chrono::milliseconds) { return HttpResponse{401, {}, "bad key"}; });
    LiveChatProvider chat(live_config(), transport);
    EXPECT_EQ(code_of([&] { chat.chat_complete({prompt("x")}); }), ErrorCode::ProviderRejected);
    EXPECT_EQ(transport->request_count(), 1u);
}

TEST(LiveChat, ServerErrorsRetriedThenUnavailable) {
    ProviderConfig config = live_config();
    config.max_retries = 3;
    auto transport = std::make_shared<RecordingTransport>(
        [](const HttpRequest&, std::chrono::milliseconds) { return HttpResponse{503, {}, "busy"}; });
    LiveChatProvider chat(config, transport);
    EXPECT_EQ(code_of([&] { chat.chat_complete({prompt("x")}); }), ErrorCode::Unavailable);
    EXPECT_EQ(transport->request_count(), 4u);
}

TEST(LiveChat, RecoversAfterTransientFailure) {
    int n = 0;
    auto transport = std::make_shared<RecordingTransport>([&](const HttpRequest& r, std::chrono::milliseconds t) {
        if (++n == 1) return HttpResponse{429, {}, ""};
        return happy_service(r, t);
    });
    LiveChatProvider chat(live_config(), transport);
    EXPECT_EQ(chat.chat_complete({prompt("x")}), "1. Electric Sparks");
    EXPECT_EQ(transport->request_count(), 2u);
}

TEST(LiveChat, TransportTimeoutsBecomeProviderTimeout) {
    auto transport = std::make_shared<RecordingTransport>(
        [](const HttpRequest&, std::chrono::milliseconds) -> HttpResponse { throw TransportError("read timeout", true); });
    LiveChatProvider chat(live_config(), transport);
    EXPECT_EQ(code_of([&] { chat.chat_complete({prompt("x")}); }), ErrorCode::ProviderTimeout);
    EXPECT_EQ(transport->request_count(), 3u);
}

TEST(LiveChat, DeadlineBoundsTheWholeCall) {
    ProviderConfig config = live_config();
    config.deadline = 50ms;
    config.max_retries = 100;
    config.backoff_initial = 20ms;
    auto transport = std::make_shared<RecordingTransport>([](const HttpRequest&, std::chrono::milliseconds t) {
        EXPECT_LE(t, 50ms);
        return HttpResponse{500, {}, ""};
    });
    LiveChatProvider chat(config, transport);
    const auto start = std::chrono::steady_clock::now();
    EXPECT_EQ(code_of([&] { chat.chat_complete({prompt("x")}); }), ErrorCode::ProviderTimeout);
    EXPECT_LT(std::chrono::steady_clock::now() - start, 1s);
}

TEST(LiveChat, MalformedBodyAndMissingKey) {
    auto transport = std::make_shared<RecordingTransport>(
        [](const HttpRequest&, std::chrono::milliseconds) { return HttpResponse{200, {}, "{\"nope\":1}"}; });
    LiveChatProvider chat(live_config(), transport);
    EXPECT_EQ(code_of([&] { chat.chat_complete({prompt("x")}); }), ErrorCode::ProviderRejected);

    ProviderConfig unset = live_config();
    unset.chat_api_key.clear();
    LiveChatProvider no_key(unset, transport);
    EXPECT_EQ(code_of([&] { no_key.chat_complete({prompt("x")}); }), ErrorCode::NotConfigured);
    EXPECT_EQ(no_key.health_check().state, HealthState::NotConfigured);
}

TEST(LiveImage, RequestParameters) {
    const ProviderConfig config = live_config();
    auto transport = std::make_shared<RecordingTransport>(happy_service);
    LiveImageProvider image(config, transport);
    const ImageResult r = image.generate_image(make_image_request(config, prompt("a fused form"), 42));
    EXPECT_EQ(r.image_ref, sha256_hex(r.bytes));
    EXPECT_EQ(r.provider_meta.at("attempts"), "1");
    const auto reqs = transport->requests();
    ASSERT_EQ(reqs.size(), 1u);
    EXPECT_EQ(reqs[0].url, "http://image.test/generate");
    const json body = json::parse(reqs[0].body);
    EXPECT_EQ(body.at("width"), 512);
    EXPECT_EQ(body.at("height"), 512);
    EXPECT_EQ(body.at("num_inference_steps"), 30);
    EXPECT_EQ(body.at("seed"), 42);
    EXPECT_EQ(body.at("prompt"), "a fused form");
    EXPECT_FALSE(body.contains("negative_prompt"));
    EXPECT_FALSE(body.contains("guidance_scale"));
}

TEST(LiveImage, OptionalKnobsForwarded) {
    ProviderConfig config = live_config();
    config.negative_prompt = "blurry";
    config.guidance_scale = 7.0;
    config.sampler = "ddim";
    LiveImageProvider image(config, std::make_shared<RecordingTransport>(happy_service));
    const json body = json::parse(image.request_body(make_image_request(config, prompt("p"))));
    EXPECT_EQ(body.at("negative_prompt"), "blurry");
    EXPECT_EQ(body.at("guidance_scale"), 7.0);
    EXPECT_EQ(body.at("sampler"), "ddim");
    EXPECT_FALSE(body.contains("seed"));
}

TEST(LiveImage, WrongDimensionsRejected) {
    auto transport = std::make_shared<RecordingTransport>([](const HttpRequest&, std::chrono::milliseconds) {
        return HttpResponse{200, {{"Content-Type", "image/png"}}, png_of(256, 256)};
    });
    const ProviderConfig config = live_config();
    LiveImageProvider image(config, transport);
    EXPECT_EQ(code_of([&] { image.generate_image(make_image_request(config, prompt("p"))); }),
              ErrorCode::BadImagePayload);
}

TEST(LiveImage, Base64JsonPayloads) {
    const ProviderConfig config = live_config();
    const std::string png = png_of(512, 512);
    for (const json& payload : {json{{"images", {base64_encode(png)}}},
                                json{{"image", "data:image/png;base64," + base64_encode(png)}},
                                json{{"data", {{{"b64_json", base64_encode(png)}}}}}}) {
        auto transport = std::make_shared<RecordingTransport>([&](const HttpRequest&, std::chrono::milliseconds) {
            return HttpResponse{200, {{"Content-Type", "application/json"}}, payload.dump()};
        });
        LiveImageProvider image(config, transport);
        const ImageResult r = image.generate_image(make_image_request(config, prompt("p")));
        EXPECT_EQ(r.bytes, png);
        EXPECT_EQ(r.image_ref, sha256_hex(png));
    }
}

TEST(LiveImage, GarbagePayloads) {
    const ProviderConfig config = live_config();
    for (const std::string body : {std::string("{\"images\":[\"!!!\"]}"), std::string("{\"other\":1}"),
                                   std::string("not json"), std::string("{\"image\":\"aGVsbG8=\"}")}) {
        auto transport = std::make_shared<RecordingTransport>([&](const HttpRequest&, std::chrono::milliseconds) {
            return HttpResponse{200, {{"Content-Type", "application/json"}}, body};
        });
        LiveImageProvider image(config, transport);
        EXPECT_EQ(code_of([&] { image.generate_image(make_image_request(config, prompt("p"))); }),
                  ErrorCode::BadImagePayload)
            << body;
    }
}

TEST(LiveImage, NotConfigured) {
    ProviderConfig config = live_config();
    config.image_base_url.clear();
    LiveImageProvider image(config, std::make_shared<RecordingTransport>(happy_service));
    EXPECT_EQ(code_of([&] { image.generate_image(make_image_request(config, prompt("p"))); }),
              ErrorCode::NotConfigured);
    EXPECT_EQ(image.health_check().state, HealthState::NotConfigured);
}

TEST(Health, MockIsReachable) {
    const Providers p = make_providers(ProviderConfig{});
    for (const auto& h : p.health_check()) {
        EXPECT_EQ(h.mode, ProviderMode::Mock);
        EXPECT_EQ(h.state, HealthState::Reachable);
    }
    EXPECT_EQ(p.health_check().size(), 2u);
}

TEST(Health, LiveProbes) {
    auto up = std::make_shared<RecordingTransport>([](const HttpRequest& r, std::chrono::milliseconds) {
        return HttpResponse{r.url.find("/models") != std::string::npos ? 200 : 404, {}, ""};
    });
    const Providers ok = make_providers(live_config(), up);
    for (const auto& h : ok.health_check()) EXPECT_EQ(h.state, HealthState::Reachable) << h.provider;
    const auto reqs = up->requests();
    ASSERT_EQ(reqs.size(), 2u);
    EXPECT_EQ(reqs[0].method, "GET");
    EXPECT_EQ(reqs[0].url, "http://chat.test/v1/models");

    auto down = std::make_shared<RecordingTransport>([](const HttpRequest&, std::chrono::milliseconds) -> HttpResponse {
        throw TransportError("connection refused", false);
    });
    for (const auto& h : make_providers(live_config(), down).health_check()) {
        EXPECT_EQ(h.state, HealthState::Degraded);
        EXPECT_NE(h.detail.find("connection refused"), std::string::npos);
    }
}

TEST(Health, UnreachableHostOverRealTransport) {
    ProviderConfig config = live_config();
    config.chat_base_url = "http://127.0.0.1:1/v1";
    config.image_base_url = "http://127.0.0.1:1";
    const Providers p = make_providers(config);
    for (const auto& h : p.health_check()) {
        EXPECT_EQ(h.state, HealthState::Degraded);
        EXPECT_FALSE(h.detail.empty());
    }
}

TEST(HttplibTransport, RejectsBadUrls) {
    EXPECT_THROW(parse_url("ftp://x"), std::invalid_argument);
    const ParsedUrl u = parse_url("https://api.example.com/v1");
    EXPECT_EQ(u.scheme, "https");
    EXPECT_EQ(u.port, 443);
    EXPECT_EQ(u.path, "/v1");
    const ParsedUrl v = parse_url("http://localhost:7860");
    EXPECT_EQ(v.port, 7860);
    EXPECT_EQ(v.path, "/");
}

TEST(MockChat, ScenarioFixtures) {
    const ProviderConfig config;
    MockChatProvider chat(config);
    MetaphorEngine engine;
    const auto s = parse_suggestions(chat.chat_complete(make_chat_request(
        config, engine.build_suggestion_prompt(dltest::scenario_spec_one(), MeaningType::Connection),
        ChatPurpose::Suggestion)));
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].phrase, "Electric Sparks");

    const std::string d = chat.chat_complete(make_chat_request(
        config, engine.build_depiction_prompt(dltest::scenario_spec_one()), ChatPurpose::Depiction));
    EXPECT_NE(d.find("electric sparks"), std::string::npos);

    const std::string fallback = chat.chat_complete({prompt("unrelated"), 1.0, 256, ChatPurpose::Suggestion});
    EXPECT_EQ(parse_suggestions(fallback).size(), 5u);
}

TEST(MockChat, FixtureFileAndErrors) {
    dltest::TempDir dir;
    const auto path = dir.path() / "fx.json";
    std::ofstream(path) << R"({"version":1,"fixtures":[{"purpose":"suggestion","match":["x"],"response":"garbage"}],)"
                           R"("defaults":{"suggestion":"s","depiction":"d"}})";
    ProviderConfig config;
    config.mock_fixtures = path;
    MockChatProvider chat(config);
    EXPECT_EQ(chat.chat_complete({prompt("has x")}), "garbage");
    EXPECT_EQ(chat.chat_complete({prompt("other")}), "s");
    EXPECT_EQ(code_of([] { MockChatProvider::parse_fixtures("{\"version\":2}"); }), ErrorCode::InvalidTemplate);
    EXPECT_EQ(code_of([] { MockChatProvider::parse_fixtures("nope"); }), ErrorCode::InvalidTemplate);
}

TEST(MockChat, LatencyBeyondDeadlineTimesOut) {
    MockChatProvider chat({}, {{ChatPurpose::Suggestion, "1. a"}, {ChatPurpose::Depiction, "d"}}, 50ms, 1ms);
    EXPECT_EQ(code_of([&] { chat.chat_complete({prompt("x")}); }), ErrorCode::ProviderTimeout);
    MockChatProvider quick({}, {{ChatPurpose::Suggestion, "1. a"}, {ChatPurpose::Depiction, "d"}}, 1ms, 1s);
    EXPECT_EQ(quick.chat_complete({prompt("x")}), "1. a");
}

TEST(MockImage, DeterministicAndSized) {
    const ProviderConfig config;
    MockImageProvider image(config);
    const ImageRequest req = make_image_request(config, prompt("a fused form"));
    const ImageResult a = image.generate_image(req);
    const ImageResult b = image.generate_image(req);
    EXPECT_EQ(a.bytes, b.bytes);
    EXPECT_EQ(a.image_ref, sha256_hex(a.bytes));
    const RgbImage decoded = decode_image(a.bytes);
    EXPECT_EQ(decoded.width, 512);
    EXPECT_EQ(decoded.height, 512);
    const ImageResult c = image.generate_image(make_image_request(config, prompt("a fused form"), 7));
    EXPECT_NE(a.image_ref, c.image_ref);
    const ImageResult d = image.generate_image(make_image_request(config, prompt("another form")));
    EXPECT_NE(a.image_ref, d.image_ref);
}

TEST(MockImage, TimeoutWhenSlowerThanDeadline) {
    ProviderConfig config;
    config.mock_latency = 50ms;
    config.deadline = 1ms;
    MockImageProvider image(config);
    EXPECT_EQ(code_of([&] { image.generate_image(make_image_request(config, prompt("p"))); }),
              ErrorCode::ProviderTimeout);
}

TEST(MockImage, BandPlanIsWellFormed) {
    for (int i = 0; i < 200; ++i) {
        ImageRequest req;
        req.prompt = prompt("prompt " + std::to_string(i));
        req.width = 64 + i;
        req.height = 40 + 3 * i;
        const auto bands = MockImageProvider::plan_bands(req);
        ASSERT_GE(bands.size(), 2u);
        ASSERT_LE(bands.size(), 4u);
        int rows = 0;
        for (std::size_t j = 0; j < bands.size(); ++j) {
            EXPECT_GT(bands[j].rows, 0);
            rows += bands[j].rows;
            for (std::size_t k = j + 1; k < bands.size(); ++k) EXPECT_NE(bands[j].color, bands[k].color);
        }
        EXPECT_EQ(rows, req.height);
    }
}

TEST(ConcurrencyGate, WaitsUntilDeadline) {
    ConcurrencyGate gate(1);
    auto held = gate.acquire(std::chrono::steady_clock::now() + 1s);
    EXPECT_EQ(code_of([&] { gate.acquire(std::chrono::steady_clock::now() + 20ms); }), ErrorCode::ProviderTimeout);
    {
        auto moved = std::move(held);
    }
    EXPECT_NO_THROW(gate.acquire(std::chrono::steady_clock::now() + 20ms));
}
