#include <gtest/gtest.h>

#include <future>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dreamloom/api_server.hpp"
#include "dreamloom/cli.hpp"
#include "dreamloom/serialization.hpp"
#include "dreamloom/util.hpp"
#include "scenario_replay.hpp"
#include "test_support.hpp"

namespace dltest {
namespace {

using json = nlohmann::json;

struct Server {
    explicit Server(Providers providers = make_providers(small_mock_config()),
                    ServerConfig sc = [] {
                        ServerConfig c;
                        c.port = 0;
                        c.drain_timeout = std::chrono::seconds{5};
                        return c;
                    }())
        : studio(dir.path(), std::move(providers), PromptTemplates::builtin(), small_mock_config()),
          server(studio, std::move(sc)),
          client("127.0.0.1", server.start()) {
        client.set_read_timeout(20, 0);
    }

    json post(const std::string& path, const json& body, int expect) {
        auto r = client.Post(path, body.dump(), "application/json");
        EXPECT_TRUE(r);
        if (!r) return {};
        EXPECT_EQ(r->status, expect) << path << ": " << r->body;
        return r->body.empty() ? json() : json::parse(r->body);
    }

    TempDir dir;
    Studio studio;
    ApiServer server;
    httplib::Client client;
};

json spec_json() {
    return {{"affective_element", "old crush holding my hands"},
            {"adjectives", {"exciting"}},
            {"metaphor_concept", "Electric Sparks"},
            {"meaning_type", "connection"},
            {"visual_structure", "fusion"}};
}

TEST(ApiServer, ScenarioReplayAndBundleValidates) {
    TempDir dir;
    const ReplayResult r = replay_scenario_over_http(dir.path());
    ASSERT_TRUE(r.ok) << r.failure;
    EXPECT_LT(r.elapsed, std::chrono::seconds{10});
    std::ostringstream out, err;
    EXPECT_EQ(cli::run({"validate-bundle", r.bundle.string()}, out, err), cli::kExitOk) << out.str();
}

TEST(ApiServer, UnknownSceneBody) {
    Server s;
    auto r = s.client.Get("/scenes/no-such-scene/palette");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 404);
    const json body = json::parse(r->body);
    EXPECT_EQ(body.at("code"), "UnknownScene");
    EXPECT_TRUE(body.at("message").is_string());
    EXPECT_EQ(body.at("retryable"), false);
    EXPECT_EQ(r->get_header_value("Content-Type"), "application/json");
}

TEST(ApiServer, UnknownRouteIsNotFound) {
    Server s;
    auto r = s.client.Get("/nothing/here");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 404);
    EXPECT_EQ(json::parse(r->body).at("code"), "NotFound");
}

TEST(ApiServer, CorsHeadersAndPreflight) {
    Server s;
    auto r = s.client.Get("/healthz", {{"Origin", "http://localhost:5173"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
    auto pre = s.client.Options("/stories");
    ASSERT_TRUE(pre);
    EXPECT_EQ(pre->status, 204);
    EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("PATCH"), std::string::npos);
}

TEST(ApiServer, CorsSpecificOrigin) {
    ServerConfig sc;
    sc.port = 0;
    sc.cors_origins = {"http://ui.test"};
    Server s(make_providers(small_mock_config()), sc);
    auto ok = s.client.Get("/healthz", {{"Origin", "http://ui.test"}});
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->get_header_value("Access-Control-Allow-Origin"), "http://ui.test");
    auto other = s.client.Get("/healthz", {{"Origin", "http://evil.test"}});
    ASSERT_TRUE(other);
    EXPECT_FALSE(other->has_header("Access-Control-Allow-Origin"));
}

TEST(ApiServer, BadJsonIsInvalidRequest) {
    Server s;
    auto r = s.client.Post("/stories", "{not json", "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
    EXPECT_EQ(json::parse(r->body).at("code"), "InvalidRequest");
    const json empty = s.post("/stories", {{"title", "  "}}, 422);
    EXPECT_EQ(empty.at("code"), "EmptyTitle");
}

TEST(ApiServer, ListStories) {
    Server s;
    s.post("/stories", {{"title", "one"}}, 201);
    s.post("/stories", {{"title", "two"}}, 201);
    auto r = s.client.Get("/stories");
    ASSERT_TRUE(r);
    EXPECT_EQ(json::parse(r->body).at("stories").size(), 2u);
}

TEST(ApiServer, ExportImportRoundTrip) {
    Server s;
    const std::string id = s.post("/stories", {{"title", "trip"}}, 201).at("id");
    const json scene = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}, {"metaphor", spec_json()}}, 201);
    const json gen = s.post("/scenes/" + scene.at("id").get<std::string>() + "/generations", json::object(), 201);
    s.post("/scenes/" + scene.at("id").get<std::string>() + "/generations/" +
               gen.at("generation").at("id").get<std::string>() + "/accept",
           json::object(), 200);
    const json exported = json::parse(s.client.Get("/stories/" + id)->body);

    json images = json::object();
    for (const auto& g : exported.at("scenes")[0].at("generations")) {
        const std::string ref = g.at("image_ref");
        images[ref] = base64_encode(*s.studio.image(ref));
    }

    Server other;
    const json imported = other.post("/stories", {{"story", exported}, {"images", images}}, 200);
    EXPECT_EQ(serial::story_from_json(imported), serial::story_from_json(exported));
    const json fetched = json::parse(other.client.Get("/stories/" + id)->body);
    EXPECT_EQ(serial::story_from_json(fetched), serial::story_from_json(exported));
    auto img = other.client.Get("/images/" + exported.at("scenes")[0].at("generations")[0].at("image_ref").get<std::string>());
    ASSERT_TRUE(img);
    EXPECT_EQ(img->status, 200);
}

TEST(ApiServer, ImportWithMissingImageFails) {
    Server s;
    const std::string id = s.post("/stories", {{"title", "trip"}}, 201).at("id");
    const json scene = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}, {"metaphor", spec_json()}}, 201);
    s.post("/scenes/" + scene.at("id").get<std::string>() + "/generations", json::object(), 201);
    const json exported = json::parse(s.client.Get("/stories/" + id)->body);
    Server other;
    const json err = other.post("/stories", {{"story", exported}}, 500);
    EXPECT_EQ(err.at("code"), "IoFailure");
}

TEST(ApiServer, LayoutOrderViolationIs409) {
    Server s;
    const std::string id = s.post("/stories", {{"title", "layout"}}, 201).at("id");
    const std::string a = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}}, 201).at("id");
    const std::string b = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}}, 201).at("id");
    auto r = s.client.Put("/stories/" + id + "/layout", json{{"items", {{a, {{"anchor_x", 0.9}}}}}}.dump(),
                          "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 409);
    EXPECT_EQ(json::parse(r->body).at("code"), "OrderViolation");

    auto ok = s.client.Put("/stories/" + id + "/layout",
                           json{{"items", {{a, {{"anchor_x", 0.9}}}, {b, {{"anchor_x", 0.95}, {"scale", 9.0}}}}},
                                {"axis_y", 0.4}}
                               .dump(),
                           "application/json");
    ASSERT_TRUE(ok);
    ASSERT_EQ(ok->status, 200) << ok->body;
    const json layout = json::parse(ok->body);
    EXPECT_EQ(layout.at("items").at(a).at("anchor_x"), 0.9);
    EXPECT_EQ(layout.at("items").at(b).at("scale"), 4.0);
    EXPECT_EQ(layout.at("axis_y"), 0.4);
}

TEST(ApiServer, FilterPutVariants) {
    Server s;
    const std::string id = s.post("/stories", {{"title", "filter"}}, 201).at("id");
    const std::string scene = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}, {"metaphor", spec_json()}}, 201).at("id");
    const std::string gid = s.post("/scenes/" + scene + "/generations", json::object(), 201).at("generation").at("id");
    s.post("/scenes/" + scene + "/generations/" + gid + "/accept", json::object(), 200);

    const auto put = [&](const json& body, int expect) {
        auto r = s.client.Put("/scenes/" + scene + "/filter", body.dump(), "application/json");
        EXPECT_TRUE(r);
        EXPECT_EQ(r->status, expect) << r->body;
        return json::parse(r->body);
    };
    const json view = put({{"hex", "#123456"}}, 200);
    EXPECT_EQ(view.at("filter").at("hex"), "#123456");
    EXPECT_EQ(view.at("filter").at("origin"), "custom_hex");

    const std::string dominant = view.at("palette").at("entries")[0].at("hex");
    const json picked = put({{"hex", dominant}, {"origin", "palette_pick"}}, 200);
    EXPECT_EQ(picked.at("filter").at("origin"), "palette_pick");

    EXPECT_EQ(put({{"hex", "#010203"}, {"origin", "palette_pick"}}, 400).at("code"), "InvalidRequest");
    EXPECT_EQ(put({{"hex", "red"}}, 422).at("code"), "InvalidHex");

    const json reset = put(json::object(), 200);
    EXPECT_EQ(reset.at("filter").at("origin"), "palette_default");
    EXPECT_EQ(reset.at("filter").at("hex"), dominant);
}

TEST(ApiServer, SuggestionCountValidated) {
    Server s;
    const std::string id = s.post("/stories", {{"title", "n"}}, 201).at("id");
    const std::string scene = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}, {"metaphor", spec_json()}}, 201).at("id");
    EXPECT_EQ(s.post("/scenes/" + scene + "/suggestions", {{"n", 0}}, 400).at("code"), "InvalidRequest");
    const json lit = s.post("/stories/" + id + "/scenes", {{"kind", "literal"}}, 201);
    EXPECT_EQ(s.post("/scenes/" + lit.at("id").get<std::string>() + "/suggestions", json::object(), 422).at("code"),
              "NotMetaphorical");
}

TEST(ApiServer, ProviderTimeoutIsRetryable) {
    const Providers base = make_providers(small_mock_config());
    auto image = std::make_shared<ScriptedImage>(base.image);
    image->fail_when = [](const ImageRequest&) { return true; };
    Server s(Providers{base.chat, image});
    const std::string id = s.post("/stories", {{"title", "t"}}, 201).at("id");
    const std::string scene = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}, {"metaphor", spec_json()}}, 201).at("id");
    const json err = s.post("/scenes/" + scene + "/generations", json::object(), 504);
    EXPECT_EQ(err.at("code"), "ProviderTimeout");
    EXPECT_EQ(err.at("retryable"), true);
}

TEST(ApiServer, DrainingRefusesNewRequestsAndFinishesInFlight) {
    const Providers base = make_providers(small_mock_config());
    auto image = std::make_shared<ScriptedImage>(base.image);
    std::promise<void> entered;
    std::shared_future<void> release_signal;
    std::promise<void> release;
    release_signal = release.get_future().share();
    std::atomic<bool> first{true};
    image->fail_when = [&](const ImageRequest&) {
        if (first.exchange(false)) {
            entered.set_value();
            release_signal.wait();
        }
        return false;
    };
    Server s(Providers{base.chat, image});
    const std::string id = s.post("/stories", {{"title", "drain"}}, 201).at("id");
    const std::string scene = s.post("/stories/" + id + "/scenes", {{"kind", "metaphorical"}, {"metaphor", spec_json()}}, 201).at("id");

    auto slow = std::async(std::launch::async, [&] {
        httplib::Client c("127.0.0.1", s.server.port());
        c.set_read_timeout(20, 0);
        auto r = c.Post("/scenes/" + scene + "/generations", "{}", "application/json");
        return r ? r->status : -1;
    });
    entered.get_future().wait();
    EXPECT_EQ(s.server.in_flight(), 1u);

    auto stopping = std::async(std::launch::async, [&] { s.server.stop(); });
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    httplib::Client late("127.0.0.1", s.server.port());
    auto refused = late.Get("/healthz");
    ASSERT_TRUE(refused);
    EXPECT_EQ(refused->status, 503);
    EXPECT_EQ(json::parse(refused->body).at("code"), "Unavailable");
    EXPECT_EQ(json::parse(refused->body).at("retryable"), true);

    release.set_value();
    EXPECT_EQ(slow.get(), 201);
    stopping.get();
    EXPECT_EQ(s.server.in_flight(), 0u);
    EXPECT_EQ(s.studio.get_story(id).scenes[0].generations.size(), 1u);
}

TEST(ApiServer, ParseBindAddress) {
    EXPECT_EQ(parse_bind_address("0.0.0.0:9000").host, "0.0.0.0");
    EXPECT_EQ(parse_bind_address("0.0.0.0:9000").port, 9000);
    EXPECT_EQ(parse_bind_address(":8081").host, "127.0.0.1");
    EXPECT_EQ(parse_bind_address(":8081").port, 8081);
    EXPECT_EQ(parse_bind_address("7000").port, 7000);
    for (const char* bad : {"", "host:", "host:70000", "host:-1", "host:12x"}) {
        EXPECT_THROW(parse_bind_address(bad), Error) << bad;
    }
}

TEST(ApiServer, BindFailureWhenPortTaken) {
    Server s;
    ServerConfig sc;
    sc.port = s.server.port();
    TempDir dir;
    Studio studio(dir.path(), make_providers(small_mock_config()), PromptTemplates::builtin(), small_mock_config());
    ApiServer clash(studio, sc);
    try {
        clash.bind();
        FAIL() << "bind succeeded on a taken port";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BindFailure);
    }
}

}  // namespace
}  // namespace dltest
