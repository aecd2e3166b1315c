#include "dreamloom/api_server.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dreamloom/image_codec.hpp"
#include "dreamloom/palette.hpp"
#include "dreamloom/serialization.hpp"
#include "dreamloom/util.hpp"

namespace dreamloom {

using json = nlohmann::json;

BindAddress parse_bind_address(std::string_view text) {
    const std::string t{trim(text)};
    BindAddress out{"127.0.0.1", 0};
    std::string_view port_text = t;
    if (const auto colon = t.rfind(':'); colon != std::string::npos) {
        if (colon > 0) out.host = t.substr(0, colon);
        port_text = std::string_view(t).substr(colon + 1);
    }
    int port = -1;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
        throw Error(ErrorCode::InvalidRequest, fmt::format("bad bind address '{}'", text));
    }
    out.port = port;
    return out;
}

namespace {

json error_body(const ApiErrorInfo& info) {
    return {{"code", info.code}, {"message", info.message}, {"retryable", info.retryable}};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
    send_json(res, error_code_http_status(e.code()), error_body(ApiErrorInfo::from(e)));
}

json parse_body(const httplib::Request& req, bool allow_empty = true) {
    if (trim(req.body).empty()) {
        if (allow_empty) return json::object();
        throw Error(ErrorCode::InvalidRequest, "request body is required");
    }
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::InvalidRequest, "request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidRequest, fmt::format("request body is not JSON: {}", e.what()));
    }
}

const json* field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || it->is_null()) return nullptr;
    return &*it;
}

std::string string_field(const json& body, const char* key) {
    const json* v = field(body, key);
    if (v == nullptr || !v->is_string()) {
        throw Error(ErrorCode::InvalidRequest, fmt::format("field '{}' must be a string", key));
    }
    return v->get<std::string>();
}

double number_field(const json& v, const char* key) {
    if (!v.is_number()) throw Error(ErrorCode::InvalidRequest, fmt::format("field '{}' must be a number", key));
    return v.get<double>();
}

std::optional<std::uint64_t> seed_field(const json& body) {
    const json* v = field(body, "seed");
    if (v == nullptr) return std::nullopt;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        throw Error(ErrorCode::InvalidRequest, "field 'seed' must be a non-negative integer");
    }
    return v->get<std::uint64_t>();
}

layout::LayoutEdit layout_edit_from(const json& body) {
    layout::LayoutEdit edit;
    if (const json* axis = field(body, "axis_y")) edit.axis_y = number_field(*axis, "axis_y");
    if (const json* items = field(body, "items")) {
        if (!items->is_object()) throw Error(ErrorCode::InvalidRequest, "field 'items' must be an object");
        for (const auto& [id, v] : items->items()) {
            if (!v.is_object()) throw Error(ErrorCode::InvalidRequest, "layout items must be objects");
            layout::ItemEdit item;
            if (const json* x = field(v, "anchor_x")) item.anchor_x = number_field(*x, "anchor_x");
            if (const json* s = field(v, "scale")) item.scale = number_field(*s, "scale");
            if (const json* off = field(v, "image_offset")) {
                if (!off->is_object() || !off->contains("dx") || !off->contains("dy")) {
                    throw Error(ErrorCode::InvalidRequest, "field 'image_offset' needs dx and dy");
                }
                item.image_offset = Offset{number_field(off->at("dx"), "dx"), number_field(off->at("dy"), "dy")};
            }
            edit.items.emplace(id, item);
        }
    }
    return edit;
}

std::optional<ColorFilter> filter_from_request(const json& body) {
    const json* origin = field(body, "origin");
    const json* hex = field(body, "hex");
    FilterOrigin o = FilterOrigin::CustomHex;
    if (origin != nullptr) {
        if (!origin->is_string()) throw Error(ErrorCode::InvalidRequest, "field 'origin' must be a string");
        o = parse_filter_origin(origin->get<std::string>());
    } else if (hex == nullptr) {
        o = FilterOrigin::PaletteDefault;
    }
    if (o == FilterOrigin::PaletteDefault) return std::nullopt;
    return ColorFilter{parse_hex(string_field(body, "hex")), o};
}

json palette_view_json(const PaletteView& view) {
    return {{"palette", view.palette ? serial::to_json(*view.palette) : json(nullptr)},
            {"filter", view.filter ? serial::to_json(*view.filter) : json(nullptr)}};
}

}  // namespace

ApiServer::ApiServer(Studio& studio, ServerConfig config)
    : studio_(studio), config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
    // SO_REUSEADDR without SO_REUSEPORT
    server_->set_socket_options([](auto sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    install_routes();
}

ApiServer::~ApiServer() {
    stop();
}

int ApiServer::bind() {
    if (config_.port == 0) {
        port_ = server_->bind_to_any_port(config_.host);
        if (port_ < 0) port_ = 0;
    } else if (server_->bind_to_port(config_.host, config_.port)) {
        port_ = config_.port;
    }
    if (port_ <= 0) {
        throw Error(ErrorCode::BindFailure,
                    fmt::format("cannot listen on {}:{}", config_.host, config_.port));
    }
    return port_;
}

void ApiServer::run() {
    server_->listen_after_bind();
}

int ApiServer::start() {
    const int port = bind();
    thread_ = std::thread([this] { run(); });
    server_->wait_until_ready();
    return port;
}

void ApiServer::stop() {
    if (!draining_.exchange(true)) {
        std::unique_lock lock(drain_mutex_);
        drain_cv_.wait_for(lock, config_.drain_timeout, [&] { return in_flight_.load() == 0; });
    }
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

void ApiServer::install_routes() {
    auto& s = *server_;

    // Wraps a handler with draining, in-flight accounting and ApiError mapping.
    auto route = [this](auto fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            ++in_flight_;
            const auto leave = [this] {
                {
                    std::lock_guard lock(drain_mutex_);
                    --in_flight_;
                }
                drain_cv_.notify_all();
            };
            if (draining_.load()) {
                leave();
                send_error(res, Error(ErrorCode::Unavailable, "server is shutting down"));
                return;
            }
            try {
                fn(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const json::exception& e) {
                send_error(res, Error(ErrorCode::InvalidRequest, e.what()));
            } catch (const std::exception& e) {
                send_error(res, Error(ErrorCode::Internal, e.what()));
            }
            leave();
        };
    };

    s.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        const std::string origin = req.get_header_value("Origin");
        const auto& allowed = config_.cors_origins;
        if (std::find(allowed.begin(), allowed.end(), "*") != allowed.end()) {
            res.set_header("Access-Control-Allow-Origin", "*");
        } else if (!origin.empty() && std::find(allowed.begin(), allowed.end(), origin) != allowed.end()) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        }
    });

    s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.status = 204;
        res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, PATCH, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Max-Age", "600");
    });

    s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.body.empty() && res.status == 404) {
            send_error(res, Error(ErrorCode::NotFound, fmt::format("no route for {} {}", req.method, req.path)));
        }
    });

    s.Post("/stories", route([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req, false);
        if (const json* story = field(body, "story")) {
            std::map<std::string, std::string> images;
            if (const json* imgs = field(body, "images")) {
                if (!imgs->is_object()) throw Error(ErrorCode::InvalidRequest, "field 'images' must be an object");
                for (const auto& [ref, b64] : imgs->items()) {
                    auto bytes = b64.is_string() ? base64_decode(b64.get<std::string>()) : std::nullopt;
                    if (!bytes) throw Error(ErrorCode::InvalidRequest, fmt::format("image {} is not base64", ref));
                    images.emplace(ref, std::move(*bytes));
                }
            }
            send_json(res, 200, serial::to_json(studio_.import_story(serial::story_from_json(*story), images)));
            return;
        }
        send_json(res, 201, serial::to_json(studio_.create_story(string_field(body, "title"))));
    }));

    s.Get("/stories", route([this](const httplib::Request&, httplib::Response& res) {
        json list = json::array();
        for (const auto& st : studio_.list_stories()) {
            list.push_back({{"id", st.id},
                            {"title", st.title},
                            {"scene_count", st.scene_count},
                            {"updated_at", format_timestamp(st.updated_at)}});
        }
        send_json(res, 200, {{"stories", std::move(list)}});
    }));

    s.Get("/stories/:id", route([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, serial::to_json(studio_.get_story(req.path_params.at("id"))));
    }));

    s.Post("/stories/:id/scenes", route([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req, false);
        SceneDraft draft;
        draft.kind = parse_scene_kind(string_field(body, "kind"));
        if (const json* pos = field(body, "position")) {
            if (!pos->is_number_integer() || pos->get<long long>() < 0) {
                throw Error(ErrorCode::PositionOutOfRange, "position must be a non-negative integer");
            }
            draft.position = pos->get<std::size_t>();
        }
        if (field(body, "text") != nullptr) draft.text = string_field(body, "text");
        if (const json* m = field(body, "metaphor")) draft.metaphor = serial::metaphor_from_json(*m);
        send_json(res, 201, serial::to_json(studio_.add_scene(req.path_params.at("id"), std::move(draft))));
    }));

    s.Patch("/scenes/:id", route([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req, false);
        SceneUpdate update;
        if (field(body, "text") != nullptr) update.text = string_field(body, "text");
        if (const json* m = field(body, "metaphor")) update.metaphor = serial::metaphor_from_json(*m);
        send_json(res, 200, serial::to_json(studio_.update_scene(req.path_params.at("id"), std::move(update))));
    }));

    s.Delete("/scenes/:id", route([this](const httplib::Request& req, httplib::Response& res) {
        studio_.delete_scene(req.path_params.at("id"));
        res.status = 204;
    }));

    s.Post("/scenes/:id/suggestions", route([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        std::optional<MeaningType> meaning;
        if (field(body, "meaning_type") != nullptr) meaning = parse_meaning_type(string_field(body, "meaning_type"));
        std::size_t n = kDefaultSuggestionCount;
        if (const json* count = field(body, "n")) {
            if (!count->is_number_integer() || count->get<long long>() < 1 || count->get<long long>() > 20) {
                throw Error(ErrorCode::InvalidRequest, "field 'n' must be an integer in [1, 20]");
            }
            n = count->get<std::size_t>();
        }
        json list = json::array();
        for (const auto& sug : studio_.request_suggestions(req.path_params.at("id"), meaning, n)) {
            list.push_back(serial::to_json(sug));
        }
        send_json(res, 200, {{"suggestions", std::move(list)}});
    }));

    s.Post("/scenes/:id/generations", route([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const std::string scene_id = req.path_params.at("id");
        const GenerationRecord g = studio_.request_generation(scene_id, seed_field(body));
        send_json(res, 201, {{"generation", serial::to_json(g)}, {"scene", serial::to_json(studio_.get_scene(scene_id))}});
    }));

    s.Post("/scenes/:id/generations/:gid/accept", route([this](const httplib::Request& req, httplib::Response& res) {
        const AcceptanceResult r = studio_.finalize_acceptance(req.path_params.at("id"), req.path_params.at("gid"));
        send_json(res, 200,
                  {{"scene", serial::to_json(r.scene)},
                   {"already_accepted", r.event.already_accepted},
                   {"depiction_added", r.depiction_added},
                   {"depiction_error", r.depiction_error ? error_body(*r.depiction_error) : json(nullptr)}});
    }));

    s.Post("/scenes/:id/display/:gid", route([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200,
                  serial::to_json(studio_.switch_display(req.path_params.at("id"), req.path_params.at("gid"))));
    }));

    s.Get("/scenes/:id/palette", route([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, palette_view_json(studio_.palette_view(req.path_params.at("id"))));
    }));

    s.Put("/scenes/:id/filter", route([this](const httplib::Request& req, httplib::Response& res) {
        const std::string scene_id = req.path_params.at("id");
        studio_.set_filter(scene_id, filter_from_request(parse_body(req)));
        send_json(res, 200, palette_view_json(studio_.palette_view(scene_id)));
    }));

    s.Put("/stories/:id/layout", route([this](const httplib::Request& req, httplib::Response& res) {
        const LayoutState layout = studio_.update_layout(req.path_params.at("id"), layout_edit_from(parse_body(req, false)));
        send_json(res, 200, serial::to_json(layout));
    }));

    s.Get("/stories/:id/playback", route([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, store::to_json(studio_.playback(req.path_params.at("id"))));
    }));

    s.Get("/images/:ref", route([this](const httplib::Request& req, httplib::Response& res) {
        const std::string ref = req.path_params.at("ref");
        auto bytes = studio_.image(ref);
        if (!bytes) throw Error(ErrorCode::NotFound, fmt::format("no image with ref '{}'", ref));
        res.status = 200;
        res.set_header("Cache-Control", "public, max-age=31536000, immutable");
        res.set_content(*bytes, std::string(mime_type(sniff_format(*bytes))));
    }));

    s.Get("/healthz", route([this](const httplib::Request&, httplib::Response& res) {
        json providers = json::array();
        bool degraded = false;
        for (const auto& h : studio_.health()) {
            degraded = degraded || h.state == HealthState::Degraded || h.state == HealthState::NotConfigured;
            providers.push_back(serial::to_json(h));
        }
        send_json(res, 200, {{"status", degraded ? "degraded" : "ok"}, {"providers", std::move(providers)}});
    }));
}

}  // namespace dreamloom
