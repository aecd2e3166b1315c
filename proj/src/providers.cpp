#include "dreamloom/providers.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dreamloom/error.hpp"
#include "dreamloom/image_codec.hpp"
#include "dreamloom/util.hpp"
#include "dreamloom_embedded.hpp"

namespace dreamloom {

using json = nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

std::string_view to_string(ProviderMode mode) noexcept {
    return mode == ProviderMode::Live ? "live" : "mock";
}

ProviderMode parse_provider_mode(std::string_view text) {
    const std::string v = to_lower(trim(text));
    if (v == "live") return ProviderMode::Live;
    if (v == "mock") return ProviderMode::Mock;
    throw Error(ErrorCode::InvalidRequest,
                fmt::format("provider mode must be live or mock, got '{}'", text));
}

std::string_view to_string(HealthState state) noexcept {
    switch (state) {
    case HealthState::NotConfigured: return "not_configured";
    case HealthState::Configured: return "configured";
    case HealthState::Reachable: return "reachable";
    case HealthState::Degraded: return "degraded";
    }
    return "not_configured";
}

namespace {

std::optional<std::string> system_env(std::string_view name) {
    const char* v = std::getenv(std::string(name).c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
}

double parse_double(std::string_view name, const std::string& value) {
    try {
        std::size_t used = 0;
        const double d = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return d;
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidRequest, fmt::format("{} must be a number, got '{}'", name, value));
    }
}

bool retryable_status(int status) {
    return status == 408 || status == 425 || status == 429 || status >= 500;
}

std::string snippet(std::string_view body) {
    constexpr std::size_t kMax = 200;
    return std::string(body.substr(0, std::min(body.size(), kMax)));
}

void sleep_within(std::chrono::milliseconds latency, std::chrono::milliseconds deadline,
                  std::string_view provider) {
    if (latency <= std::chrono::milliseconds::zero()) return;
    if (latency > deadline) {
        std::this_thread::sleep_for(deadline);
        throw Error(ErrorCode::ProviderTimeout,
                    fmt::format("{} provider did not answer within {} ms", provider, deadline.count()));
    }
    std::this_thread::sleep_for(latency);
}

// Sends with exponential backoff on transient failures until the deadline.
HttpResponse send_with_retries(HttpTransport& transport, const HttpRequest& request,
                               const ProviderConfig& config, SteadyClock::time_point deadline,
                               std::string_view provider, int& attempts) {
    auto backoff = config.backoff_initial;
    std::string last_failure;
    bool last_was_timeout = false;
    attempts = 0;
    for (;;) {
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - SteadyClock::now());
        if (remaining <= std::chrono::milliseconds::zero()) {
            throw Error(ErrorCode::ProviderTimeout,
                        fmt::format("{} provider deadline exceeded after {} attempt(s){}", provider,
                                    attempts, last_failure.empty() ? "" : ": " + last_failure));
        }
        ++attempts;
        try {
            HttpResponse response = transport.send(request, remaining);
            if (response.status >= 200 && response.status < 300) {
                return response;
            }
            if (!retryable_status(response.status)) {
                throw Error(ErrorCode::ProviderRejected,
                            fmt::format("{} provider answered HTTP {}: {}", provider, response.status,
                                        snippet(response.body)));
            }
            last_failure = fmt::format("HTTP {}", response.status);
            last_was_timeout = false;
        } catch (const TransportError& e) {
            last_failure = e.what();
            last_was_timeout = e.timed_out();
        }
        if (attempts > config.max_retries) {
            if (last_was_timeout) {
                throw Error(ErrorCode::ProviderTimeout,
                            fmt::format("{} provider timed out after {} attempt(s)", provider, attempts));
            }
            throw Error(ErrorCode::Unavailable, fmt::format("{} provider failed after {} attempt(s): {}",
                                                            provider, attempts, last_failure));
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - SteadyClock::now());
        std::this_thread::sleep_for(std::max(std::chrono::milliseconds::zero(), std::min(backoff, left)));
        backoff = std::chrono::milliseconds(
            static_cast<std::int64_t>(static_cast<double>(backoff.count()) * config.backoff_multiplier));
    }
}

std::string join_url(std::string_view base, std::string_view path) {
    std::string b{base};
    while (!b.empty() && b.back() == '/') b.pop_back();
    if (path.empty()) return b;
    return path.front() == '/' ? b + std::string(path) : b + "/" + std::string(path);
}

ProviderHealth probe(HttpTransport& transport, HttpRequest request, std::string provider,
                     ProviderMode mode, std::chrono::milliseconds timeout, bool any_status_ok) {
    ProviderHealth h{std::move(provider), mode, HealthState::Reachable, {}};
    try {
        const HttpResponse r = transport.send(request, timeout);
        if ((r.status >= 200 && r.status < 300) || (any_status_ok && r.status > 0 && r.status < 500)) {
            h.detail = fmt::format("HTTP {}", r.status);
        } else {
            h.state = HealthState::Degraded;
            h.detail = fmt::format("HTTP {}", r.status);
        }
    } catch (const TransportError& e) {
        h.state = HealthState::Degraded;
        h.detail = e.what();
    }
    return h;
}

std::string_view purpose_name(ChatPurpose p) {
    return p == ChatPurpose::Suggestion ? "suggestion" : "depiction";
}

ChatPurpose parse_purpose(std::string_view s) {
    if (s == "suggestion") return ChatPurpose::Suggestion;
    if (s == "depiction") return ChatPurpose::Depiction;
    throw Error(ErrorCode::InvalidTemplate, fmt::format("unknown fixture purpose '{}'", s));
}

}  // namespace

ProviderConfig ProviderConfig::from_env(const EnvLookup& lookup) {
    const EnvLookup get = lookup ? lookup : EnvLookup(system_env);
    ProviderConfig c;
    if (auto v = get("MM_PROVIDER_MODE")) {
        c.chat_mode = c.image_mode = parse_provider_mode(*v);
    }
    if (auto v = get("MM_CHAT_PROVIDER_MODE")) c.chat_mode = parse_provider_mode(*v);
    if (auto v = get("MM_IMAGE_PROVIDER_MODE")) c.image_mode = parse_provider_mode(*v);
    if (auto v = get("MM_CHAT_BASE_URL")) c.chat_base_url = *v;
    if (auto v = get("MM_CHAT_API_KEY")) c.chat_api_key = *v;
    if (auto v = get("MM_CHAT_MODEL")) c.chat_model = *v;
    if (auto v = get("MM_IMAGE_BASE_URL")) c.image_base_url = *v;
    if (auto v = get("MM_IMAGE_PATH")) c.image_path = *v;
    if (auto v = get("MM_REQUEST_DEADLINE_SECS")) {
        const double secs = parse_double("MM_REQUEST_DEADLINE_SECS", *v);
        if (!(secs > 0.0)) {
            throw Error(ErrorCode::InvalidRequest, "MM_REQUEST_DEADLINE_SECS must be positive");
        }
        c.deadline = std::chrono::milliseconds(static_cast<std::int64_t>(secs * 1000.0));
    }
    if (auto v = get("MM_IMAGE_NEGATIVE_PROMPT")) c.negative_prompt = *v;
    if (auto v = get("MM_IMAGE_GUIDANCE_SCALE")) c.guidance_scale = parse_double("MM_IMAGE_GUIDANCE_SCALE", *v);
    if (auto v = get("MM_IMAGE_SAMPLER")) c.sampler = *v;
    if (auto v = get("MM_MOCK_FIXTURES")) c.mock_fixtures = *v;
    return c;
}

ChatRequest make_chat_request(const ProviderConfig& config, PromptText prompt, ChatPurpose purpose) {
    ChatRequest r;
    r.prompt = std::move(prompt);
    r.purpose = purpose;
    if (purpose == ChatPurpose::Suggestion) {
        r.temperature = config.suggestion_temperature;
        r.max_tokens = config.suggestion_max_tokens;
    } else {
        r.temperature = config.depiction_temperature;
        r.max_tokens = config.depiction_max_tokens;
    }
    return r;
}

ImageRequest make_image_request(const ProviderConfig& config, PromptText prompt,
                                std::optional<std::uint64_t> seed) {
    ImageRequest r;
    r.prompt = std::move(prompt);
    r.width = config.image_width;
    r.height = config.image_height;
    r.steps = config.image_steps;
    r.seed = seed;
    return r;
}

ConcurrencyGate::Permit::~Permit() {
    if (gate_ != nullptr) {
        {
            std::lock_guard lock(gate_->mutex_);
            ++gate_->available_;
        }
        gate_->cv_.notify_one();
    }
}

ConcurrencyGate::Permit ConcurrencyGate::acquire(SteadyClock::time_point deadline) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_until(lock, deadline, [&] { return available_ > 0; })) {
        throw Error(ErrorCode::ProviderTimeout, "no provider slot became free before the deadline");
    }
    --available_;
    return Permit(this);
}

// ---- live chat ----------------------------------------------------------

LiveChatProvider::LiveChatProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), gate_(config_.max_concurrency) {}

std::string LiveChatProvider::chat_complete(const ChatRequest& request) {
    if (config_.chat_api_key.empty() || config_.chat_base_url.empty()) {
        throw Error(ErrorCode::NotConfigured, "chat provider needs MM_CHAT_BASE_URL and MM_CHAT_API_KEY");
    }
    const auto deadline = SteadyClock::now() + config_.deadline;
    auto permit = gate_.acquire(deadline);

    json messages = json::array();
    if (!request.prompt.role_preamble.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.prompt.role_preamble}});
    }
    messages.push_back({{"role", "user"}, {"content", request.prompt.body}});
    const json body = {
        {"model", config_.chat_model},
        {"messages", messages},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    HttpRequest http;
    http.method = "POST";
    http.url = join_url(config_.chat_base_url, "/chat/completions");
    http.headers = {{"Authorization", "Bearer " + config_.chat_api_key},
                    {"Content-Type", "application/json"}};
    http.body = body.dump();

    int attempts = 0;
    const HttpResponse response = send_with_retries(*transport_, http, config_, deadline, "chat", attempts);
    try {
        const json parsed = json::parse(response.body);
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProviderRejected,
                    fmt::format("chat provider sent an unexpected body: {}", e.what()));
    }
}

ProviderHealth LiveChatProvider::health_check() {
    if (config_.chat_api_key.empty() || config_.chat_base_url.empty()) {
        return {"chat", ProviderMode::Live, HealthState::NotConfigured, "MM_CHAT_API_KEY or MM_CHAT_BASE_URL unset"};
    }
    HttpRequest req;
    req.method = "GET";
    req.url = join_url(config_.chat_base_url, "/models");
    req.headers = {{"Authorization", "Bearer " + config_.chat_api_key}};
    return probe(*transport_, req, "chat", ProviderMode::Live,
                 std::min(config_.deadline, std::chrono::milliseconds{3000}), false);
}

// ---- live image ---------------------------------------------------------

LiveImageProvider::LiveImageProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), gate_(config_.max_concurrency) {}

std::string LiveImageProvider::request_body(const ImageRequest& req) const {
    json body = {
        {"prompt", req.prompt.full},
        {"width", req.width},
        {"height", req.height},
        {"num_inference_steps", req.steps},
    };
    if (req.seed) body["seed"] = *req.seed;
    if (config_.negative_prompt) body["negative_prompt"] = *config_.negative_prompt;
    if (config_.guidance_scale) body["guidance_scale"] = *config_.guidance_scale;
    if (config_.sampler) body["sampler"] = *config_.sampler;
    return body.dump();
}

ImageResult LiveImageProvider::generate_image(const ImageRequest& req) {
    if (config_.image_base_url.empty()) {
        throw Error(ErrorCode::NotConfigured, "image provider needs MM_IMAGE_BASE_URL");
    }
    const auto deadline = SteadyClock::now() + config_.deadline;
    auto permit = gate_.acquire(deadline);

    HttpRequest http;
    http.method = "POST";
    http.url = join_url(config_.image_base_url, config_.image_path);
    http.headers = {{"Content-Type", "application/json"}, {"Accept", "image/png, application/json"}};
    http.body = request_body(req);

    int attempts = 0;
    const HttpResponse response = send_with_retries(*transport_, http, config_, deadline, "image", attempts);

    std::string bytes;
    const std::string content_type = to_lower(response.header("Content-Type"));
    if (content_type.rfind("image/", 0) == 0) {
        bytes = response.body;
    } else {
        std::string encoded;
        try {
            const json parsed = json::parse(response.body);
            if (parsed.contains("image")) {
                encoded = parsed.at("image").get<std::string>();
            } else if (parsed.contains("images")) {
                encoded = parsed.at("images").at(0).get<std::string>();
            } else {
                encoded = parsed.at("data").at(0).at("b64_json").get<std::string>();
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::BadImagePayload, fmt::format("image response carries no image: {}", e.what()));
        }
        if (const auto comma = encoded.find(";base64,"); encoded.rfind("data:", 0) == 0 && comma != std::string::npos) {
            encoded.erase(0, comma + 8);
        }
        auto decoded = base64_decode(encoded);
        if (!decoded) {
            throw Error(ErrorCode::BadImagePayload, "image response is not valid base64");
        }
        bytes = std::move(*decoded);
    }

    RgbImage image;
    try {
        image = decode_image(bytes);
    } catch (const Error& e) {
        throw Error(ErrorCode::BadImagePayload, fmt::format("undecodable image from provider: {}", e.what()));
    }
    if (image.width != req.width || image.height != req.height) {
        throw Error(ErrorCode::BadImagePayload,
                    fmt::format("provider returned {}x{} for a {}x{} request", image.width, image.height,
                                req.width, req.height));
    }
    ImageResult result;
    result.image_ref = sha256_hex(bytes);
    result.bytes = std::move(bytes);
    result.provider_meta["attempts"] = std::to_string(attempts);
    result.provider_meta["format"] = std::string(mime_type(sniff_format(result.bytes)));
    return result;
}

ProviderHealth LiveImageProvider::health_check() {
    if (config_.image_base_url.empty()) {
        return {"image", ProviderMode::Live, HealthState::NotConfigured, "MM_IMAGE_BASE_URL unset"};
    }
    HttpRequest req;
    req.method = "GET";
    req.url = config_.image_base_url;
    return probe(*transport_, req, "image", ProviderMode::Live,
                 std::min(config_.deadline, std::chrono::milliseconds{3000}), true);
}

// ---- mock chat ----------------------------------------------------------

std::pair<std::vector<MockChatProvider::Fixture>, std::map<ChatPurpose, std::string>>
MockChatProvider::parse_fixtures(std::string_view json_text) {
    std::vector<Fixture> fixtures;
    std::map<ChatPurpose, std::string> defaults;
    try {
        const json doc = json::parse(json_text);
        if (doc.at("version").get<int>() != 1) {
            throw Error(ErrorCode::InvalidTemplate, "unsupported fixture version");
        }
        for (const auto& f : doc.at("fixtures")) {
            Fixture fx;
            fx.purpose = parse_purpose(f.at("purpose").get<std::string>());
            fx.match = f.value("match", std::vector<std::string>{});
            fx.response = f.at("response").get<std::string>();
            fixtures.push_back(std::move(fx));
        }
        for (const auto& [key, value] : doc.at("defaults").items()) {
            defaults[parse_purpose(key)] = value.get<std::string>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidTemplate, fmt::format("bad mock fixtures: {}", e.what()));
    }
    return {std::move(fixtures), std::move(defaults)};
}

MockChatProvider::MockChatProvider(const ProviderConfig& config)
    : latency_(config.mock_latency), deadline_(config.deadline) {
    std::string text;
    if (config.mock_fixtures.empty()) {
        text = std::string(embedded::kMockChatFixtures);
    } else {
        std::ifstream in(config.mock_fixtures, std::ios::binary);
        if (!in) {
            throw Error(ErrorCode::IoFailure,
                        fmt::format("cannot read mock fixtures {}", config.mock_fixtures.string()));
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    std::tie(fixtures_, defaults_) = parse_fixtures(text);
}

MockChatProvider::MockChatProvider(std::vector<Fixture> fixtures, std::map<ChatPurpose, std::string> defaults,
                                   std::chrono::milliseconds latency, std::chrono::milliseconds deadline)
    : fixtures_(std::move(fixtures)), defaults_(std::move(defaults)), latency_(latency), deadline_(deadline) {}

std::string MockChatProvider::chat_complete(const ChatRequest& request) {
    sleep_within(latency_, deadline_, "chat");
    const std::string& prompt = request.prompt.full;
    for (const auto& f : fixtures_) {
        if (f.purpose != request.purpose) continue;
        const bool hit = std::all_of(f.match.begin(), f.match.end(), [&](const std::string& needle) {
            return prompt.find(needle) != std::string::npos;
        });
        if (hit) return f.response;
    }
    auto it = defaults_.find(request.purpose);
    if (it == defaults_.end()) {
        throw Error(ErrorCode::ProviderRejected,
                    fmt::format("no mock fixture for {} prompts", purpose_name(request.purpose)));
    }
    return it->second;
}

ProviderHealth MockChatProvider::health_check() {
    return {"chat", ProviderMode::Mock, HealthState::Reachable, "mock fixtures"};
}

// ---- mock image ---------------------------------------------------------

MockImageProvider::MockImageProvider(const ProviderConfig& config)
    : latency_(config.mock_latency), deadline_(config.deadline) {}

std::vector<MockImageProvider::Band> MockImageProvider::plan_bands(const ImageRequest& req) {
    const std::string hex = sha256_hex(fmt::format("{}|{}x{}|{}|{}", req.prompt.full, req.width, req.height,
                                                   req.steps, req.seed ? std::to_string(*req.seed) : "-"));
    std::vector<std::uint8_t> d;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
        d.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    }
    // Band edges fall on palette downsampling block boundaries, so the
    // extracted palette holds exactly the band colours.
    const int unit = std::max(1, (std::max(req.width, req.height) + 255) / 256);
    const int units = std::max(1, req.height / unit);
    const int count = std::min(2 + d[0] % 3, units);
    std::vector<Band> bands;
    std::vector<int> shares;
    for (int i = 0; i < count; ++i) {
        Color c{d[1 + 3 * i], d[2 + 3 * i], d[3 + 3 * i]};
        while (std::any_of(bands.begin(), bands.end(), [&](const Band& b) { return b.color == c; })) {
            c.r = static_cast<std::uint8_t>(c.r + 97);
        }
        bands.push_back({c, 0});
        shares.push_back(1 + d[20 + i] % 4);
    }
    int total_share = 0;
    for (int s : shares) total_share += s;
    int used_units = 0;
    for (int i = 0; i < count; ++i) {
        if (i + 1 == count) {
            bands[i].rows = req.height - used_units * unit;
        } else {
            const int remaining_bands = count - i - 1;
            const int want = std::max(1, units * shares[i] / total_share);
            const int take = std::min(want, units - used_units - remaining_bands);
            bands[i].rows = take * unit;
            used_units += take;
        }
    }
    return bands;
}

ImageResult MockImageProvider::generate_image(const ImageRequest& req) {
    if (req.width <= 0 || req.height <= 0) {
        throw Error(ErrorCode::BadImagePayload, "image size must be positive");
    }
    sleep_within(latency_, deadline_, "image");
    RgbImage image(req.width, req.height);
    int y = 0;
    for (const Band& band : plan_bands(req)) {
        for (int r = 0; r < band.rows && y < req.height; ++r, ++y) {
            for (int x = 0; x < req.width; ++x) image.set(x, y, band.color);
        }
    }
    ImageResult result;
    result.bytes = encode_png(image);
    result.image_ref = sha256_hex(result.bytes);
    result.provider_meta["provider"] = "mock";
    result.provider_meta["format"] = "image/png";
    return result;
}

ProviderHealth MockImageProvider::health_check() {
    return {"image", ProviderMode::Mock, HealthState::Reachable, "procedural images"};
}

// ---- wiring ---------------------------------------------------------------

std::vector<ProviderHealth> Providers::health_check() const {
    std::vector<ProviderHealth> out;
    if (chat) out.push_back(chat->health_check());
    if (image) out.push_back(image->health_check());
    return out;
}

Providers make_providers(const ProviderConfig& config, std::shared_ptr<HttpTransport> transport) {
    if (!transport) transport = std::make_shared<HttplibTransport>();
    Providers p;
    if (config.chat_mode == ProviderMode::Live) {
        p.chat = std::make_shared<LiveChatProvider>(config, transport);
    } else {
        p.chat = std::make_shared<MockChatProvider>(config);
    }
    if (config.image_mode == ProviderMode::Live) {
        p.image = std::make_shared<LiveImageProvider>(config, transport);
    } else {
        p.image = std::make_shared<MockImageProvider>(config);
    }
    return p;
}

}  // namespace dreamloom
