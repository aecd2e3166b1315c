#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dreamloom/http_transport.hpp"
#include "dreamloom/metaphor.hpp"

namespace dreamloom {

enum class ProviderMode { Live, Mock };
enum class ChatPurpose { Suggestion, Depiction };

std::string_view to_string(ProviderMode mode) noexcept;
/// "live" or "mock"; throws Error(InvalidRequest) otherwise.
ProviderMode parse_provider_mode(std::string_view text);

struct ProviderConfig {
    ProviderMode chat_mode = ProviderMode::Mock;
    ProviderMode image_mode = ProviderMode::Mock;

    std::string chat_base_url = "https://api.openai.com/v1";
    std::string chat_api_key;
    std::string chat_model = "gpt-3.5-turbo";
    std::string image_base_url;
    std::string image_path = "/generate";

    std::chrono::milliseconds deadline{std::chrono::seconds{120}};
    int max_retries = 2;
    std::chrono::milliseconds backoff_initial{250};
    double backoff_multiplier = 2.0;
    std::size_t max_concurrency = 4;

    double suggestion_temperature = 1.0;
    double depiction_temperature = 0.7;
    int suggestion_max_tokens = 256;
    int depiction_max_tokens = 200;

    int image_width = 512;
    int image_height = 512;
    int image_steps = 30;
    // Forwarded to the image service only when set.
    std::optional<std::string> negative_prompt;
    std::optional<double> guidance_scale;
    std::optional<std::string> sampler;

    std::filesystem::path mock_fixtures;  // empty: compiled-in fixtures
    std::chrono::milliseconds mock_latency{0};

    using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
    /// Defaults overridden by MM_* environment variables.
    /// Throws Error(InvalidRequest) for malformed values.
    static ProviderConfig from_env(const EnvLookup& lookup = {});
};

struct ChatRequest {
    PromptText prompt;
    double temperature = 1.0;
    int max_tokens = 256;
    ChatPurpose purpose = ChatPurpose::Suggestion;
};

/// Temperature and token budget come from the config for the purpose.
ChatRequest make_chat_request(const ProviderConfig& config, PromptText prompt, ChatPurpose purpose);

struct ImageRequest {
    PromptText prompt;
    int width = 512;
    int height = 512;
    int steps = 30;
    std::optional<std::uint64_t> seed;
};

ImageRequest make_image_request(const ProviderConfig& config, PromptText prompt,
                                std::optional<std::uint64_t> seed = std::nullopt);

struct ImageResult {
    std::string image_ref;  // SHA-256 of bytes
    std::string bytes;      // encoded exactly as received
    std::map<std::string, std::string> provider_meta;
};

enum class HealthState { NotConfigured, Configured, Reachable, Degraded };
std::string_view to_string(HealthState state) noexcept;

struct ProviderHealth {
    std::string provider;  // "chat" or "image"
    ProviderMode mode = ProviderMode::Mock;
    HealthState state = HealthState::NotConfigured;
    std::string detail;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// Throws Error(ProviderTimeout | ProviderRejected | NotConfigured | Unavailable).
    virtual std::string chat_complete(const ChatRequest& request) = 0;
    virtual ProviderHealth health_check() = 0;
};

class ImageProvider {
public:
    virtual ~ImageProvider() = default;
    /// Throws Error(ProviderTimeout | ProviderRejected | NotConfigured |
    /// BadImagePayload | Unavailable).
    virtual ImageResult generate_image(const ImageRequest& request) = 0;
    virtual ProviderHealth health_check() = 0;
};

// Bounds in-flight requests per provider; waiting respects the deadline.
class ConcurrencyGate {
public:
    explicit ConcurrencyGate(std::size_t limit) : available_(limit == 0 ? 1 : limit) {}

    class Permit {
    public:
        explicit Permit(ConcurrencyGate* gate) : gate_(gate) {}
        Permit(Permit&& other) noexcept : gate_(std::exchange(other.gate_, nullptr)) {}
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit();

    private:
        ConcurrencyGate* gate_;
    };

    /// Throws Error(ProviderTimeout) if no slot frees up before deadline.
    Permit acquire(std::chrono::steady_clock::time_point deadline);

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t available_;
};

// OpenAI-compatible chat completion client.
class LiveChatProvider final : public ChatProvider {
public:
    LiveChatProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport);
    std::string chat_complete(const ChatRequest& request) override;
    ProviderHealth health_check() override;

private:
    ProviderConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    ConcurrencyGate gate_;
};

// JSON inference endpoint: {prompt, width, height, num_inference_steps, seed?}.
// Accepts a raw image body or JSON carrying base64 under "image" or "images".
class LiveImageProvider final : public ImageProvider {
public:
    LiveImageProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport);
    ImageResult generate_image(const ImageRequest& request) override;
    ProviderHealth health_check() override;

    /// The request body the service receives for req.
    std::string request_body(const ImageRequest& req) const;

private:
    ProviderConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    ConcurrencyGate gate_;
};

// Answers from fixtures: the first entry whose purpose matches and whose
// "match" substrings all occur in the prompt, else the purpose's default.
class MockChatProvider final : public ChatProvider {
public:
    struct Fixture {
        ChatPurpose purpose = ChatPurpose::Suggestion;
        std::vector<std::string> match;
        std::string response;
    };

    /// Uses config.mock_fixtures, or the compiled-in set when empty.
    explicit MockChatProvider(const ProviderConfig& config);
    MockChatProvider(std::vector<Fixture> fixtures, std::map<ChatPurpose, std::string> defaults,
                     std::chrono::milliseconds latency, std::chrono::milliseconds deadline);

    /// Throws Error(InvalidTemplate) for a malformed fixture document.
    static std::pair<std::vector<Fixture>, std::map<ChatPurpose, std::string>> parse_fixtures(
        std::string_view json_text);

    std::string chat_complete(const ChatRequest& request) override;
    ProviderHealth health_check() override;

private:
    std::vector<Fixture> fixtures_;
    std::map<ChatPurpose, std::string> defaults_;
    std::chrono::milliseconds latency_;
    std::chrono::milliseconds deadline_;
};

// Procedural images: 2-4 solid horizontal bands whose colours and heights
// derive from the SHA-256 of the prompt, size and seed. Same input, same bytes.
class MockImageProvider final : public ImageProvider {
public:
    explicit MockImageProvider(const ProviderConfig& config);
    ImageResult generate_image(const ImageRequest& request) override;
    ProviderHealth health_check() override;

    struct Band {
        Color color;
        int rows = 0;
    };
    /// The band plan generate_image renders; exposed as palette ground truth.
    static std::vector<Band> plan_bands(const ImageRequest& request);

private:
    std::chrono::milliseconds latency_;
    std::chrono::milliseconds deadline_;
};

struct Providers {
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<ImageProvider> image;

    std::vector<ProviderHealth> health_check() const;
};

/// Builds each provider for its configured mode. Live providers share
/// transport (an HttplibTransport when null).
Providers make_providers(const ProviderConfig& config,
                         std::shared_ptr<HttpTransport> transport = nullptr);

}  // namespace dreamloom
