#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dreamloom {

using HeaderList = std::vector<std::pair<std::string, std::string>>;

struct HttpRequest {
    std::string method = "POST";
    std::string url;
    HeaderList headers;
    std::string body;

    std::string header(std::string_view name) const;
};

struct HttpResponse {
    int status = 0;
    HeaderList headers;
    std::string body;

    std::string header(std::string_view name) const;
};

// Connection-level failure: nothing usable came back.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, bool timed_out)
        : std::runtime_error(what), timed_out_(timed_out) {}
    bool timed_out() const noexcept { return timed_out_; }

private:
    bool timed_out_;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// Throws TransportError when no response arrives within timeout.
    virtual HttpResponse send(const HttpRequest& request, std::chrono::milliseconds timeout) = 0;
};

/// Plain HTTP and, when built with OpenSSL, HTTPS.
class HttplibTransport final : public HttpTransport {
public:
    HttpResponse send(const HttpRequest& request, std::chrono::milliseconds timeout) override;
};

// Captures every outgoing request before handing it to a responder. Used to
// assert on exactly what would have gone over the wire.
class RecordingTransport final : public HttpTransport {
public:
    using Responder = std::function<HttpResponse(const HttpRequest&, std::chrono::milliseconds)>;

    explicit RecordingTransport(Responder responder) : responder_(std::move(responder)) {}

    HttpResponse send(const HttpRequest& request, std::chrono::milliseconds timeout) override;

    std::vector<HttpRequest> requests() const;
    std::size_t request_count() const;
    void clear();

private:
    Responder responder_;
    mutable std::mutex mutex_;
    std::vector<HttpRequest> requests_;
};

struct ParsedUrl {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string path;  // always starts with '/'
};

/// Throws std::invalid_argument for anything but http(s)://host[:port][/path].
ParsedUrl parse_url(std::string_view url);

}  // namespace dreamloom
