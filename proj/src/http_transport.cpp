#include "dreamloom/http_transport.hpp"

#include <httplib.h>

#include <charconv>

#include "dreamloom/util.hpp"

namespace dreamloom {

namespace {

std::string find_header(const HeaderList& headers, std::string_view name) {
    const std::string wanted = to_lower(name);
    for (const auto& [k, v] : headers) {
        if (to_lower(k) == wanted) return v;
    }
    return {};
}

}  // namespace

std::string HttpRequest::header(std::string_view name) const {
    return find_header(headers, name);
}

std::string HttpResponse::header(std::string_view name) const {
    return find_header(headers, name);
}

ParsedUrl parse_url(std::string_view url) {
    ParsedUrl out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw std::invalid_argument("url has no scheme: " + std::string(url));
    }
    out.scheme = to_lower(url.substr(0, scheme_end));
    if (out.scheme != "http" && out.scheme != "https") {
        throw std::invalid_argument("unsupported url scheme: " + out.scheme);
    }
    std::string_view rest = url.substr(scheme_end + 3);
    const auto path_start = rest.find('/');
    std::string_view authority = rest.substr(0, path_start);
    out.path = path_start == std::string_view::npos ? "/" : std::string(rest.substr(path_start));
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        const std::string_view port_text = authority.substr(colon + 1);
        int port = 0;
        auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port <= 0 || port > 65535) {
            throw std::invalid_argument("bad port in url: " + std::string(url));
        }
        out.port = port;
        authority = authority.substr(0, colon);
    } else {
        out.port = out.scheme == "https" ? 443 : 80;
    }
    if (authority.empty()) {
        throw std::invalid_argument("url has no host: " + std::string(url));
    }
    out.host = std::string(authority);
    return out;
}

HttpResponse HttplibTransport::send(const HttpRequest& request, std::chrono::milliseconds timeout) {
    ParsedUrl url;
    try {
        url = parse_url(request.url);
    } catch (const std::invalid_argument& e) {
        throw TransportError(e.what(), false);
    }
    const std::string origin = url.scheme + "://" + url.host + ":" + std::to_string(url.port);
    httplib::Client client(origin);
    if (!client.is_valid()) {
        throw TransportError("cannot create client for " + origin +
                                 " (https requires a build with OpenSSL)",
                             false);
    }
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
        if (to_lower(k) == "content-type") {
            content_type = v;
        } else {
            headers.emplace(k, v);
        }
    }

    httplib::Result result;
    if (request.method == "GET") {
        result = client.Get(url.path, headers);
    } else if (request.method == "POST") {
        result = client.Post(url.path, headers, request.body, content_type);
    } else {
        throw TransportError("unsupported method " + request.method, false);
    }
    if (!result) {
        const auto err = result.error();
        const bool timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                               err == httplib::Error::ConnectionTimeout;
        throw TransportError(httplib::to_string(err), timed_out);
    }
    HttpResponse response;
    response.status = result->status;
    response.body = result->body;
    for (const auto& [k, v] : result->headers) {
        response.headers.emplace_back(k, v);
    }
    return response;
}

HttpResponse RecordingTransport::send(const HttpRequest& request, std::chrono::milliseconds timeout) {
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
    }
    return responder_(request, timeout);
}

std::vector<HttpRequest> RecordingTransport::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::size_t RecordingTransport::request_count() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
}

void RecordingTransport::clear() {
    std::lock_guard lock(mutex_);
    requests_.clear();
}

}  // namespace dreamloom
