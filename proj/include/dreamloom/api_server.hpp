#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dreamloom/studio.hpp"

namespace httplib {
class Server;
}

namespace dreamloom {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    // "*" allows any origin; otherwise matching Origin headers are echoed.
    std::vector<std::string> cors_origins{"*"};
    std::chrono::milliseconds drain_timeout{std::chrono::seconds{130}};
};

struct BindAddress {
    std::string host;
    int port = 0;
};

/// "host:port", ":port" or "port". Throws Error(InvalidRequest).
BindAddress parse_bind_address(std::string_view text);

// HTTP/JSON front end over a Studio. Endpoints are listed in docs/api.md.
class ApiServer {
public:
    ApiServer(Studio& studio, ServerConfig config);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds the listening socket and returns the port. Throws Error(BindFailure).
    int bind();
    /// Serves until stop(); bind() first.
    void run();
    /// bind() and run() on a background thread.
    int start();
    /// Refuses new requests with a retryable Unavailable error, waits for
    /// in-flight ones up to drain_timeout, then closes the socket.
    void stop();

    int port() const noexcept { return port_; }
    std::size_t in_flight() const noexcept { return in_flight_.load(); }

private:
    void install_routes();

    Studio& studio_;
    ServerConfig config_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<bool> draining_{false};
    std::atomic<std::size_t> in_flight_{0};
    std::mutex drain_mutex_;
    std::condition_variable drain_cv_;
};

}  // namespace dreamloom
