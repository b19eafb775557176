// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/service.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace mrta
{

struct HttpServerOptions
{
    // Static files served under "/" (the browser client), when set.
    std::optional<std::filesystem::path> web_root;
    std::chrono::milliseconds heartbeat {15000};
};

/// HTTP facade over a SessionService:
///   POST /sessions, GET /sessions/{id}, POST /sessions/{id}/messages, GET /sessions/{id}/events?from_seq=,
///   POST /sessions/{id}/steps/{n}, GET /manuals, GET /tools.
/// Errors are {"error": code, "message": text} with 400, 404, 409 or 500.
class HttpServer
{
  public:
    explicit HttpServer(SessionService& service, HttpServerOptions options = {});
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// False when the address cannot be bound. Port 0 picks a free port.
    bool bind(const std::string& host, int port);
    [[nodiscard]] int port() const noexcept { return _port; }

    /// Serves until stop(). bind() must have succeeded.
    void run();
    /// run() on a background thread; returns once the server accepts connections.
    void start();
    /// Ends open event streams and stops serving. Idempotent and safe from a signal-watching thread.
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
    SessionService& _service;
    HttpServerOptions _options;
    int _port = 0;
    std::atomic<bool> _stopping {false};
    std::thread _thread;
};

/// HTTP status for an error code.
[[nodiscard]] int http_status_for(ErrorCode code) noexcept;

} // namespace mrta
