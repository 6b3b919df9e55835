#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "locus/backend.hpp"
#include "locus/controller.hpp"
#include "locus/parsing.hpp"

namespace locus {

struct ServiceReply {
    int status = 200;
    std::string body;  // JSON
};

struct ServiceOptions {
    std::chrono::seconds idle_timeout{30 * 60};
};

/// In-memory clarification sessions behind a JSON request/response surface.
///
/// Room stage predictions are acknowledged automatically, so every reply
/// carries the event that now blocks the session ("event") along with all
/// events emitted on the way there ("events").
///
/// Status codes: 400 malformed request, 404 unknown session, 409 session
/// busy or not awaiting an answer, 422 invalid feature or answer value,
/// 503 backend failure.
class SessionService {
public:
    using Clock = std::chrono::steady_clock;

    SessionService(const Backend& backend, const Lexicon& lexicon, ControllerConfig config, ServiceOptions options = {});

    /// {"text": "..."} or {"features": [[type, value], ...]}
    ServiceReply create(std::string_view body);
    /// {"value": "..."} or {"skip": true}
    ServiceReply answer(std::string_view session_id, std::string_view body);
    ServiceReply get(std::string_view session_id);
    ServiceReply schema() const;

    std::size_t session_count() const;
    /// Drops sessions idle longer than the timeout; returns how many.
    std::size_t evict_idle(Clock::time_point now = Clock::now());

    const Controller& controller() const noexcept { return controller_; }

private:
    struct Session {
        std::mutex busy;
        SessionState state;
        std::vector<Event> events;
        std::string created_at;
        Clock::time_point last_used;
    };

    std::shared_ptr<Session> find(std::string_view id);
    std::string fresh_id();

    const Backend& backend_;
    const Lexicon& lexicon_;
    Controller controller_;
    ServiceOptions options_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>, std::less<>> sessions_;
    std::uint64_t counter_ = 0;
    std::uint64_t salt_ = 0;
};

/// HTTP front end for a SessionService:
///   POST /sessions, POST /sessions/{id}/answers, GET /sessions/{id}, GET /schema.
/// Optionally serves a directory of static files at "/".
class HttpServer {
public:
    explicit HttpServer(SessionService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds (port 0 picks a free port) and returns the bound port. Throws Error.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Requires bind().
    void run();
    /// run() on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Serves a backend over HTTP with the JSON wire protocol at POST /predict.
class BackendHttpServer {
public:
    explicit BackendHttpServer(const Backend& backend);
    ~BackendHttpServer();

    BackendHttpServer(const BackendHttpServer&) = delete;
    BackendHttpServer& operator=(const BackendHttpServer&) = delete;

    int bind(const std::string& host, int port);
    void run();
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace locus
