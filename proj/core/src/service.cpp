#include "locus/service.hpp"

#include <httplib.h>

#include <ctime>
#include <nlohmann/json.hpp>
#include <random>

#include "locus/error.hpp"
#include "locus/serialize.hpp"
#include "locus/wire.hpp"

namespace locus {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

ServiceReply reply(int status, const ojson& body) { return {status, body.dump()}; }

ServiceReply error_reply(int status, std::string_view message) {
    ojson j;
    j["error"] = std::string(message);
    return reply(status, j);
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string_view awaiting_label(Awaiting a) {
    switch (a) {
        case Awaiting::answer: return "answer";
        case Awaiting::proceed: return "proceed";
        case Awaiting::nothing: return "nothing";
    }
    return "nothing";
}

std::optional<json> parse_body(std::string_view body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

SessionService::SessionService(const Backend& backend, const Lexicon& lexicon, ControllerConfig config, ServiceOptions options)
    : backend_(backend), lexicon_(lexicon), controller_(backend, config), options_(options) {
    salt_ = std::random_device{}();
    salt_ = (salt_ << 32) ^ std::random_device{}();
}

std::string SessionService::fresh_id() {
    std::uint64_t z = salt_ + 0x9E3779B97F4A7C15ull * ++counter_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%016llx-%llu", static_cast<unsigned long long>(z), static_cast<unsigned long long>(counter_));
    return buf;
}

std::shared_ptr<SessionService::Session> SessionService::find(std::string_view id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionService::session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

std::size_t SessionService::evict_idle(Clock::time_point now) {
    std::lock_guard lock(mu_);
    std::size_t dropped = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        std::unique_lock busy(it->second->busy, std::try_to_lock);
        if (busy.owns_lock() && now - it->second->last_used > options_.idle_timeout) {
            busy.unlock();
            it = sessions_.erase(it);
            ++dropped;
        } else {
            ++it;
        }
    }
    return dropped;
}

namespace {

// Acknowledges room predictions so the caller only sees blocking events.
ojson advance(const Controller& controller, SessionState& state, std::vector<Event>& log, Event ev) {
    ojson emitted = ojson::array();
    for (;;) {
        emitted.push_back(to_json(ev));
        log.push_back(ev);
        if (ev.kind != Event::Kind::stage_prediction) break;
        auto t = controller.step(std::move(state), Proceed{});
        state = std::move(t.state);
        ev = std::move(t.event);
    }
    return emitted;
}

}  // namespace

ServiceReply SessionService::create(std::string_view body) {
    evict_idle();
    auto j = parse_body(body);
    if (!j) return error_reply(400, "request body must be a JSON object");

    EvidenceSet evidence;
    if (j->contains("text")) {
        const auto& text = (*j)["text"];
        if (!text.is_string() || blank(text.get_ref<const std::string&>())) return error_reply(400, "text must be a non-empty string");
        evidence = extract_features(text.get_ref<const std::string&>(), lexicon_);
    } else if (j->contains("features")) {
        const auto& features = (*j)["features"];
        if (!features.is_array() || features.empty()) return error_reply(400, "features must be a non-empty array of [type, value] pairs");
        for (const auto& pair : features) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string())
                return error_reply(400, "features must be a non-empty array of [type, value] pairs");
            FeatureAssignment a{normalize_token(pair[0].get<std::string>()), normalize_token(pair[1].get<std::string>())};
            if (auto v = backend_.schema().validate(a)) return error_reply(422, v->message);
            if (is_target_type(a.type)) return error_reply(422, "initial evidence may not contain '" + a.type + "'");
            evidence.assign(backend_.schema(), std::move(a));
        }
    } else {
        return error_reply(400, "expected \"text\" or \"features\"");
    }

    auto session = std::make_shared<Session>();
    session->created_at = utc_now();
    session->last_used = Clock::now();
    ojson emitted;
    try {
        auto t = controller_.start(std::move(evidence));
        session->state = std::move(t.state);
        emitted = advance(controller_, session->state, session->events, std::move(t.event));
    } catch (const InvalidEvidence& e) {
        return error_reply(422, e.what());
    }
    const auto& last = session->events.back();
    if (last.kind == Event::Kind::fault) {
        ojson out;
        out["error"] = last.message;
        out["event"] = to_json(last);
        return reply(503, out);
    }

    std::string id;
    {
        std::lock_guard lock(mu_);
        id = fresh_id();
        sessions_.emplace(id, session);
    }
    ojson out;
    out["session_id"] = id;
    out["event"] = to_json(last);
    out["events"] = std::move(emitted);
    return reply(200, out);
}

ServiceReply SessionService::answer(std::string_view session_id, std::string_view body) {
    auto session = find(session_id);
    if (!session) return error_reply(404, "unknown session");
    std::unique_lock busy(session->busy, std::try_to_lock);
    if (!busy.owns_lock()) return error_reply(409, "session is busy");
    session->last_used = Clock::now();

    auto j = parse_body(body);
    if (!j) return error_reply(400, "request body must be a JSON object");
    Reply r;
    if (j->contains("skip")) {
        if (!(*j)["skip"].is_boolean() || !(*j)["skip"].get<bool>()) return error_reply(400, "skip must be true");
        r = Skip{};
    } else if (j->contains("value")) {
        const auto& v = (*j)["value"];
        if (!v.is_string() || blank(v.get_ref<const std::string&>())) return error_reply(400, "value must be a non-empty string");
        r = Answer{normalize_token(v.get<std::string>())};
    } else {
        return error_reply(400, "expected \"value\" or \"skip\"");
    }

    if (session->state.fault) return error_reply(409, "session has faulted: " + *session->state.fault);
    if (session->state.awaiting != Awaiting::answer) return error_reply(409, "session is not awaiting an answer");

    ojson emitted;
    try {
        auto t = controller_.step(session->state, r);
        session->state = std::move(t.state);
        emitted = advance(controller_, session->state, session->events, std::move(t.event));
    } catch (const SessionError& e) {
        return error_reply(e.kind() == SessionError::Kind::invalid_answer ? 422 : 409, e.what());
    }
    const auto& last = session->events.back();
    ojson out;
    out["session_id"] = std::string(session_id);
    out["event"] = to_json(last);
    out["events"] = std::move(emitted);
    if (last.kind == Event::Kind::fault) {
        out["error"] = last.message;
        return reply(503, out);
    }
    return reply(200, out);
}

ServiceReply SessionService::get(std::string_view session_id) {
    auto session = find(session_id);
    if (!session) return error_reply(404, "unknown session");
    std::lock_guard busy(session->busy);
    session->last_used = Clock::now();
    const auto& s = session->state;

    ojson out;
    out["session_id"] = std::string(session_id);
    out["created_at"] = session->created_at;
    out["stage"] = std::string(to_string(s.stage));
    out["awaiting"] = std::string(awaiting_label(s.awaiting));
    out["outstanding"] = s.outstanding ? ojson(*s.outstanding) : ojson(nullptr);
    out["evidence"] = to_json(s.evidence);
    out["budget_remaining"] = s.budget_remaining;
    out["predicted_room"] = s.predicted_room ? ojson(*s.predicted_room) : ojson(nullptr);
    out["fault"] = s.fault ? ojson(*s.fault) : ojson(nullptr);
    ojson events = ojson::array();
    for (const auto& e : session->events) events.push_back(to_json(e));
    out["events"] = std::move(events);
    ojson transcript = ojson::array();
    for (const auto& e : s.transcript) transcript.push_back(to_json(e));
    out["transcript"] = std::move(transcript);
    return reply(200, out);
}

ServiceReply SessionService::schema() const { return {200, serialize_schema(backend_.schema())}; }

// HTTP

namespace {

struct Host {
    httplib::Server server;
    std::thread thread;
    bool bound = false;

    int bind(const std::string& host, int port) {
        int bound_port = port;
        if (port == 0) {
            bound_port = server.bind_to_any_port(host);
            if (bound_port < 0) throw Error("cannot bind " + host);
        } else if (!server.bind_to_port(host, port)) {
            throw Error("cannot bind " + host + ":" + std::to_string(port));
        }
        bound = true;
        return bound_port;
    }
    void run() {
        if (!bound) throw Error("server is not bound");
        server.listen_after_bind();
    }
    void start() {
        if (!bound) throw Error("server is not bound");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    void stop() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
};

void send(httplib::Response& res, const ServiceReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
}

}  // namespace

struct HttpServer::Impl : Host {};

HttpServer::HttpServer(SessionService& service, std::optional<std::filesystem::path> static_dir) : impl_(std::make_unique<Impl>()) {
    auto& svr = impl_->server;
    svr.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) { send(res, service.create(req.body)); });
    svr.Post(R"(/sessions/([^/]+)/answers)", [&service](const httplib::Request& req, httplib::Response& res) {
        send(res, service.answer(req.matches[1].str(), req.body));
    });
    svr.Get(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) { send(res, service.get(req.matches[1].str())); });
    svr.Get("/schema", [&service](const httplib::Request&, httplib::Response& res) { send(res, service.schema()); });
    if (static_dir) {
        if (!std::filesystem::is_directory(*static_dir) || !svr.set_mount_point("/", static_dir->string()))
            throw Error("static directory not found: " + static_dir->string());
    }
}

HttpServer::~HttpServer() { stop(); }
int HttpServer::bind(const std::string& host, int port) { return impl_->bind(host, port); }
void HttpServer::run() { impl_->run(); }
void HttpServer::start() { impl_->start(); }
void HttpServer::stop() { impl_->stop(); }

struct BackendHttpServer::Impl : Host {};

BackendHttpServer::BackendHttpServer(const Backend& backend) : impl_(std::make_unique<Impl>()) {
    impl_->server.Post("/predict", [&backend](const httplib::Request& req, httplib::Response& res) {
        res.set_content(answer_request(backend, req.body), "application/json");
    });
}

BackendHttpServer::~BackendHttpServer() { stop(); }
int BackendHttpServer::bind(const std::string& host, int port) { return impl_->bind(host, port); }
void BackendHttpServer::run() { impl_->run(); }
void BackendHttpServer::start() { impl_->start(); }
void BackendHttpServer::stop() { impl_->stop(); }

}  // namespace locus
