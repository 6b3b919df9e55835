#include "locus/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "locus/error.hpp"

namespace locus {

using nlohmann::json;
using nlohmann::ordered_json;

std::string encode_request(const PredictRequest& request) {
    ordered_json known = ordered_json::array();
    for (const auto& a : request.known) known.push_back({a.type, a.value});
    ordered_json doc;
    doc["known"] = std::move(known);
    doc["target"] = request.target;
    doc["candidates"] = request.candidates;
    return doc.dump();
}

PredictRequest decode_request(std::string_view document) {
    try {
        auto doc = json::parse(document);
        PredictRequest r;
        for (const auto& pair : doc.at("known")) {
            if (!pair.is_array() || pair.size() != 2) throw DataError("request: 'known' entries must be [type, value] pairs");
            r.known.push_back({pair[0].get<std::string>(), pair[1].get<std::string>()});
        }
        r.target = doc.at("target").get<std::string>();
        r.candidates = doc.at("candidates").get<std::vector<std::string>>();
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("request: ") + e.what());
    }
}

std::string encode_response(std::span<const double> probabilities) {
    return json{{"probabilities", std::vector<double>(probabilities.begin(), probabilities.end())}}.dump();
}

std::vector<double> decode_response(std::string_view document, std::span<const std::string> candidates) {
    using Kind = BackendError::Kind;
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw BackendError(Kind::malformed_response, std::string("response is not a JSON document: ") + e.what());
    }
    if (!doc.is_object()) throw BackendError(Kind::malformed_response, "response must be an object");
    if (doc.contains("error")) throw BackendError(Kind::malformed_response, "backend reported: " + doc["error"].dump());
    if (!doc.contains("probabilities") || !doc["probabilities"].is_array())
        throw BackendError(Kind::malformed_response, "response lacks a 'probabilities' list");
    if (doc.contains("candidates")) {
        const auto& echoed = doc["candidates"];
        bool same = echoed.is_array() && echoed.size() == candidates.size();
        for (std::size_t i = 0; same && i < candidates.size(); ++i) same = echoed[i].is_string() && echoed[i].get<std::string>() == candidates[i];
        if (!same) throw BackendError(Kind::candidate_mismatch, "response candidates differ from the requested order");
    }
    const auto& list = doc["probabilities"];
    if (list.size() != candidates.size())
        throw BackendError(Kind::candidate_mismatch, "response has " + std::to_string(list.size()) + " probabilities for " +
                                                         std::to_string(candidates.size()) + " candidates");
    std::vector<double> p;
    p.reserve(list.size());
    double sum = 0.0;
    for (const auto& x : list) {
        if (!x.is_number()) throw BackendError(Kind::malformed_response, "probabilities must be numbers");
        double v = x.get<double>();
        if (!std::isfinite(v) || v < 0.0) throw BackendError(Kind::malformed_response, "probabilities must be finite and >= 0");
        p.push_back(v);
        sum += v;
    }
    if (std::abs(sum - 1.0) > kWireSumTolerance)
        throw BackendError(Kind::probability_sum, "response probabilities sum to " + std::to_string(sum));
    if (std::abs(sum - 1.0) > kDistributionTolerance)
        for (auto& v : p) v /= sum;
    return p;
}

std::string answer_request(const Backend& backend, std::string_view document) {
    try {
        auto request = decode_request(document);
        const auto target = normalize_token(request.target);
        if (request.candidates != backend.schema().values(target))
            return json{{"error", "candidate list does not match the backend schema for '" + target + "'"}}.dump();
        auto evidence = EvidenceSet::from_pairs(backend.schema(), request.known);
        auto d = backend.predict(evidence, target);
        return encode_response(d.probabilities);
    } catch (const std::exception& e) {
        return json{{"error", e.what()}}.dump();
    }
}

// ---------------------------------------------------------------------------

namespace {

bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

}  // namespace

LineServer::LineServer(Handler handler, std::uint16_t port, std::string host) : handler_(std::move(handler)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw Error("invalid listen address '" + host + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
        std::string msg = std::strerror(errno);
        ::close(listen_fd_);
        throw Error("cannot listen on " + host + ":" + std::to_string(port) + ": " + msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

LineServer::~LineServer() { stop(); }

void LineServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(workers_mutex_);
        for (int fd : connections_) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
}

void LineServer::accept_loop() {
    while (running_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        int ready = ::poll(&pfd, 1, 100);
        if (ready <= 0) continue;
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        std::lock_guard lock(workers_mutex_);
        if (!running_) {
            ::close(fd);
            break;
        }
        connections_.push_back(fd);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void LineServer::serve_connection(int fd) {
    std::string buffer;
    char chunk[4096];
    while (running_) {
        auto nl = buffer.find('\n');
        if (nl == std::string::npos) {
            ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            buffer.append(chunk, static_cast<std::size_t>(n));
            continue;
        }
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!send_all(fd, handler_(line) + "\n")) break;
    }
    std::lock_guard lock(workers_mutex_);
    std::erase(connections_, fd);
    ::close(fd);
}

std::string line_exchange(const std::string& host, std::uint16_t port, std::string_view line, std::chrono::milliseconds timeout) {
    using Kind = BackendError::Kind;
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto where = host + ":" + std::to_string(port);
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr)
        throw BackendError(Kind::unavailable, "cannot resolve backend host " + where);
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);

    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) throw BackendError(Kind::unavailable, std::string("socket: ") + std::strerror(errno));
    std::unique_ptr<int, void (*)(int*)> fd_guard(&fd, [](int* p) { ::close(*p); });

    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);

    if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        if (errno == EINPROGRESS || errno == EAGAIN) throw BackendError(Kind::timeout, "timed out connecting to " + where);
        throw BackendError(Kind::unavailable, "cannot connect to backend " + where + ": " + std::strerror(errno));
    }
    std::string payload(line);
    payload.push_back('\n');
    if (!send_all(fd, payload)) throw BackendError(Kind::unavailable, "failed to send request to " + where);

    std::string reply;
    char chunk[4096];
    for (;;) {
        ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) throw BackendError(Kind::timeout, "timed out waiting for " + where);
        if (n <= 0) break;
        reply.append(chunk, static_cast<std::size_t>(n));
        if (reply.find('\n') != std::string::npos) break;
    }
    auto nl = reply.find('\n');
    if (nl == std::string::npos) throw BackendError(Kind::malformed_response, "connection closed before a full response line from " + where);
    reply.resize(nl);
    return reply;
}

}  // namespace locus
