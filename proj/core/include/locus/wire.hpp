#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "locus/backend.hpp"

namespace locus {

/// Backend wire protocol.
///
/// request:  {"known": [["class","bowl"],...], "target": "room", "candidates": [...]}
/// response: {"probabilities": [...]} aligned index-for-index with candidates.
///
/// Documents travel either one per line over a TCP stream or one per POST to /predict.
struct PredictRequest {
    std::vector<FeatureAssignment> known;
    std::string target;
    std::vector<std::string> candidates;

    bool operator==(const PredictRequest&) const = default;
};

/// Sums within this distance of 1 are renormalized (sums already within
/// kDistributionTolerance are kept as sent); anything further is rejected.
inline constexpr double kWireSumTolerance = 1e-6;

/// Single-line JSON document.
std::string encode_request(const PredictRequest& request);
PredictRequest decode_request(std::string_view document);

std::string encode_response(std::span<const double> probabilities);

/// Validates a response against the request candidates and renormalizes it.
/// Throws BackendError (malformed_response, candidate_mismatch, probability_sum).
std::vector<double> decode_response(std::string_view document, std::span<const std::string> candidates);

/// Serves one request document with `backend`; errors come back as `{"error": "..."}`.
std::string answer_request(const Backend& backend, std::string_view document);

/// Newline-delimited TCP server: each received line is passed to the handler
/// and the returned document is written back followed by '\n'. Binds to
/// 127.0.0.1 unless another host is given; port 0 picks a free port.
class LineServer {
public:
    using Handler = std::function<std::string(std::string_view)>;

    LineServer(Handler handler, std::uint16_t port = 0, std::string host = "127.0.0.1");
    ~LineServer();

    LineServer(const LineServer&) = delete;
    LineServer& operator=(const LineServer&) = delete;

    std::uint16_t port() const noexcept { return port_; }
    void stop();

private:
    void accept_loop();
    void serve_connection(int fd);

    Handler handler_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex workers_mutex_;
    std::vector<std::thread> workers_;
    std::vector<int> connections_;
};

/// Sends one line and reads one line back. Throws BackendError(unavailable | timeout).
std::string line_exchange(const std::string& host, std::uint16_t port, std::string_view line, std::chrono::milliseconds timeout);

}  // namespace locus
