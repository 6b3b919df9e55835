#include "locus/external.hpp"

#include <charconv>

#include <httplib.h>

#include "locus/error.hpp"
#include "locus/wire.hpp"

namespace locus {

Endpoint Endpoint::parse(std::string_view address, bool listening) {
    Endpoint e;
    auto scheme_end = address.find("://");
    if (scheme_end == std::string_view::npos) throw std::invalid_argument("endpoint must look like http://host:port or tcp://host:port");
    auto scheme = address.substr(0, scheme_end);
    if (scheme == "http") e.transport = Transport::http;
    else if (scheme == "tcp") e.transport = Transport::tcp;
    else throw std::invalid_argument("unsupported endpoint scheme '" + std::string(scheme) + "'");

    auto rest = address.substr(scheme_end + 3);
    auto slash = rest.find('/');
    if (slash != std::string_view::npos) {
        if (e.transport == Transport::tcp) throw std::invalid_argument("tcp endpoints take no path");
        e.path = std::string(rest.substr(slash));
        rest = rest.substr(0, slash);
    }
    auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) throw std::invalid_argument("endpoint needs host:port");
    e.host = std::string(rest.substr(0, colon));
    auto port_text = rest.substr(colon + 1);
    unsigned port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || (port == 0 && !listening) || port > 65535)
        throw std::invalid_argument("invalid endpoint port '" + std::string(port_text) + "'");
    e.port = static_cast<std::uint16_t>(port);
    return e;
}

std::string Endpoint::to_string() const {
    if (transport == Transport::tcp) return "tcp://" + host + ":" + std::to_string(port);
    return "http://" + host + ":" + std::to_string(port) + path;
}

namespace {

std::string http_exchange(const Endpoint& endpoint, const std::string& body, const ExternalOptions& options) {
    using Kind = BackendError::Kind;
    httplib::Client client(endpoint.host, endpoint.port);
    const auto secs = static_cast<time_t>(options.timeout.count() / 1000);
    const auto usecs = static_cast<time_t>((options.timeout.count() % 1000) * 1000);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(endpoint.path, body, "application/json");
    if (!res) {
        auto err = res.error();
        auto kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) ? Kind::timeout : Kind::unavailable;
        throw BackendError(kind, "backend " + endpoint.to_string() + ": " + httplib::to_string(err));
    }
    if (res->status != 200)
        throw BackendError(Kind::unavailable, "backend " + endpoint.to_string() + " answered HTTP " + std::to_string(res->status));
    return res->body;
}

}  // namespace

Distribution external_predict(const Endpoint& endpoint, const FeatureSchema& schema, const EvidenceSet& evidence,
                              std::string_view target, const ExternalOptions& options) {
    check_predict_inputs(schema, evidence, target);
    PredictRequest request{evidence.assignments(), std::string(target), schema.values(target)};
    const auto body = encode_request(request);
    const auto reply = endpoint.transport == Endpoint::Transport::http ? http_exchange(endpoint, body, options)
                                                                       : line_exchange(endpoint.host, endpoint.port, body, options.timeout);
    auto probabilities = decode_response(reply, request.candidates);
    return Distribution{request.target, std::move(request.candidates), std::move(probabilities)};
}

ExternalBackend::ExternalBackend(SchemaPtr schema, Endpoint endpoint, ExternalOptions options)
    : Backend(std::move(schema)), endpoint_(std::move(endpoint)), options_(options) {}

Distribution ExternalBackend::do_predict(const EvidenceSet& evidence, const FeatureType& target) const {
    return external_predict(endpoint_, schema(), evidence, target.name, options_);
}

}  // namespace locus
