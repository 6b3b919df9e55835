#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

#include "locus/backend.hpp"

namespace locus {

/// Address of an external backend: `http://host:port[/path]` (one document per
/// POST, path defaults to /predict) or `tcp://host:port` (newline-delimited).
struct Endpoint {
    enum class Transport { http, tcp };

    Transport transport = Transport::http;
    std::string host;
    std::uint16_t port = 0;
    std::string path = "/predict";

    /// Port 0 is accepted only when `listening` (bind to any free port).
    static Endpoint parse(std::string_view address, bool listening = false);
    std::string to_string() const;
};

struct ExternalOptions {
    std::chrono::milliseconds timeout{10000};
};

/// One request/response round trip; validates and renormalizes the response.
Distribution external_predict(const Endpoint& endpoint, const FeatureSchema& schema, const EvidenceSet& evidence,
                              std::string_view target, const ExternalOptions& options = {});

/// Client for model servers speaking the wire protocol. Each call opens its own
/// connection, so concurrent callers do not share state.
class ExternalBackend final : public Backend {
public:
    ExternalBackend(SchemaPtr schema, Endpoint endpoint, ExternalOptions options = {});

    BackendKind kind() const noexcept override { return BackendKind::external; }
    std::string name() const override { return "external(" + endpoint_.to_string() + ")"; }
    const Endpoint& endpoint() const noexcept { return endpoint_; }

protected:
    Distribution do_predict(const EvidenceSet& evidence, const FeatureType& target) const override;

private:
    Endpoint endpoint_;
    ExternalOptions options_;
};

}  // namespace locus
