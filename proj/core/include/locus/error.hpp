#pragma once

#include <stdexcept>
#include <string>

namespace locus {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent schema, alias table or schema-invalid assignment.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Malformed dataset files (instances, annotations, expressions, model files).
class DataError : public Error {
public:
    using Error::Error;
};

/// Evidence that violates the predict() precondition.
class InvalidEvidence : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    enum class Kind {
        unavailable,
        timeout,
        malformed_response,
        probability_sum,
        candidate_mismatch,
    };

    BackendError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class SessionError : public Error {
public:
    enum class Kind {
        invalid_answer,  // value outside the outstanding feature's vocabulary
        not_awaiting,    // reply kind does not match what the session waits for
        finished,        // session already done
        faulted,         // session hit a backend fault earlier
    };

    SessionError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace locus
