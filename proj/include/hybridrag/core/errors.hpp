#pragma once

#include <stdexcept>
#include <string>

namespace hybridrag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or violated preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Wire-level violations: unknown session, malformed message, unissued seq.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

class BackendTimeout : public BackendError {
public:
    using BackendError::BackendError;
};

class MemoryGenerationFailed : public Error {
public:
    /// `cause` is machine-readable: "no_bullets", "backend_error", "backend_timeout".
    MemoryGenerationFailed(const std::string& msg, std::string cause = "no_bullets")
        : Error(msg), cause_(std::move(cause)) {}
    const std::string& cause() const noexcept { return cause_; }

private:
    std::string cause_;
};

class SuggestionFailed : public Error {
public:
    using Error::Error;
};

/// The backend lacks an optional capability (e.g. log-probabilities).
class CapabilityError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

} // namespace hybridrag
