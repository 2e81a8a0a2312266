#pragma once

#include <stdexcept>
#include <string>

namespace krca {

enum class ErrorCode {
    Io,
    Parse,
    Config,
    Contract,
    Ambiguous,
    IncidentNotFound,
    UnknownKind,
    StageFailure,
    ValidationFailure,
    State,
    InvalidArgument,
    Internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string message) {
    throw Error(code, std::move(message));
}

}  // namespace krca
