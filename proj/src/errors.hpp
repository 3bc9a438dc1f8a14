// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clp {

enum class ErrorCode {
    InvalidArgument = 1,  // bad parameter value, names the offending field
    ShapeMismatch   = 2,  // vector/dimension mismatch
    Io              = 3,  // file read/write failure
    Numeric         = 4,  // non-finite value, names the offending term
    Unsupported     = 5,  // integration-mode features, format versions
    Internal        = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& message) {
    throw Error(ErrorCode::InvalidArgument, message);
}

[[noreturn]] inline void throw_shape(const std::string& message) {
    throw Error(ErrorCode::ShapeMismatch, message);
}

[[noreturn]] inline void throw_numeric(const std::string& message) {
    throw Error(ErrorCode::Numeric, message);
}

[[noreturn]] inline void throw_io(const std::string& message) {
    throw Error(ErrorCode::Io, message);
}

[[noreturn]] inline void throw_unsupported(const std::string& message) {
    throw Error(ErrorCode::Unsupported, message);
}

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw_shape(std::string(what) + ": dimension mismatch (" +
                    std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace clp
