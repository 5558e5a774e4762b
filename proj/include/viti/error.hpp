#pragma once

#include <stdexcept>
#include <string>

namespace viti {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Paired inputs disagree on frame count or spatial dims.
struct AlignmentError : Error {
    using Error::Error;
};

// Invalid or mutually inconsistent configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// A call-contract violation: missing metadata, out-of-range timestep, bad stage order.
struct ContractError : Error {
    using Error::Error;
};

// An operation that needs a nonempty active mask got an empty one.
struct EmptyMaskError : Error {
    using Error::Error;
};

// Non-finite values or a numeric routine that cannot proceed.
struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

inline void check_align(bool ok, const std::string& msg) {
    if (!ok)
        throw AlignmentError(msg);
}

inline void check_config(bool ok, const std::string& msg) {
    if (!ok)
        throw ConfigError(msg);
}

inline void check_contract(bool ok, const std::string& msg) {
    if (!ok)
        throw ContractError(msg);
}

}  // namespace viti
