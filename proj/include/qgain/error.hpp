#pragma once

#include <stdexcept>
#include <string>

namespace qgain {

/// Raised when inputs or configuration violate a documented precondition.
/// The CLI maps it to exit status 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot produce a trustworthy number
/// (singular system, non-finite objective value, ...). CLI exit status 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ValidationError(message);
    }
}

} // namespace qgain
