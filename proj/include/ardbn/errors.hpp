#pragma once

#include <stdexcept>
#include <string>

namespace ardbn {

/// Raised when a caller breaks an operation's precondition: mismatched
/// dimensions, out-of-range indices, probabilities outside [0,1].
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised when training produces a non-finite loss or parameter.
class NumericFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed configuration files or values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw ContractViolation(message);
}

} // namespace detail
} // namespace ardbn
