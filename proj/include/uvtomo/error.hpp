#pragma once

#include <stdexcept>
#include <string>

namespace uvtomo {

// Bad argument values (sizes, ranges, missing inputs).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values, divergence, underflow.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace uvtomo
