#pragma once

#include <stdexcept>
#include <string>

namespace treebark {

/// Bad input or configuration: a precondition the caller can fix.
/// The CLI maps this family to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while doing the work (I/O, decoding, divergence).
/// The CLI maps this family to exit code 3.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace treebark
