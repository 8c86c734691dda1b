#pragma once

#include <stdexcept>
#include <string>

namespace mimo {

// Invalid argument or precondition violation (bad geometry, negative rate, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Factorization / positive-definiteness failures.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Instance too large or too few samples.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Malformed model / dataset / config file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mimo
