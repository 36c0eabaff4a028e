#pragma once

#include <stdexcept>
#include <string>

namespace tcwm {

// Shape or dimension mismatch between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Precondition on values violated (empty batch, action outside box, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Non-finite value encountered where a finite one is required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PlannerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid user configuration; the CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class IoErrorKind { missing_file, byte_length, unsupported_dtype, malformed_meta, write_failed };

class IoError : public std::runtime_error {
public:
    IoError(IoErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    IoErrorKind kind() const noexcept { return kind_; }

private:
    IoErrorKind kind_;
};

}  // namespace tcwm
