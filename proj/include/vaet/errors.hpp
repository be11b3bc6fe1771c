#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vaet {

/// Error classes map onto process exit codes in the CLI.
enum class ErrorCategory : int {
    parse = 2,
    numeric = 3,
    domain = 4,
    io = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }
    [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

/// Malformed or invalid configuration. Carries the offending line (0 when
/// not tied to a line) and key.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0, std::string key = {})
        : Error(ErrorCategory::parse, format(what, line, key)), line_(line), key_(std::move(key)) {}

    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    static std::string format(const std::string& what, int line, const std::string& key) {
        std::string out;
        if (line > 0) out += "line " + std::to_string(line) + ": ";
        if (!key.empty()) out += "'" + key + "': ";
        return out + what;
    }

    int line_;
    std::string key_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

/// Eigensolver failure or residual check failure.
class DecompositionError : public NumericError {
public:
    DecompositionError(const std::string& what, std::string fingerprint)
        : NumericError(what + " [matrix " + fingerprint + "]"), fingerprint_(std::move(fingerprint)) {}

    [[nodiscard]] const std::string& fingerprint() const noexcept { return fingerprint_; }

private:
    std::string fingerprint_;
};

class DynamicRangeError : public NumericError {
public:
    using NumericError::NumericError;
};

class IntegrationError : public NumericError {
public:
    using NumericError::NumericError;
};

class RootFindError : public NumericError {
public:
    using NumericError::NumericError;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorCategory::domain, what) {}
};

class ShapeError : public DomainError {
public:
    using DomainError::DomainError;
};

class SizingError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Raised for quantities that only exist on one side of the PT transition.
class PhaseDomainError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Invalid physical parameter (negative rate, truncation below 2, ...).
class ValidationError : public DomainError {
public:
    ValidationError(const std::string& what, std::string field)
        : DomainError(field + ": " + what), field_(std::move(field)) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Unknown axis or parameter name at an API boundary.
class InterfaceError : public DomainError {
public:
    using DomainError::DomainError;
};

class IoError : public Error {
public:
    IoError(const std::string& what, const std::string& path)
        : Error(ErrorCategory::io, path + ": " + what) {}
};

}  // namespace vaet
