#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace putback {

enum class ErrorCode {
    UnknownAttribute,
    UnknownTable,
    AmbiguousAttribute,
    DuplicateAttribute,
    TypeMismatch,
    SchemaMismatch,
    KeyViolation,
    NotNullViolation,
    MissingDeleteTarget,
    InvalidSchema,
    SyntaxError,
    DuplicateBranchLiteral,
    ArityMismatch,
    ValidationFailed,
    EmptyAnswer,
    DomainTooLarge,
    UnknownPeer,
    UnknownArea,
    MalformedDelta,
    ScenarioParseError,
    InvariantViolation,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. Rejections of a put are not
/// errors and travel through PutOutcome instead.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

/// Parse errors additionally carry a 1-based source position.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& message, int line, int column)
        : Error(ErrorCode::SyntaxError,
                message + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

}  // namespace putback
