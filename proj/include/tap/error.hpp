#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tap {

enum class ErrorKind {
    ZeroVector,
    DimensionMismatch,
    EmptyVector,
    InvalidConfig,
    InvalidProfile,
    EndpointUnreachable,
    MalformedResponse,
    ParseError,
    UnknownClassId,
    EmptyDataset,
    FormatError,
    TruncatedFile,
    NonFiniteValue,
    InvalidSmoothing,
    ShapeMismatch,
    NonFiniteLoss,
    MissingLabels,
    MissingInput,
    EmptyReport,
    IoError,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit code without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message);

    // 1-based line number in the offending file.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class FetchError : public Error {
public:
    FetchError(ErrorKind kind, std::vector<std::string> failed_prompt_ids, const std::string& message);

    const std::vector<std::string>& failed_prompt_ids() const noexcept { return failed_; }

private:
    std::vector<std::string> failed_;
};

class NonFiniteLossError : public Error {
public:
    explicit NonFiniteLossError(int step);

    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace tap
