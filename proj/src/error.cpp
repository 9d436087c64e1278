#include "tap/error.hpp"

namespace tap {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::EmptyVector: return "EmptyVector";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::InvalidProfile: return "InvalidProfile";
        case ErrorKind::EndpointUnreachable: return "EndpointUnreachable";
        case ErrorKind::MalformedResponse: return "MalformedResponse";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::UnknownClassId: return "UnknownClassId";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::TruncatedFile: return "TruncatedFile";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::InvalidSmoothing: return "InvalidSmoothing";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::MissingLabels: return "MissingLabels";
        case ErrorKind::MissingInput: return "MissingInput";
        case ErrorKind::EmptyReport: return "EmptyReport";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

FetchError::FetchError(ErrorKind kind, std::vector<std::string> failed_prompt_ids, const std::string& message)
    : Error(kind, message), failed_(std::move(failed_prompt_ids)) {}

NonFiniteLossError::NonFiniteLossError(int step)
    : Error(ErrorKind::NonFiniteLoss, "loss became non-finite at step " + std::to_string(step)), step_(step) {}

}  // namespace tap
