// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrta
{

enum class ErrorCode
{
    SchemaError,
    EmptyManual,
    IoError,
    NoDetectionFound,
    DegenerateBox,
    UnparseableVerdict,
    BackendError,
    HttpError,
    NonOkStatus,
    ConfigError,
    ScriptExhausted,
    MalformedToolBlock,
    TranscriptParseError,
    EmptyOutput,
    LengthMismatch,
    InvalidArgument,
    StepOutOfRange,
    UnknownManual,
    UnknownSession,
    SessionFinished,
    BackendConfigError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code)
    {
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::EmptyManual: return "EmptyManual";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::NoDetectionFound: return "NoDetectionFound";
        case ErrorCode::DegenerateBox: return "DegenerateBox";
        case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
        case ErrorCode::BackendError: return "BackendError";
        case ErrorCode::HttpError: return "HttpError";
        case ErrorCode::NonOkStatus: return "NonOkStatus";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::MalformedToolBlock: return "MalformedToolBlock";
        case ErrorCode::TranscriptParseError: return "TranscriptParseError";
        case ErrorCode::EmptyOutput: return "EmptyOutput";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::StepOutOfRange: return "StepOutOfRange";
        case ErrorCode::UnknownManual: return "UnknownManual";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::SessionFinished: return "SessionFinished";
        case ErrorCode::BackendConfigError: return "BackendConfigError";
    }
    return "Unknown";
}

/// Every recoverable failure in the library surfaces as an Error carrying a code.
class Error: public std::runtime_error
{
  public:
    Error(ErrorCode code, const std::string& message):
        std::runtime_error(std::string(to_string(code)) + ": " + message), _code(code), _detail(message)
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return _code; }
    [[nodiscard]] const std::string& detail() const noexcept { return _detail; }

  private:
    ErrorCode _code;
    std::string _detail;
};

/// Backend failures form a family: transport, status and schema problems are all BackendErrors to callers
/// that only care whether the model answered.
[[nodiscard]] constexpr bool is_backend_failure(ErrorCode code) noexcept
{
    return code == ErrorCode::BackendError || code == ErrorCode::HttpError || code == ErrorCode::NonOkStatus
           || code == ErrorCode::ScriptExhausted;
}

} // namespace mrta
