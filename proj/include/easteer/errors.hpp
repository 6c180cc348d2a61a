#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace easteer {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    NonFiniteInput,
    DegenerateVector,
    CorruptContainer,
    MixedEncoders,
    UnknownAttribute,
    InvalidDistribution,
    EmptyCounts,
    InvalidN,
    EmptyEnsemble,
    EmptyCondition,
    MixedConcepts,
    EmptySet,
    MissingRecord,
    CorruptRecord,
    Transport,
    ProtocolVersionMismatch,
    ProtocolViolation,
    EncoderFailure,
    GenerationFailure,
    UnknownImage,
    FixtureMiss,
    StoreCorrupt,
    ConfigError,
    ProvenanceMismatch,
    Incomplete,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

} // namespace easteer
