#include "easteer/errors.hpp"

namespace easteer {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::CorruptContainer: return "CorruptContainer";
    case ErrorCode::MixedEncoders: return "MixedEncoders";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::EmptyCounts: return "EmptyCounts";
    case ErrorCode::InvalidN: return "InvalidN";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::EmptyCondition: return "EmptyCondition";
    case ErrorCode::MixedConcepts: return "MixedConcepts";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::MissingRecord: return "MissingRecord";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::ProtocolVersionMismatch: return "ProtocolVersionMismatch";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::EncoderFailure: return "EncoderFailure";
    case ErrorCode::GenerationFailure: return "GenerationFailure";
    case ErrorCode::UnknownImage: return "UnknownImage";
    case ErrorCode::FixtureMiss: return "FixtureMiss";
    case ErrorCode::StoreCorrupt: return "StoreCorrupt";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ProvenanceMismatch: return "ProvenanceMismatch";
    case ErrorCode::Incomplete: return "Incomplete";
    }
    return "Unknown";
}

} // namespace easteer
