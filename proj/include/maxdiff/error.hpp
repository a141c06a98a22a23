#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maxdiff {

enum class ErrorCode {
    InvalidArgument,
    NotSymmetric,
    NotPSD,
    NonFinite,
    ZeroVariance,
    DimensionMismatch,
    BadPartition,
    SingularBlock,
    EmptySample,
    EmptySubset,
    DegenerateSample,
    HeterogeneousVariances,
    PerfectCrossCorrelation,
    NoAdmissibleDelta,
    ConditionFails,
    ZeroResidualVariance,
    SingularCovariance,
    BadGeometry,
    BadConfig,
    IoError,
    ParseError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NotPSD: return "NotPSD";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::BadPartition: return "BadPartition";
        case ErrorCode::SingularBlock: return "SingularBlock";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::EmptySubset: return "EmptySubset";
        case ErrorCode::DegenerateSample: return "DegenerateSample";
        case ErrorCode::HeterogeneousVariances: return "HeterogeneousVariances";
        case ErrorCode::PerfectCrossCorrelation: return "PerfectCrossCorrelation";
        case ErrorCode::NoAdmissibleDelta: return "NoAdmissibleDelta";
        case ErrorCode::ConditionFails: return "ConditionFails";
        case ErrorCode::ZeroResidualVariance: return "ZeroResidualVariance";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::BadGeometry: return "BadGeometry";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace maxdiff
