#include "hdsig/error.hpp"

namespace hdsig {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::HeaderParse: return "HeaderParse";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePatient: return "DuplicatePatient";
    case ErrorCode::MissingModalityPath: return "MissingModalityPath";
    case ErrorCode::UnknownDiagnosis: return "UnknownDiagnosis";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::EmptySignal: return "EmptySignal";
    case ErrorCode::EpochTooLong: return "EpochTooLong";
    case ErrorCode::NonPositiveStep: return "NonPositiveStep";
    case ErrorCode::AllEpochsRejected: return "AllEpochsRejected";
    case ErrorCode::EmptyEpochSet: return "EmptyEpochSet";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::ZeroMean: return "ZeroMean";
    case ErrorCode::DegenerateLengths: return "DegenerateLengths";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::SegmentTooLong: return "SegmentTooLong";
    case ErrorCode::BandOutOfRange: return "BandOutOfRange";
    case ErrorCode::MissingModality: return "MissingModality";
    case ErrorCode::FeatureComputationFailed: return "FeatureComputationFailed";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::FeatureCountMismatch: return "FeatureCountMismatch";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::NotAForest: return "NotAForest";
    case ErrorCode::TooFewGroups: return "TooFewGroups";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::MissingPreprocessOutput: return "MissingPreprocessOutput";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace hdsig
