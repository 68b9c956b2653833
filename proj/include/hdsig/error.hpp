#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdsig {

enum class ErrorCode {
  InvalidArgument,
  // signal_io
  MissingFile,
  ShapeMismatch,
  NonFiniteSample,
  BadMagic,
  UnsupportedDtype,
  HeaderParse,
  ParseError,
  DuplicatePatient,
  MissingModalityPath,
  UnknownDiagnosis,
  UnknownChannel,
  // preprocess
  InvalidBand,
  EmptySignal,
  EpochTooLong,
  NonPositiveStep,
  AllEpochsRejected,
  EmptyEpochSet,
  // features
  ZeroVariance,
  ZeroMean,
  DegenerateLengths,
  SignalTooShort,
  SegmentTooLong,
  BandOutOfRange,
  MissingModality,
  FeatureComputationFailed,
  // models
  SingleClass,
  NonFiniteInput,
  FeatureCountMismatch,
  SingularCovariance,
  ClassTooSmall,
  NotAForest,
  // eval
  TooFewGroups,
  LengthMismatch,
  OneClassOnly,
  EmptyGrid,
  // stats
  RankDeficient,
  TooFewRows,
  // pipeline
  MissingPreprocessOutput,
  UsageError,
  IoError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Library-wide exception. Every failure raised by hdsig carries a code so
/// callers (and the CLI's --json mode) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace hdsig
