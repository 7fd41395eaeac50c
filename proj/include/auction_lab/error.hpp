#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace auction_lab {

enum class ErrorCode {
  InvalidParameter,
  UnboundedQuantile,
  AtomicDistribution,
  OutsideSupport,
  SupremumNotAttained,
  DisjointSupports,
  WeightRowSum,
  NegativeWeight,
  IrregularComponent,
  ProfileSpaceTooLarge,
  NegativeReserve,
  ValueOutsideSupport,
  IndexOutOfRange,
  NonMonotoneAllocation,
  DivergentTail,
  ZeroDenominator,
  InsufficientDivergenceSamples,
  NoDominantComponent,
  InvalidDelta,
  GroupTooSmall,
  AssumptionUnverified,
  SchemaError,
  UnknownExperiment,
  IOFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UnboundedQuantile: return "UnboundedQuantile";
    case ErrorCode::AtomicDistribution: return "AtomicDistribution";
    case ErrorCode::OutsideSupport: return "OutsideSupport";
    case ErrorCode::SupremumNotAttained: return "SupremumNotAttained";
    case ErrorCode::DisjointSupports: return "DisjointSupports";
    case ErrorCode::WeightRowSum: return "WeightRowSum";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::IrregularComponent: return "IrregularComponent";
    case ErrorCode::ProfileSpaceTooLarge: return "ProfileSpaceTooLarge";
    case ErrorCode::NegativeReserve: return "NegativeReserve";
    case ErrorCode::ValueOutsideSupport: return "ValueOutsideSupport";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonMonotoneAllocation: return "NonMonotoneAllocation";
    case ErrorCode::DivergentTail: return "DivergentTail";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::InsufficientDivergenceSamples: return "InsufficientDivergenceSamples";
    case ErrorCode::NoDominantComponent: return "NoDominantComponent";
    case ErrorCode::InvalidDelta: return "InvalidDelta";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::AssumptionUnverified: return "AssumptionUnverified";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownExperiment: return "UnknownExperiment";
    case ErrorCode::IOFailure: return "IOFailure";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (and tests) can dispatch on the kind rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string path, std::string reason)
      : Error(ErrorCode::SchemaError, path + ": " + reason),
        path_(std::move(path)),
        reason_(std::move(reason)) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

/// Raised when no component hazard-rate dominates all others; carries the first
/// value at which the best candidate's hazard rate crosses a rival's.
class NoDominantComponentError : public Error {
 public:
  NoDominantComponentError(const std::string& what, double crossing)
      : Error(ErrorCode::NoDominantComponent, what), crossing_(crossing) {}

  double crossing_point() const noexcept { return crossing_; }

 private:
  double crossing_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace auction_lab
