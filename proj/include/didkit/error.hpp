#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace didkit {

/// Failure categories raised by the library. The C API maps each kind onto a
/// status code; the CLI maps status codes onto exit codes.
enum class ErrorKind {
  // input / validation
  MissingColumn,
  NonNumericCell,
  UnbalancedPanel,
  DuplicateObservation,
  InvalidGroup,
  InvalidArgument,
  Io,
  // estimation
  NoComparisonPossible,
  EmptySample,
  RankDeficient,
  EmptyClass,
  Separation,
  DegenerateWeights,
  EmptyArm,
  EmptyCell,
  NoComparison,
  NoBalancedCohort,
  NoPostPeriods,
  SingleCluster,
  NoPretrends,
  SingularCovariance,
  DegenerateSE,
  WrongShape,
  InfeasibleShares,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for kinds that describe bad input rather than a failed estimation.
bool is_validation_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace didkit
