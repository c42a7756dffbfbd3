#include "didkit/error.hpp"

namespace didkit {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorKind::DuplicateObservation: return "DuplicateObservation";
    case ErrorKind::InvalidGroup: return "InvalidGroup";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::NoComparisonPossible: return "NoComparisonPossible";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::Separation: return "Separation";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::EmptyArm: return "EmptyArm";
    case ErrorKind::EmptyCell: return "EmptyCell";
    case ErrorKind::NoComparison: return "NoComparison";
    case ErrorKind::NoBalancedCohort: return "NoBalancedCohort";
    case ErrorKind::NoPostPeriods: return "NoPostPeriods";
    case ErrorKind::SingleCluster: return "SingleCluster";
    case ErrorKind::NoPretrends: return "NoPretrends";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::DegenerateSE: return "DegenerateSE";
    case ErrorKind::WrongShape: return "WrongShape";
    case ErrorKind::InfeasibleShares: return "InfeasibleShares";
  }
  return "Unknown";
}

bool is_validation_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn:
    case ErrorKind::NonNumericCell:
    case ErrorKind::UnbalancedPanel:
    case ErrorKind::DuplicateObservation:
    case ErrorKind::InvalidGroup:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Io:
    case ErrorKind::WrongShape:
    case ErrorKind::InfeasibleShares:
      return true;
    default:
      return false;
  }
}

}  // namespace didkit
