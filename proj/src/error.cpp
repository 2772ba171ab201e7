#include "robinf/error.hpp"

namespace robinf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::UnitWithOneSide: return "UnitWithOneSide";
    case ErrorCode::NoTreatment: return "NoTreatment";
    case ErrorCode::UnknownAssignmentScheme: return "UnknownAssignmentScheme";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidLabels: return "InvalidLabels";
    case ErrorCode::MissingStatistics: return "MissingStatistics";
    case ErrorCode::WeightLawUnavailable: return "WeightLawUnavailable";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::LeverageInfeasible: return "LeverageInfeasible";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::ZeroSE: return "ZeroSE";
    case ErrorCode::TooFewReplications: return "TooFewReplications";
    case ErrorCode::DegenerateResample: return "DegenerateResample";
    case ErrorCode::MissingPerReplicationSE: return "MissingPerReplicationSE";
  }
  return "Unknown";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownAssignmentScheme:
    case ErrorCode::WeightLawUnavailable:
      return ErrorCategory::Config;
    case ErrorCode::ParseError:
    case ErrorCode::EmptyAfterFiltering:
    case ErrorCode::UnitWithOneSide:
    case ErrorCode::NoTreatment:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::InvalidLabels:
    case ErrorCode::MissingStatistics:
      return ErrorCategory::Data;
    default:
      return ErrorCategory::Numeric;
  }
}

int exit_code(ErrorCode code) {
  switch (category(code)) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Numeric: return 4;
  }
  return 1;
}

Error::Error(ErrorCode code, const std::string& message, std::string hint,
             std::vector<std::size_t> rows)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      hint_(std::move(hint)),
      indices_(std::move(rows)) {}

}  // namespace robinf
