#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace robinf {

enum class ErrorCode {
  // configuration
  ConfigError,
  // data
  ParseError,
  EmptyAfterFiltering,
  UnitWithOneSide,
  NoTreatment,
  UnknownAssignmentScheme,
  ShapeMismatch,
  NonFiniteValue,
  InvalidLabels,
  MissingStatistics,
  WeightLawUnavailable,
  // numeric
  RankDeficient,
  TooFewRows,
  LeverageInfeasible,
  SingleCluster,
  ZeroSE,
  TooFewReplications,
  DegenerateResample,
  MissingPerReplicationSE,
};

enum class ErrorCategory { Config, Data, Numeric };

std::string_view to_string(ErrorCode code);
ErrorCategory category(ErrorCode code);

// Process exit code for the batch front end: 2 config, 3 data, 4 numeric.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string hint = {},
        std::vector<std::size_t> rows = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& hint() const noexcept { return hint_; }
  // Row or column indices the error refers to (infeasible rows, offending
  // columns), when applicable.
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  ErrorCode code_;
  std::string hint_;
  std::vector<std::size_t> indices_;
};

}  // namespace robinf
