#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace robinf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr const char* kInterceptName = "(Intercept)";

// Columnar analysis table: one outcome, a covariate matrix (intercept first
// unless suppressed), optional cluster labels per dimension and an optional
// binary treatment that must also appear among the covariates.
struct Dataset {
  std::string outcome_name = "y";
  VectorXd outcome;
  MatrixXd covariates;
  std::vector<std::string> column_names;
  std::map<std::string, std::vector<int>> cluster_labels;
  std::optional<std::string> treatment_name;
  std::optional<VectorXd> treatment;
  // Rows removed by listwise deletion during ingestion.
  std::size_t dropped_rows = 0;

  std::size_t n_rows() const { return static_cast<std::size_t>(outcome.size()); }

  // Throws ShapeMismatch / NonFiniteValue / InvalidLabels on a broken
  // invariant.
  void validate() const;

  // Prepends an intercept column named kInterceptName when `intercept` is set.
  static Dataset from_columns(VectorXd y, const MatrixXd& x,
                              std::vector<std::string> names,
                              bool intercept = true);
};

// Column selection for a regression. Empty `covariates` selects every column
// of the dataset. The intercept, when selected, is moved to column 0.
struct ModelSpec {
  std::vector<std::string> covariates;
};

// A full-rank design matrix with its thin QR factorization. Shared by every
// fit on the same covariates (resampling schemes with fixed X reuse it).
class Design {
 public:
  explicit Design(MatrixXd x, std::vector<std::string> names = {});

  const MatrixXd& matrix() const { return x_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t n() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t k() const { return static_cast<std::size_t>(x_.cols()); }

  const VectorXd& leverage() const { return leverage_; }
  // (X'X)^{-1}
  const MatrixXd& bread() const { return bread_; }

  // Least-squares coefficients through the QR factors.
  VectorXd solve(const VectorXd& y) const;

 private:
  MatrixXd x_;
  std::vector<std::string> names_;
  MatrixXd q_;  // n x k, orthonormal columns
  MatrixXd r_;  // k x k, upper triangular
  VectorXd leverage_;
  MatrixXd bread_;
};

struct FitResult {
  std::shared_ptr<const Design> design;
  VectorXd beta;
  VectorXd residuals;
  // Sum of squared residuals over (N - k).
  double sigma2_hat = 0.0;

  std::size_t n() const { return design->n(); }
  std::size_t k() const { return design->k(); }
  const VectorXd& leverage() const { return design->leverage(); }
  const MatrixXd& bread() const { return design->bread(); }
  const MatrixXd& x() const { return design->matrix(); }
  const std::vector<std::string>& names() const { return design->names(); }
};

// Selected design matrix (intercept first) and the matching column names.
std::pair<MatrixXd, std::vector<std::string>> select_columns(
    const Dataset& data, const ModelSpec& spec);

FitResult fit_ols(const Dataset& data, const ModelSpec& spec = {});
FitResult fit_ols(std::shared_ptr<const Design> design, const VectorXd& y);

inline constexpr double kLeverageOneTolerance = 1e-10;

struct LeverageReport {
  VectorXd values;
  // Rows with h_ii >= 1 - kLeverageOneTolerance; HC2/HC3/BM cannot be formed.
  std::vector<std::size_t> infeasible;
  double max() const { return values.size() ? values.maxCoeff() : 0.0; }
};

LeverageReport leverage(const FitResult& fit);

}  // namespace robinf
