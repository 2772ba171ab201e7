#include "robinf/regression.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "robinf/error.hpp"

namespace robinf {

namespace {

constexpr double kRankTolerance = 1e-10;

std::string join_names(const std::vector<std::string>& names,
                       const std::vector<std::size_t>& idx) {
  std::ostringstream os;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) os << ", ";
    os << (idx[i] < names.size() ? names[idx[i]] : std::to_string(idx[i]));
  }
  return os.str();
}

// Columns that lie (numerically) in the span of the columns before them.
std::vector<std::size_t> dependent_columns(const MatrixXd& x) {
  std::vector<std::size_t> dependent;
  std::vector<Eigen::Index> kept;
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const VectorXd col = x.col(j);
    const double norm = col.norm();
    if (norm <= kRankTolerance * scale) {
      dependent.push_back(static_cast<std::size_t>(j));
      continue;
    }
    if (kept.empty()) {
      kept.push_back(j);
      continue;
    }
    MatrixXd basis(x.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) basis.col(static_cast<Eigen::Index>(c)) = x.col(kept[c]);
    Eigen::HouseholderQR<MatrixXd> qr(basis);
    const VectorXd coef = qr.solve(col);
    const double resid = (col - basis * coef).norm();
    if (resid <= 1e-8 * norm) {
      dependent.push_back(static_cast<std::size_t>(j));
    } else {
      kept.push_back(j);
    }
  }
  return dependent;
}

}  // namespace

void Dataset::validate() const {
  const auto n = outcome.size();
  if (covariates.rows() != n) {
    throw Error(ErrorCode::ShapeMismatch, "outcome has " + std::to_string(n) +
                                              " rows but covariates have " +
                                              std::to_string(covariates.rows()));
  }
  if (!column_names.empty() &&
      static_cast<Eigen::Index>(column_names.size()) != covariates.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "column name count does not match covariates");
  }
  if (!outcome.allFinite() || !covariates.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, "non-finite value in outcome or covariates",
                "drop or impute missing rows before fitting");
  }
  for (const auto& [dim, labels] : cluster_labels) {
    if (static_cast<Eigen::Index>(labels.size()) != n) {
      throw Error(ErrorCode::ShapeMismatch, "cluster dimension '" + dim + "' has wrong length");
    }
    std::set<int> seen(labels.begin(), labels.end());
    if (!seen.empty() && (*seen.begin() != 0 ||
                          *seen.rbegin() != static_cast<int>(seen.size()) - 1)) {
      throw Error(ErrorCode::InvalidLabels,
                  "cluster labels for '" + dim + "' are not dense 0..C-1");
    }
  }
  if (treatment) {
    if (treatment->size() != n) {
      throw Error(ErrorCode::ShapeMismatch, "treatment has wrong length");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = (*treatment)(i);
      if (t != 0.0 && t != 1.0) {
        throw Error(ErrorCode::InvalidLabels, "treatment must be binary 0/1");
      }
    }
  }
}

Dataset Dataset::from_columns(VectorXd y, const MatrixXd& x,
                              std::vector<std::string> names, bool intercept) {
  Dataset d;
  d.outcome = std::move(y);
  if (names.size() != static_cast<std::size_t>(x.cols())) {
    names.clear();
    for (Eigen::Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  }
  if (intercept) {
    d.covariates.resize(x.rows(), x.cols() + 1);
    d.covariates.col(0).setOnes();
    d.covariates.rightCols(x.cols()) = x;
    d.column_names.push_back(kInterceptName);
  } else {
    d.covariates = x;
  }
  d.column_names.insert(d.column_names.end(), names.begin(), names.end());
  return d;
}

Design::Design(MatrixXd x, std::vector<std::string> names)
    : x_(std::move(x)), names_(std::move(names)) {
  const auto n = x_.rows();
  const auto k = x_.cols();
  if (names_.size() != static_cast<std::size_t>(k)) {
    names_.clear();
    for (Eigen::Index j = 0; j < k; ++j) names_.push_back("x" + std::to_string(j));
  }
  if (n <= k) {
    throw Error(ErrorCode::TooFewRows, "need more rows than coefficients (n = " +
                                           std::to_string(n) + ", k = " + std::to_string(k) + ")");
  }
  Eigen::ColPivHouseholderQR<MatrixXd> pivoted(x_);
  pivoted.setThreshold(kRankTolerance);
  if (pivoted.rank() < k) {
    auto bad = dependent_columns(x_);
    if (bad.empty()) bad.push_back(static_cast<std::size_t>(k - 1));
    throw Error(ErrorCode::RankDeficient,
                "design matrix has rank " + std::to_string(pivoted.rank()) + " < " +
                    std::to_string(k) + "; collinear column(s): " + join_names(names_, bad),
                "drop the listed columns or merge categories", bad);
  }

  Eigen::HouseholderQR<MatrixXd> qr(x_);
  q_ = qr.householderQ() * MatrixXd::Identity(n, k);
  r_ = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();

  leverage_ = q_.rowwise().squaredNorm();
  leverage_ = leverage_.cwiseMax(0.0).cwiseMin(1.0);

  const MatrixXd r_inv =
      r_.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  bread_ = r_inv * r_inv.transpose();
  bread_ = 0.5 * (bread_ + bread_.transpose()).eval();
}

VectorXd Design::solve(const VectorXd& y) const {
  return r_.triangularView<Eigen::Upper>().solve(q_.transpose() * y);
}

std::pair<MatrixXd, std::vector<std::string>> select_columns(
    const Dataset& data, const ModelSpec& spec) {
  std::vector<std::size_t> idx;
  if (spec.covariates.empty()) {
    for (std::size_t j = 0; j < static_cast<std::size_t>(data.covariates.cols()); ++j) idx.push_back(j);
  } else {
    for (const auto& name : spec.covariates) {
      auto it = std::find(data.column_names.begin(), data.column_names.end(), name);
      if (it == data.column_names.end()) {
        throw Error(ErrorCode::ConfigError, "unknown covariate column '" + name + "'");
      }
      idx.push_back(static_cast<std::size_t>(it - data.column_names.begin()));
    }
  }
  std::stable_partition(idx.begin(), idx.end(), [&](std::size_t j) {
    return j < data.column_names.size() && data.column_names[j] == kInterceptName;
  });
  MatrixXd x(data.covariates.rows(), static_cast<Eigen::Index>(idx.size()));
  std::vector<std::string> names;
  for (std::size_t c = 0; c < idx.size(); ++c) {
    x.col(static_cast<Eigen::Index>(c)) = data.covariates.col(static_cast<Eigen::Index>(idx[c]));
    names.push_back(idx[c] < data.column_names.size() ? data.column_names[idx[c]]
                                                      : "x" + std::to_string(idx[c]));
  }
  return {std::move(x), std::move(names)};
}

FitResult fit_ols(std::shared_ptr<const Design> design, const VectorXd& y) {
  if (static_cast<std::size_t>(y.size()) != design->n()) {
    throw Error(ErrorCode::ShapeMismatch, "outcome length does not match design");
  }
  FitResult fit;
  fit.beta = design->solve(y);
  fit.residuals = y - design->matrix() * fit.beta;
  const double dof = static_cast<double>(design->n() - design->k());
  fit.sigma2_hat = fit.residuals.squaredNorm() / dof;
  fit.design = std::move(design);
  return fit;
}

FitResult fit_ols(const Dataset& data, const ModelSpec& spec) {
  data.validate();
  auto [x, names] = select_columns(data, spec);
  auto design = std::make_shared<const Design>(std::move(x), std::move(names));
  return fit_ols(std::move(design), data.outcome);
}

LeverageReport leverage(const FitResult& fit) {
  LeverageReport report;
  report.values = fit.leverage();
  for (Eigen::Index i = 0; i < report.values.size(); ++i) {
    if (report.values(i) >= 1.0 - kLeverageOneTolerance) {
      report.infeasible.push_back(static_cast<std::size_t>(i));
    }
  }
  return report;
}

}  // namespace robinf
