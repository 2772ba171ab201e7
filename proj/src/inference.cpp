#include "robinf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "robinf/error.hpp"

namespace robinf {

namespace {

bool use_normal(double dof) { return !std::isfinite(dof) || dof > 1e10; }

}  // namespace

double t_cdf(double x, double dof) {
  if (use_normal(dof)) return boost::math::cdf(boost::math::normal_distribution<>{}, x);
  return boost::math::cdf(boost::math::students_t_distribution<>{dof}, x);
}

double t_quantile(double p, double dof) {
  if (use_normal(dof)) return boost::math::quantile(boost::math::normal_distribution<>{}, p);
  return boost::math::quantile(boost::math::students_t_distribution<>{dof}, p);
}

double t_two_sided_p(double t, double dof) {
  const double a = std::abs(t);
  double tail = 0.0;
  if (use_normal(dof)) {
    tail = boost::math::cdf(boost::math::complement(boost::math::normal_distribution<>{}, a));
  } else {
    tail = boost::math::cdf(
        boost::math::complement(boost::math::students_t_distribution<>{dof}, a));
  }
  return std::min(1.0, 2.0 * tail);
}

TestReport t_tests(const FitResult& fit, const VcovEstimate& vcov, double alpha,
                   Alternative alternative) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::ConfigError, "alpha must lie in (0, 1)");
  }
  const auto k = static_cast<Eigen::Index>(fit.k());
  if (vcov.matrix.rows() != k || vcov.matrix.cols() != k || vcov.dof.size() != k) {
    throw Error(ErrorCode::ShapeMismatch, "variance estimate is not conformable with the fit");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();

  TestReport report;
  report.vcov_kind = vcov.kind;
  report.reference_distribution = "student_t";
  report.alpha = alpha;
  report.alternative = alternative;
  report.notes = vcov.notes;

  const VectorXd se = vcov.se();
  for (Eigen::Index j = 0; j < k; ++j) {
    CoefficientTest c;
    c.name = fit.names()[static_cast<std::size_t>(j)];
    c.estimate = fit.beta(j);
    c.se = se(j);
    c.dof = vcov.dof(j);
    if (c.se == 0.0) {
      if (c.estimate != 0.0) {
        throw Error(ErrorCode::ZeroSE,
                    "coefficient '" + c.name + "' has zero standard error and nonzero estimate",
                    "the variance estimator is degenerate for this coefficient");
      }
      c.statistic = 0.0;
      c.p_value = 1.0;
      c.ci_low = c.ci_high = c.estimate;
      c.rejected = false;
      report.coefficients.push_back(c);
      continue;
    }
    c.statistic = c.estimate / c.se;
    switch (alternative) {
      case Alternative::TwoSided: {
        const double q = t_quantile(1.0 - alpha / 2.0, c.dof);
        c.p_value = t_two_sided_p(c.statistic, c.dof);
        c.ci_low = c.estimate - q * c.se;
        c.ci_high = c.estimate + q * c.se;
        break;
      }
      case Alternative::Greater: {
        const double q = t_quantile(1.0 - alpha, c.dof);
        c.p_value = 1.0 - t_cdf(c.statistic, c.dof);
        c.ci_low = c.estimate - q * c.se;
        c.ci_high = inf;
        break;
      }
      case Alternative::Less: {
        const double q = t_quantile(1.0 - alpha, c.dof);
        c.p_value = t_cdf(c.statistic, c.dof);
        c.ci_low = -inf;
        c.ci_high = c.estimate + q * c.se;
        break;
      }
    }
    c.p_value = std::clamp(c.p_value, 0.0, 1.0);
    c.rejected = !(c.ci_low <= 0.0 && 0.0 <= c.ci_high);
    report.coefficients.push_back(c);
  }

  report.diagnostics.max_leverage = fit.leverage().size() ? fit.leverage().maxCoeff() : 0.0;
  report.diagnostics.infeasible_rows = leverage(fit).infeasible;
  report.diagnostics.cluster_counts = vcov.cluster_counts;
  report.diagnostics.eigen_repaired = vcov.eigen_repaired;
  return report;
}

VcovEstimate max_se_heuristic(const VcovEstimate& conventional, const VcovEstimate& robust) {
  if (conventional.matrix.rows() != robust.matrix.rows() ||
      conventional.matrix.cols() != robust.matrix.cols() ||
      conventional.dof.size() != robust.dof.size()) {
    throw Error(ErrorCode::ShapeMismatch, "conventional and robust estimates differ in shape");
  }
  VcovEstimate out = robust;
  out.kind = VcovKind::MaxConventionalRobust;
  for (Eigen::Index j = 0; j < out.matrix.rows(); ++j) {
    if (conventional.matrix(j, j) > robust.matrix(j, j)) {
      out.matrix(j, j) = conventional.matrix(j, j);
      out.dof(j) = conventional.dof(j);
    }
  }
  out.notes.push_back("max-SE heuristic: off-diagonal entries taken from the " +
                      std::string(to_string(robust.kind)) + " estimate");
  return out;
}

}  // namespace robinf
