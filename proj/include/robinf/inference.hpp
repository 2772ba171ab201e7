#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robinf/regression.hpp"
#include "robinf/vcov.hpp"

namespace robinf {

enum class Alternative { TwoSided, Greater, Less };

struct CoefficientTest {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool rejected = false;
};

struct TestDiagnostics {
  double max_leverage = 0.0;
  std::vector<std::size_t> infeasible_rows;
  std::vector<std::pair<std::string, std::size_t>> cluster_counts;
  std::vector<std::pair<std::string, double>> effective_clusters;
  bool eigen_repaired = false;
};

struct TestReport {
  std::vector<CoefficientTest> coefficients;
  VcovKind vcov_kind = VcovKind::Conventional;
  std::string reference_distribution;
  double alpha = 0.05;
  Alternative alternative = Alternative::TwoSided;
  TestDiagnostics diagnostics;
  std::vector<std::string> notes;
};

// Student-t helpers; dof = +inf falls back to the standard normal.
double t_cdf(double x, double dof);
double t_quantile(double p, double dof);
// P(|T| >= |t|)
double t_two_sided_p(double t, double dof);

// Per-coefficient t tests against zero. Throws ZeroSE when a coefficient has
// a zero standard error but a nonzero estimate.
TestReport t_tests(const FitResult& fit, const VcovEstimate& vcov, double alpha,
                   Alternative alternative = Alternative::TwoSided);

// Conventional-vs-robust max-SE heuristic: diagonal is the elementwise max,
// off-diagonals come from `robust`.
VcovEstimate max_se_heuristic(const VcovEstimate& conventional, const VcovEstimate& robust);

}  // namespace robinf
