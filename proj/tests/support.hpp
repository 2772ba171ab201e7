#pragma once

#include <memory>
#include <string>
#include <vector>

#include "robinf/regression.hpp"

namespace support {

inline robinf::FitResult fit_xy(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                std::vector<std::string> names = {}) {
  return robinf::fit_ols(std::make_shared<const robinf::Design>(x, std::move(names)), y);
}

// Two-sample layout: intercept plus a 0/1 group dummy, group 0 rows first.
inline Eigen::MatrixXd two_sample_design(std::size_t n0, std::size_t n1) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n0 + n1), 2);
  x.col(0).setOnes();
  for (std::size_t i = 0; i < n0 + n1; ++i) x(static_cast<Eigen::Index>(i), 1) = i < n0 ? 0.0 : 1.0;
  return x;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace support
