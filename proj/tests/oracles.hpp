#pragma once

// Independent reference computations for the test suites. Everything here
// avoids the library's QR / low-rank paths: explicit inverses, per-row loops
// and dense eigen-decompositions only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd xtx_inverse(const MatrixXd& x) { return (x.transpose() * x).inverse(); }

inline VectorXd ols_beta(const MatrixXd& x, const VectorXd& y) {
  return xtx_inverse(x) * (x.transpose() * y);
}

inline VectorXd residuals(const MatrixXd& x, const VectorXd& y) { return y - x * ols_beta(x, y); }

inline VectorXd hat_diagonal(const MatrixXd& x) {
  const MatrixXd a = xtx_inverse(x);
  VectorXd h(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index p = 0; p < x.cols(); ++p) {
      for (Eigen::Index q = 0; q < x.cols(); ++q) s += x(i, p) * a(p, q) * x(i, q);
    }
    h(i) = s;
  }
  return h;
}

inline MatrixXd conventional(const MatrixXd& x, const VectorXd& y) {
  const VectorXd e = residuals(x, y);
  const double s2 = e.squaredNorm() / static_cast<double>(x.rows() - x.cols());
  return s2 * xtx_inverse(x);
}

// variant 0..3 = HC0..HC3, explicit Σ ω_i x_i x_i' loop.
inline MatrixXd hc(const MatrixXd& x, const VectorXd& y, int variant) {
  const auto n = x.rows();
  const auto k = x.cols();
  const VectorXd e = residuals(x, y);
  const VectorXd h = hat_diagonal(x);
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = e(i) * e(i);
    if (variant == 1) w *= static_cast<double>(n) / static_cast<double>(n - k);
    if (variant == 2) w /= (1.0 - h(i));
    if (variant == 3) w /= (1.0 - h(i)) * (1.0 - h(i));
    for (Eigen::Index p = 0; p < k; ++p) {
      for (Eigen::Index q = 0; q < k; ++q) meat(p, q) += w * x(i, p) * x(i, q);
    }
  }
  const MatrixXd a = xtx_inverse(x);
  return a * meat * a;
}

// Per-cluster score outer products with factor `a` (labels need not be dense).
inline MatrixXd cluster(const MatrixXd& x, const VectorXd& y, const std::vector<int>& labels,
                        double a) {
  const VectorXd e = residuals(x, y);
  std::map<int, VectorXd> scores;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto it = scores.find(labels[static_cast<std::size_t>(i)]);
    if (it == scores.end()) {
      it = scores.emplace(labels[static_cast<std::size_t>(i)], VectorXd::Zero(x.cols())).first;
    }
    it->second += x.row(i).transpose() * e(i);
  }
  MatrixXd meat = MatrixXd::Zero(x.cols(), x.cols());
  for (const auto& [label, s] : scores) meat += s * s.transpose();
  const MatrixXd b = xtx_inverse(x);
  return a * b * meat * b;
}

inline double lz_factor(std::size_t n, std::size_t k, std::size_t c) {
  return static_cast<double>(c) / static_cast<double>(c - 1) *
         static_cast<double>(n - 1) / static_cast<double>(n - k);
}

inline std::size_t count_distinct(const std::vector<int>& labels) {
  std::vector<int> v = labels;
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

struct SampleMoments {
  double mean = 0.0;
  double var = 0.0;  // n - 1 divisor
};

// Two-pass mean and variance.
inline SampleMoments two_pass(const std::vector<double>& v) {
  SampleMoments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(v.size() - 1);
  return m;
}

struct Welch {
  double difference = 0.0;  // mean1 - mean0
  double se = 0.0;
  double dof = 0.0;
  double t = 0.0;
};

inline Welch welch(const std::vector<double>& g0, const std::vector<double>& g1) {
  const auto m0 = two_pass(g0);
  const auto m1 = two_pass(g1);
  const double n0 = static_cast<double>(g0.size());
  const double n1 = static_cast<double>(g1.size());
  const double v0 = m0.var / n0;
  const double v1 = m1.var / n1;
  Welch w;
  w.difference = m1.mean - m0.mean;
  w.se = std::sqrt(v0 + v1);
  w.dof = (v0 + v1) * (v0 + v1) / (v0 * v0 / (n0 - 1.0) + v1 * v1 / (n1 - 1.0));
  w.t = w.difference / w.se;
  return w;
}

struct Pooled {
  double se = 0.0;
  double dof = 0.0;
  double t = 0.0;
};

inline Pooled pooled(const std::vector<double>& g0, const std::vector<double>& g1) {
  const auto m0 = two_pass(g0);
  const auto m1 = two_pass(g1);
  const double n0 = static_cast<double>(g0.size());
  const double n1 = static_cast<double>(g1.size());
  const double sp2 = ((n0 - 1.0) * m0.var + (n1 - 1.0) * m1.var) / (n0 + n1 - 2.0);
  Pooled p;
  p.se = std::sqrt(sp2 * (1.0 / n0 + 1.0 / n1));
  p.dof = n0 + n1 - 2.0;
  p.t = (m1.mean - m0.mean) / p.se;
  return p;
}

// Satterthwaite dof of the HC2 variance of coefficient j from the dense
// n x n operator D^{1/2} M W M D^{1/2}, D the linear skedastic fit of
// ε̂²/(1-h) clamped at zero.
inline double bm_dof_dense(const MatrixXd& x, const VectorXd& y, Eigen::Index j) {
  const auto n = x.rows();
  const MatrixXd a = xtx_inverse(x);
  const MatrixXd hat = x * a * x.transpose();
  const MatrixXd m = MatrixXd::Identity(n, n) - hat;
  const VectorXd e = m * y;
  const VectorXd h = hat.diagonal();
  const VectorXd c = x * a.col(j);
  VectorXd w(n), omega(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = c(i) * c(i) / (1.0 - h(i));
    omega(i) = e(i) * e(i) / (1.0 - h(i));
  }
  VectorXd d = (hat * omega).cwiseMax(0.0);
  if (!(d.sum() > 0.0)) d.setOnes();
  const VectorXd root = d.cwiseSqrt();
  const MatrixXd op = root.asDiagonal() * m * w.asDiagonal() * m * root.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (op + op.transpose()), Eigen::EigenvaluesOnly);
  const VectorXd lambda = es.eigenvalues();
  return lambda.sum() * lambda.sum() / lambda.squaredNorm();
}

// Brute-force randomization p-value. Assignments are enumerated as bit masks
// over `units`; `valid` filters masks, `prob` weights them. The coefficient on
// column `tcol` is refit from normal equations for every mask.
struct BruteRI {
  double p_value = 0.0;
  double observed = 0.0;
  std::vector<double> draws;
  std::size_t assignments = 0;
};

inline BruteRI brute_ri(const MatrixXd& x, const VectorXd& y, Eigen::Index tcol,
                        const std::vector<int>& unit_of, std::size_t units,
                        const std::function<bool(std::uint64_t)>& valid,
                        const std::function<double(std::uint64_t)>& prob) {
  auto fit_mask = [&](std::uint64_t mask, bool& ok) {
    MatrixXd xa = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      xa(i, tcol) = ((mask >> unit_of[static_cast<std::size_t>(i)]) & 1u) ? 1.0 : 0.0;
    }
    Eigen::FullPivLU<MatrixXd> lu(xa.transpose() * xa);
    lu.setThreshold(1e-10);
    ok = lu.rank() == xa.cols();
    if (!ok) return 0.0;
    return ols_beta(xa, y)(tcol);
  };
  std::uint64_t realized = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (x(i, tcol) == 1.0) realized |= std::uint64_t{1} << unit_of[static_cast<std::size_t>(i)];
  }
  bool ok = false;
  BruteRI out;
  out.observed = fit_mask(realized, ok);
  const double scale = y.cwiseAbs().maxCoeff();
  double mass = 0.0;
  double extreme = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << units); ++mask) {
    if (!valid(mask)) continue;
    const double theta = fit_mask(mask, ok);
    if (!ok) continue;
    const double w = prob(mask);
    mass += w;
    ++out.assignments;
    out.draws.push_back(theta);
    const double tol = 1e-9 * std::max({scale, std::abs(theta), std::abs(out.observed)});
    if (std::abs(theta) >= std::abs(out.observed) - tol) extreme += w;
  }
  out.p_value = extreme / mass;
  return out;
}

inline int popcount(std::uint64_t v) {
  int c = 0;
  for (; v; v &= v - 1) ++c;
  return c;
}

// Seeded design helpers.
struct Sim {
  std::mt19937_64 rng;
  explicit Sim(std::uint64_t seed) : rng(seed) {}

  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(rng);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  // n x k with intercept in column 0 and N(0,1) covariates.
  MatrixXd design(Eigen::Index n, Eigen::Index k) {
    MatrixXd x(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (Eigen::Index j = 1; j < k; ++j) x(i, j) = normal();
    }
    return x;
  }
  VectorXd noise(Eigen::Index n, double sd = 1.0) {
    VectorXd v(n);
    for (auto& e : v) e = normal(0.0, sd);
    return v;
  }
};

}  // namespace oracle
