#include "robinf/vcov.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "robinf/error.hpp"
#include "robinf/inference.hpp"

namespace robinf {

namespace {

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

void require_feasible(const FitResult& fit, std::string_view what) {
  const auto lev = leverage(fit);
  if (!lev.infeasible.empty()) {
    std::string rows;
    for (std::size_t i = 0; i < lev.infeasible.size(); ++i) {
      if (i) rows += ", ";
      rows += std::to_string(lev.infeasible[i]);
    }
    throw Error(ErrorCode::LeverageInfeasible,
                std::string(what) + " requires h_ii < 1; leverage-one rows: " + rows,
                "use HC1 or the wild bootstrap for this design", lev.infeasible);
  }
}

void require_clusters(const FitResult& fit, const ClusterMap& clusters) {
  if (clusters.size() != fit.n()) {
    throw Error(ErrorCode::ShapeMismatch, "cluster map '" + clusters.name() +
                                              "' does not cover every row");
  }
  if (clusters.n_clusters() < 2) {
    throw Error(ErrorCode::SingleCluster,
                "dimension '" + clusters.name() + "' has fewer than two clusters");
  }
}

VcovEstimate make_estimate(MatrixXd m, VcovKind kind, double dof) {
  VcovEstimate v;
  v.matrix = symmetrize(m);
  v.kind = kind;
  v.dof = VectorXd::Constant(v.matrix.rows(), dof);
  return v;
}

}  // namespace

std::string_view to_string(VcovKind kind) {
  switch (kind) {
    case VcovKind::Conventional: return "conventional";
    case VcovKind::HC0: return "hc0";
    case VcovKind::HC1: return "hc1";
    case VcovKind::HC2: return "hc2";
    case VcovKind::HC3: return "hc3";
    case VcovKind::HC2_BM: return "hc2_bm";
    case VcovKind::ClusterLZ: return "cluster";
    case VcovKind::Multiway: return "multiway";
    case VcovKind::MaxConventionalRobust: return "max_conventional_robust";
  }
  return "unknown";
}

std::optional<VcovKind> parse_vcov_kind(std::string_view text) {
  static const std::map<std::string_view, VcovKind> table = {
      {"conventional", VcovKind::Conventional}, {"ols", VcovKind::Conventional},
      {"hc0", VcovKind::HC0}, {"hc1", VcovKind::HC1}, {"robust", VcovKind::HC1},
      {"hc2", VcovKind::HC2}, {"hc3", VcovKind::HC3}, {"bm", VcovKind::HC2_BM},
      {"hc2_bm", VcovKind::HC2_BM}, {"cluster", VcovKind::ClusterLZ},
      {"multiway", VcovKind::Multiway}, {"maxse", VcovKind::MaxConventionalRobust},
      {"max_conventional_robust", VcovKind::MaxConventionalRobust}};
  auto it = table.find(text);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

VectorXd VcovEstimate::se() const { return matrix.diagonal().cwiseMax(0.0).cwiseSqrt(); }

ClusterMap::ClusterMap(std::string name, std::vector<int> labels)
    : name_(std::move(name)), labels_(std::move(labels)) {
  if (labels_.empty()) return;
  const int max_label = *std::max_element(labels_.begin(), labels_.end());
  if (*std::min_element(labels_.begin(), labels_.end()) < 0) {
    throw Error(ErrorCode::InvalidLabels, "negative cluster label in '" + name_ + "'");
  }
  std::vector<char> seen(static_cast<std::size_t>(max_label) + 1, 0);
  for (int l : labels_) seen[static_cast<std::size_t>(l)] = 1;
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorCode::InvalidLabels, "cluster labels of '" + name_ + "' are not dense");
  }
  n_clusters_ = seen.size();
}

ClusterMap ClusterMap::from_raw(std::string name, std::span<const int> raw) {
  std::map<int, int> dense;
  for (int l : raw) dense.emplace(l, 0);
  int next = 0;
  for (auto& [_, v] : dense) v = next++;
  std::vector<int> labels;
  labels.reserve(raw.size());
  for (int l : raw) labels.push_back(dense.at(l));
  return ClusterMap(std::move(name), std::move(labels));
}

ClusterMap ClusterMap::singletons(std::size_t n, std::string name) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i);
  return ClusterMap(std::move(name), std::move(labels));
}

ClusterMap ClusterMap::intersect(const ClusterMap& a, const ClusterMap& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cluster dimensions differ in length");
  }
  std::map<std::pair<int, int>, int> cells;
  for (std::size_t i = 0; i < a.size(); ++i) cells.emplace(std::pair{a.labels_[i], b.labels_[i]}, 0);
  int next = 0;
  for (auto& [_, v] : cells) v = next++;
  std::vector<int> labels(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) labels[i] = cells.at({a.labels_[i], b.labels_[i]});
  return ClusterMap(a.name_ + "#" + b.name_, std::move(labels));
}

std::vector<std::size_t> ClusterMap::cluster_sizes() const {
  std::vector<std::size_t> sizes(n_clusters_, 0);
  for (int l : labels_) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

MatrixXd sandwich(const FitResult& fit, const VectorXd& weights) {
  const MatrixXd& x = fit.x();
  const MatrixXd meat = x.transpose() * weights.asDiagonal() * x;
  return symmetrize(fit.bread() * meat * fit.bread());
}

VcovEstimate vcov_conventional(const FitResult& fit) {
  const double dof = static_cast<double>(fit.n() - fit.k());
  return make_estimate(fit.sigma2_hat * fit.bread(), VcovKind::Conventional, dof);
}

VcovEstimate vcov_hc(const FitResult& fit, HcVariant variant) {
  const double n = static_cast<double>(fit.n());
  const double k = static_cast<double>(fit.k());
  const VectorXd e2 = fit.residuals.array().square();
  VectorXd w;
  VcovKind kind = VcovKind::HC0;
  switch (variant) {
    case HcVariant::HC0:
      w = e2;
      kind = VcovKind::HC0;
      break;
    case HcVariant::HC1:
      w = (n / (n - k)) * e2;
      kind = VcovKind::HC1;
      break;
    case HcVariant::HC2:
      require_feasible(fit, "HC2");
      w = e2.array() / (1.0 - fit.leverage().array());
      kind = VcovKind::HC2;
      break;
    case HcVariant::HC3:
      require_feasible(fit, "HC3");
      w = e2.array() / (1.0 - fit.leverage().array()).square();
      kind = VcovKind::HC3;
      break;
  }
  return make_estimate(sandwich(fit, w), kind, n - k);
}

double bm_dof(const FitResult& fit, std::size_t coef) {
  // V_j = Σ w_i ε̂_i² with w_i = a_i²/(1-h_ii), a = X (X'X)^{-1} e_j. Under
  // ε ~ N(0, D), ε̂ = Mε and V_j = ε' M W M ε, whose spectrum λ is that of
  // D^{1/2} M W M D^{1/2}. D is the linear skedastic fit H·(ε̂²/(1-h)).
  // M W M = W + L C L' with L = [Q, WQ], C = [[Q'WQ, -I], [-I, 0]] keeps the
  // traces at O(n k²).
  const MatrixXd& x = fit.x();
  const auto n = x.rows();
  const auto k = x.cols();
  const VectorXd one_minus_h = (1.0 - fit.leverage().array()).matrix();

  const VectorXd a = x * fit.bread().col(static_cast<Eigen::Index>(coef));
  const VectorXd w = a.array().square() / one_minus_h.array();

  // Orthonormal basis of col(X); H = Q Q'.
  Eigen::HouseholderQR<MatrixXd> qr(x);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, k);

  const VectorXd omega = fit.residuals.array().square() / one_minus_h.array();
  VectorXd d = (q * (q.transpose() * omega)).cwiseMax(0.0);
  if (!(d.sum() > 0.0)) d.setOnes();

  MatrixXd l(n, 2 * k);
  l.leftCols(k) = q;
  l.rightCols(k) = w.asDiagonal() * q;
  MatrixXd c = MatrixXd::Zero(2 * k, 2 * k);
  c.topLeftCorner(k, k) = q.transpose() * w.asDiagonal() * q;
  c.topRightCorner(k, k) = -MatrixXd::Identity(k, k);
  c.bottomLeftCorner(k, k) = -MatrixXd::Identity(k, k);

  const MatrixXd g = l.transpose() * d.asDiagonal() * l;
  const VectorXd dwd = d.array().square() * w.array();
  const MatrixXd f = l.transpose() * dwd.asDiagonal() * l;

  const double sum_lambda = d.dot(w) + (c * g).trace();
  const MatrixXd cg = c * g;
  const double sum_lambda2 =
      (d.array() * w.array()).square().sum() + 2.0 * (c * f).trace() + (cg * cg).trace();

  if (!(sum_lambda2 > 0.0) || !(sum_lambda > 0.0)) {
    return static_cast<double>(fit.n() - fit.k());
  }
  return sum_lambda * sum_lambda / sum_lambda2;
}

VcovEstimate vcov_bm(const FitResult& fit) {
  require_feasible(fit, "Bell-McCaffrey");
  VcovEstimate v = vcov_hc(fit, HcVariant::HC2);
  v.kind = VcovKind::HC2_BM;
  for (std::size_t j = 0; j < fit.k(); ++j) {
    v.dof(static_cast<Eigen::Index>(j)) = bm_dof(fit, j);
  }
  return v;
}

namespace {

MatrixXd cluster_meat(const FitResult& fit, const ClusterMap& clusters) {
  const MatrixXd& x = fit.x();
  MatrixXd scores = MatrixXd::Zero(static_cast<Eigen::Index>(clusters.n_clusters()), x.cols());
  const auto& labels = clusters.labels();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    scores.row(labels[static_cast<std::size_t>(i)]) += fit.residuals(i) * x.row(i);
  }
  return scores.transpose() * scores;
}

double cluster_factor(const FitResult& fit, std::size_t n_clusters, ClusterOptions options) {
  if (!options.small_sample_adjustment) return 1.0;
  const double c = static_cast<double>(n_clusters);
  const double n = static_cast<double>(fit.n());
  const double k = static_cast<double>(fit.k());
  return (c / (c - 1.0)) * ((n - 1.0) / (n - k));
}

MatrixXd cluster_matrix(const FitResult& fit, const ClusterMap& clusters, ClusterOptions options) {
  const double a = cluster_factor(fit, clusters.n_clusters(), options);
  return symmetrize(fit.bread() * (a * cluster_meat(fit, clusters)) * fit.bread());
}

}  // namespace

VcovEstimate vcov_cluster(const FitResult& fit, const ClusterMap& clusters,
                          ClusterOptions options) {
  require_clusters(fit, clusters);
  VcovEstimate v = make_estimate(cluster_matrix(fit, clusters, options), VcovKind::ClusterLZ,
                                 static_cast<double>(clusters.n_clusters()) - 1.0);
  v.cluster_counts.emplace_back(clusters.name(), clusters.n_clusters());
  return v;
}

VcovEstimate vcov_multiway(const FitResult& fit, const ClusterMap& dim_a,
                           const ClusterMap& dim_b, ClusterOptions options) {
  require_clusters(fit, dim_a);
  require_clusters(fit, dim_b);
  const ClusterMap both = ClusterMap::intersect(dim_a, dim_b);

  const MatrixXd m = symmetrize(cluster_matrix(fit, dim_a, options) +
                                cluster_matrix(fit, dim_b, options) -
                                cluster_matrix(fit, both, options));

  const double dof =
      static_cast<double>(std::min(dim_a.n_clusters(), dim_b.n_clusters())) - 1.0;
  VcovEstimate v = make_estimate(m, VcovKind::Multiway, dof);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(v.matrix);
  if (eig.eigenvalues().minCoeff() < 0.0) {
    const VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    v.matrix = symmetrize(eig.eigenvectors() * clipped.asDiagonal() *
                          eig.eigenvectors().transpose());
    v.eigen_repaired = true;
    v.notes.push_back("negative eigenvalues truncated to zero to restore a PSD matrix");
  }
  v.cluster_counts.emplace_back(dim_a.name(), dim_a.n_clusters());
  v.cluster_counts.emplace_back(dim_b.name(), dim_b.n_clusters());
  v.cluster_counts.emplace_back(both.name(), both.n_clusters());
  v.notes.push_back("reference dof min(C_a, C_b) - 1 is a conservative choice");
  return v;
}

double effective_clusters(const FitResult& fit, const ClusterMap& clusters,
                          std::size_t coef, double rho) {
  require_clusters(fit, clusters);
  if (coef >= fit.k()) {
    throw Error(ErrorCode::ShapeMismatch, "coefficient index out of range");
  }
  const VectorXd xi = fit.x() * fit.bread().col(static_cast<Eigen::Index>(coef));
  const std::size_t g = clusters.n_clusters();
  std::vector<double> sum(g, 0.0), sum_sq(g, 0.0);
  const auto& labels = clusters.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = xi(static_cast<Eigen::Index>(i));
    sum[static_cast<std::size_t>(labels[i])] += v;
    sum_sq[static_cast<std::size_t>(labels[i])] += v * v;
  }
  std::vector<double> gamma(g);
  double mean = 0.0;
  for (std::size_t c = 0; c < g; ++c) {
    gamma[c] = (1.0 - rho) * sum_sq[c] + rho * sum[c] * sum[c];
    mean += gamma[c];
  }
  mean /= static_cast<double>(g);
  if (!(mean > 0.0)) return static_cast<double>(g);
  double cv2 = 0.0;
  for (double v : gamma) cv2 += (v - mean) * (v - mean);
  cv2 /= static_cast<double>(g) * mean * mean;
  return static_cast<double>(g) / (1.0 + cv2);
}

VcovEstimate compute_vcov(const FitResult& fit, const VcovRequest& request) {
  const auto need = [&](std::size_t count) {
    if (request.clusters.size() < count) {
      throw Error(ErrorCode::ConfigError, std::string(to_string(request.kind)) + " needs " +
                                              std::to_string(count) + " cluster dimension(s)");
    }
  };
  switch (request.kind) {
    case VcovKind::Conventional: return vcov_conventional(fit);
    case VcovKind::HC0: return vcov_hc(fit, HcVariant::HC0);
    case VcovKind::HC1: return vcov_hc(fit, HcVariant::HC1);
    case VcovKind::HC2: return vcov_hc(fit, HcVariant::HC2);
    case VcovKind::HC3: return vcov_hc(fit, HcVariant::HC3);
    case VcovKind::HC2_BM: return vcov_bm(fit);
    case VcovKind::ClusterLZ:
      need(1);
      return vcov_cluster(fit, request.clusters[0], request.options);
    case VcovKind::Multiway:
      need(2);
      return vcov_multiway(fit, request.clusters[0], request.clusters[1], request.options);
    case VcovKind::MaxConventionalRobust:
      return max_se_heuristic(vcov_conventional(fit), vcov_hc(fit, HcVariant::HC1));
  }
  throw Error(ErrorCode::ConfigError, "unsupported variance kind");
}

}  // namespace robinf
