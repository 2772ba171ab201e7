#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "robinf/regression.hpp"

namespace robinf {

enum class VcovKind {
  Conventional,
  HC0,
  HC1,
  HC2,
  HC3,
  HC2_BM,
  ClusterLZ,
  Multiway,
  // Elementwise max of conventional and robust diagonals.
  MaxConventionalRobust,
};

std::string_view to_string(VcovKind kind);
std::optional<VcovKind> parse_vcov_kind(std::string_view text);

struct VcovEstimate {
  MatrixXd matrix;
  VcovKind kind = VcovKind::Conventional;
  // Reference-distribution degrees of freedom, one per coefficient.
  VectorXd dof;
  std::vector<std::pair<std::string, std::size_t>> cluster_counts;
  std::vector<std::size_t> infeasible_obs;
  // Set when negative eigenvalues were truncated to restore PSD.
  bool eigen_repaired = false;
  std::vector<std::string> notes;

  VectorXd se() const;
};

// Dense cluster labels 0..C-1 for one clustering dimension.
class ClusterMap {
 public:
  ClusterMap() = default;
  // `labels` must already be dense; throws InvalidLabels otherwise.
  ClusterMap(std::string name, std::vector<int> labels);

  // Maps arbitrary integer labels to dense ones in ascending label order.
  static ClusterMap from_raw(std::string name, std::span<const int> raw);
  static ClusterMap singletons(std::size_t n, std::string name = "row");
  // Cells of the cross-classification, labelled in (a, b) lexicographic order.
  static ClusterMap intersect(const ClusterMap& a, const ClusterMap& b);

  const std::string& name() const { return name_; }
  const std::vector<int>& labels() const { return labels_; }
  std::size_t n_clusters() const { return n_clusters_; }
  std::size_t size() const { return labels_.size(); }
  std::vector<std::size_t> cluster_sizes() const;

 private:
  std::string name_;
  std::vector<int> labels_;
  std::size_t n_clusters_ = 0;
};

enum class HcVariant { HC0, HC1, HC2, HC3 };

struct ClusterOptions {
  // a = [C/(C-1)]·[(N-1)/(N-k)] when set, a = 1 otherwise.
  bool small_sample_adjustment = true;
};

// bread · X' diag(weights) X · bread, symmetrized.
MatrixXd sandwich(const FitResult& fit, const VectorXd& weights);

VcovEstimate vcov_conventional(const FitResult& fit);
VcovEstimate vcov_hc(const FitResult& fit, HcVariant variant);
VcovEstimate vcov_bm(const FitResult& fit);
VcovEstimate vcov_cluster(const FitResult& fit, const ClusterMap& clusters,
                          ClusterOptions options = {});
VcovEstimate vcov_multiway(const FitResult& fit, const ClusterMap& dim_a,
                           const ClusterMap& dim_b, ClusterOptions options = {});

// Estimator selection for callers that pick the kind at run time (CLI,
// per-replication standard errors). ClusterLZ uses clusters[0]; Multiway uses
// clusters[0] and clusters[1]; MaxConventionalRobust pairs conventional with
// HC1.
struct VcovRequest {
  VcovKind kind = VcovKind::HC1;
  std::vector<ClusterMap> clusters;
  ClusterOptions options;
};

VcovEstimate compute_vcov(const FitResult& fit, const VcovRequest& request);

// Satterthwaite degrees of freedom for the HC2 variance of coefficient `coef`.
double bm_dof(const FitResult& fit, std::size_t coef);

// Effective number of clusters G* = C / (1 + Γ) for coefficient `coef`, where
// Γ is the squared coefficient of variation of the cluster weights
// γ_g = ξ_g' [(1-ρ) I + ρ 11'] ξ_g and ξ = X (X'X)^{-1} e_coef restricted
// to cluster g. Diagnostic only.
double effective_clusters(const FitResult& fit, const ClusterMap& clusters,
                          std::size_t coef, double rho = 1.0);

}  // namespace robinf
