#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "robinf/regression.hpp"
#include "robinf/vcov.hpp"

namespace robinf {

enum class Scheme { Pairs, Residual, Wild, WildCluster, RandomizationInference };
enum class WeightLaw { Rademacher, Mammen, Webb };
enum class AssignmentScheme { Complete, Bernoulli, Cluster };
// Centre of the per-replication t statistics: the bootstrap mean of the
// draws, or the coefficient of the resampling data-generating process
// (original estimate, or the imposed null value).
enum class TCentering { BootstrapMean, PointEstimate };

std::string_view to_string(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view text);
std::string_view to_string(WeightLaw law);
std::optional<WeightLaw> parse_weight_law(std::string_view text);
std::string_view to_string(AssignmentScheme scheme);
std::optional<AssignmentScheme> parse_assignment(std::string_view text);

inline constexpr std::size_t kMinReplicationsSE = 5000;
inline constexpr std::size_t kMinReplicationsPivotal = 10000;
inline constexpr std::size_t kDefaultExhaustiveThreshold = 100000;

// Restriction β_coef = value imposed on the resampling DGP.
struct NullRestriction {
  std::size_t coef = 0;
  double value = 0.0;
};

struct ResamplePlan {
  Scheme scheme = Scheme::Pairs;
  std::size_t replications = kMinReplicationsPivotal;
  std::uint64_t seed = 0;
  std::optional<ClusterMap> cluster_map;
  WeightLaw wild_weight_law = WeightLaw::Rademacher;
  std::optional<NullRestriction> null_imposition;
  std::size_t exhaustive_threshold = kDefaultExhaustiveThreshold;
  AssignmentScheme assignment = AssignmentScheme::Complete;
  double bernoulli_p = 0.5;
  // Per-replication standard errors; unset picks conventional for Residual,
  // cluster for WildCluster or clustered Pairs, HC1 otherwise.
  std::optional<VcovKind> se_kind;
  TCentering t_centering = TCentering::BootstrapMean;
  // 0 = one worker per hardware thread. Output does not depend on it.
  std::size_t workers = 0;

  // Replication-count warnings (SE use below 5,000, pivotal use below 10,000).
  std::vector<std::string> warnings(bool pivotal) const;
};

// Estimator behind the per-replication standard errors of `plan`.
VcovKind replication_se_kind(const ResamplePlan& plan);

struct ResampleDistribution {
  Scheme scheme = Scheme::Pairs;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  // r x k coefficient draws.
  MatrixXd coefficients;
  // r x k per-replication standard errors and t statistics.
  std::optional<MatrixXd> standard_errors;
  std::optional<MatrixXd> t_statistics;
  // Original-sample estimate, kept untouched as the point estimate.
  VectorXd original_beta;
  // Coefficients of the resampling DGP (restricted when a null is imposed).
  VectorXd dgp_beta;
  std::size_t redraws = 0;
  std::vector<std::string> warnings;

  std::size_t replications() const { return static_cast<std::size_t>(coefficients.rows()); }
};

// Draws `count` weights from a mean-zero, unit-variance law.
VectorXd draw_wild_weights(WeightLaw law, std::mt19937_64& rng, std::size_t count);

// Per-observation wild weights of replication `index` (one draw per cluster
// for WildCluster).
VectorXd replication_weights(const ResamplePlan& plan, std::size_t n, std::size_t index);

// Restricted least squares with β_coef fixed at `restriction.value`.
FitResult fit_restricted(std::shared_ptr<const Design> design, const VectorXd& y,
                         const NullRestriction& restriction);

ResampleDistribution bootstrap_pairs(const Dataset& data, const ModelSpec& spec,
                                     const ResamplePlan& plan);
ResampleDistribution bootstrap_residual(const Dataset& data, const ModelSpec& spec,
                                        const ResamplePlan& plan);
ResampleDistribution bootstrap_wild(const Dataset& data, const ModelSpec& spec,
                                    const ResamplePlan& plan);
// Dispatches on plan.scheme (bootstrap schemes only).
ResampleDistribution bootstrap(const Dataset& data, const ModelSpec& spec,
                               const ResamplePlan& plan);

// sqrt( Σ(β_i - β̄)² / (r - 1) )
double bootstrap_se(const ResampleDistribution& dist, std::size_t coef);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct PercentileBounds {
  // 1-based order-statistic positions.
  std::size_t lower_index = 0;
  std::size_t upper_index = 0;
};

// ceil(r·α/2) and ceil(r·(1-α/2)).
PercentileBounds percentile_indices(std::size_t r, double alpha);
// ceil(r·(1-α)).
std::size_t bootstrap_t_index(std::size_t r, double alpha);

struct PercentileInterval {
  Interval interval;
  PercentileBounds bounds;
};

PercentileInterval percentile_ci(const ResampleDistribution& dist, std::size_t coef, double alpha);

struct BootstrapTResult {
  double critical_value = 0.0;
  std::size_t critical_index = 0;
  double observed_statistic = 0.0;
  double p_value = 1.0;
  Interval ci;
};

// Symmetric percentile-t inference for one coefficient. The observed
// statistic is (β̂ - null_value)/SE with SE from `request` on the original fit.
BootstrapTResult bootstrap_t(const ResampleDistribution& dist, const FitResult& fit,
                             const VcovRequest& request, std::size_t coef, double alpha,
                             double null_value = 0.0);

struct RandomizationResult {
  double ri_p_value = 1.0;
  double observed = 0.0;
  std::optional<double> observed_statistic;
  // Treatment coefficient under each reassignment (realized one included
  // when exhaustive).
  VectorXd null_distribution;
  // Matching t statistics, for resampling-based multiple testing.
  VectorXd null_statistics;
  // Assignment probabilities in exhaustive mode (uniform unless Bernoulli).
  VectorXd weights;
  bool exhaustive = false;
  std::size_t assignments = 0;
  std::size_t excluded_assignments = 0;
  std::size_t redraws = 0;
  std::vector<std::string> notes;
};

// Relative tolerance for |θ_a| >= |θ_obs| ties between algebraically equal
// estimates, scaled by max(|θ_obs|, |θ_a|, max|y|).
inline constexpr double kRandomizationTieTolerance = 1e-9;

RandomizationResult randomization_inference(const Dataset& data, const ModelSpec& spec,
                                            const ResamplePlan& plan);

}  // namespace robinf
