#include "robinf/resample.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>

#include "parallel.hpp"
#include "robinf/error.hpp"
#include "robinf/rng.hpp"

namespace robinf {

namespace {

struct Prepared {
  std::shared_ptr<const Design> design;
  FitResult fit;
};

Prepared prepare(const Dataset& data, const ModelSpec& spec) {
  data.validate();
  auto [x, names] = select_columns(data, spec);
  auto design = std::make_shared<const Design>(std::move(x), std::move(names));
  FitResult fit = fit_ols(design, data.outcome);
  return {design, std::move(fit)};
}

void require_replications(const ResamplePlan& plan) {
  if (plan.replications < 1) {
    throw Error(ErrorCode::TooFewReplications, "at least one replication is required");
  }
}

bool is_degenerate(const Error& e) {
  switch (e.code()) {
    case ErrorCode::RankDeficient:
    case ErrorCode::TooFewRows:
    case ErrorCode::LeverageInfeasible:
    case ErrorCode::SingleCluster:
      return true;
    default:
      return false;
  }
}


bool needs_clusters(VcovKind kind) {
  return kind == VcovKind::ClusterLZ || kind == VcovKind::Multiway;
}

double studentize(double diff, double se) {
  if (diff == 0.0) return 0.0;
  return diff / se;
}

// Fills t statistics from coefficient draws and per-replication SEs.
void finish_t(ResampleDistribution& dist, TCentering centering) {
  if (!dist.standard_errors) return;
  const auto r = dist.coefficients.rows();
  const auto k = dist.coefficients.cols();
  const VectorXd center = centering == TCentering::BootstrapMean
                              ? VectorXd(dist.coefficients.colwise().mean().transpose())
                              : dist.dgp_beta;
  MatrixXd t(r, k);
  for (Eigen::Index b = 0; b < r; ++b) {
    for (Eigen::Index j = 0; j < k; ++j) {
      t(b, j) = studentize(dist.coefficients(b, j) - center(j), (*dist.standard_errors)(b, j));
    }
  }
  dist.t_statistics = std::move(t);
}

class RedrawBudget {
 public:
  explicit RedrawBudget(std::size_t replications) : limit_(100 * replications) {}
  void spend() {
    if (++used_ > limit_) {
      throw Error(ErrorCode::DegenerateResample,
                  "more than " + std::to_string(limit_) + " degenerate resamples redrawn",
                  "the design is too sparse for this resampling scheme");
    }
  }
  std::size_t used() const { return used_.load(); }

 private:
  std::size_t limit_;
  std::atomic<std::size_t> used_{0};
};

ResampleDistribution make_distribution(const ResamplePlan& plan, const Prepared& p,
                                       const VectorXd& dgp_beta) {
  ResampleDistribution dist;
  dist.scheme = plan.scheme;
  dist.seed = plan.seed;
  dist.names = p.design->names();
  dist.original_beta = p.fit.beta;
  dist.dgp_beta = dgp_beta;
  dist.coefficients.resize(static_cast<Eigen::Index>(plan.replications),
                           static_cast<Eigen::Index>(p.design->k()));
  dist.standard_errors = MatrixXd(dist.coefficients.rows(), dist.coefficients.cols());
  dist.warnings = plan.warnings(false);
  return dist;
}

// Fixed-design schemes: y*_b = Xβ_dgp + noise_b; refit and record.
template <typename NoiseFn>
ResampleDistribution fixed_design_run(const ResamplePlan& plan, const Prepared& p,
                                      const FitResult& dgp, NoiseFn&& noise) {
  ResampleDistribution dist = make_distribution(plan, p, dgp.beta);
  VcovRequest request{replication_se_kind(plan), {}, {}};
  if (needs_clusters(request.kind)) {
    if (!plan.cluster_map) {
      throw Error(ErrorCode::ConfigError, "cluster standard errors need a cluster map");
    }
    request.clusters.push_back(*plan.cluster_map);
  }
  const VectorXd fitted = p.design->matrix() * dgp.beta;
  detail::parallel_for(plan.replications, plan.workers, [&](std::size_t b) {
    auto rng = substream(plan.seed, b);
    const VectorXd y = fitted + noise(rng, b);
    const FitResult f = fit_ols(p.design, y);
    const auto bi = static_cast<Eigen::Index>(b);
    dist.coefficients.row(bi) = f.beta.transpose();
    dist.standard_errors->row(bi) = compute_vcov(f, request).se().transpose();
  });
  finish_t(dist, plan.t_centering);
  return dist;
}

FitResult dgp_fit(const ResamplePlan& plan, const Prepared& p, const VectorXd& y) {
  if (plan.null_imposition) return fit_restricted(p.design, y, *plan.null_imposition);
  return p.fit;
}

double binomial(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(c);
}

// All k-subsets of {0..n-1} in lexicographic order, as 0/1 indicator vectors.
std::vector<std::vector<char>> all_subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<char>> out;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    std::vector<char> ind(n, 0);
    for (auto i : pick) ind[i] = 1;
    out.push_back(std::move(ind));
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

// `scale` (the largest |y|) keeps round-off ties visible when the observed
// estimate is itself zero up to rounding.
bool at_least_as_extreme(double draw, double observed, double scale) {
  const double ref = std::abs(observed);
  const double tol = kRandomizationTieTolerance * std::max({ref, std::abs(draw), scale});
  return std::abs(draw) >= ref - tol;
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Pairs: return "pairs";
    case Scheme::Residual: return "residual";
    case Scheme::Wild: return "wild";
    case Scheme::WildCluster: return "wild_cluster";
    case Scheme::RandomizationInference: return "ri";
  }
  return "unknown";
}

std::optional<Scheme> parse_scheme(std::string_view text) {
  static const std::map<std::string_view, Scheme> table = {
      {"pairs", Scheme::Pairs},         {"residual", Scheme::Residual},
      {"wild", Scheme::Wild},           {"wild_cluster", Scheme::WildCluster},
      {"wildcluster", Scheme::WildCluster}, {"ri", Scheme::RandomizationInference},
      {"randomization", Scheme::RandomizationInference}};
  auto it = table.find(text);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(WeightLaw law) {
  switch (law) {
    case WeightLaw::Rademacher: return "rademacher";
    case WeightLaw::Mammen: return "mammen";
    case WeightLaw::Webb: return "webb";
  }
  return "unknown";
}

std::optional<WeightLaw> parse_weight_law(std::string_view text) {
  if (text == "rademacher") return WeightLaw::Rademacher;
  if (text == "mammen") return WeightLaw::Mammen;
  if (text == "webb") return WeightLaw::Webb;
  return std::nullopt;
}

std::string_view to_string(AssignmentScheme scheme) {
  switch (scheme) {
    case AssignmentScheme::Complete: return "complete";
    case AssignmentScheme::Bernoulli: return "bernoulli";
    case AssignmentScheme::Cluster: return "cluster";
  }
  return "unknown";
}

std::optional<AssignmentScheme> parse_assignment(std::string_view text) {
  if (text == "complete") return AssignmentScheme::Complete;
  if (text == "bernoulli") return AssignmentScheme::Bernoulli;
  if (text == "cluster") return AssignmentScheme::Cluster;
  return std::nullopt;
}

std::vector<std::string> ResamplePlan::warnings(bool pivotal) const {
  std::vector<std::string> out;
  if (scheme == Scheme::RandomizationInference) return out;
  if (replications < kMinReplicationsSE) {
    out.push_back("replications r = " + std::to_string(replications) +
                  " below the recommended 5,000 for bootstrap standard errors");
  }
  if (pivotal && replications < kMinReplicationsPivotal) {
    out.push_back("replications r = " + std::to_string(replications) +
                  " below the recommended 10,000 for pivotal statistics and intervals");
  }
  return out;
}

VcovKind replication_se_kind(const ResamplePlan& plan) {
  if (plan.se_kind) return *plan.se_kind;
  switch (plan.scheme) {
    case Scheme::Residual: return VcovKind::Conventional;
    case Scheme::WildCluster: return VcovKind::ClusterLZ;
    case Scheme::Pairs: return plan.cluster_map ? VcovKind::ClusterLZ : VcovKind::HC1;
    default: return VcovKind::HC1;
  }
}

VectorXd draw_wild_weights(WeightLaw law, std::mt19937_64& rng, std::size_t count) {
  VectorXd v(static_cast<Eigen::Index>(count));
  switch (law) {
    case WeightLaw::Rademacher: {
      std::uniform_int_distribution<int> coin(0, 1);
      for (auto& x : v) x = coin(rng) ? 1.0 : -1.0;
      break;
    }
    case WeightLaw::Mammen: {
      const double s5 = std::sqrt(5.0);
      const double low = -(s5 - 1.0) / 2.0;
      const double high = (s5 + 1.0) / 2.0;
      const double p_low = (s5 + 1.0) / (2.0 * s5);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& x : v) x = u(rng) < p_low ? low : high;
      break;
    }
    case WeightLaw::Webb: {
      static const double points[6] = {-std::sqrt(1.5), -1.0, -std::sqrt(0.5),
                                       std::sqrt(0.5),  1.0,  std::sqrt(1.5)};
      std::uniform_int_distribution<int> die(0, 5);
      for (auto& x : v) x = points[die(rng)];
      break;
    }
    default:
      throw Error(ErrorCode::WeightLawUnavailable, "unknown wild weight law");
  }
  return v;
}

VectorXd replication_weights(const ResamplePlan& plan, std::size_t n, std::size_t index) {
  auto rng = substream(plan.seed, index);
  if (plan.scheme == Scheme::WildCluster) {
    if (!plan.cluster_map || plan.cluster_map->size() != n) {
      throw Error(ErrorCode::ConfigError, "wild cluster bootstrap needs a cluster map for every row");
    }
    const VectorXd per_cluster =
        draw_wild_weights(plan.wild_weight_law, rng, plan.cluster_map->n_clusters());
    VectorXd v(static_cast<Eigen::Index>(n));
    const auto& labels = plan.cluster_map->labels();
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = per_cluster(labels[i]);
    return v;
  }
  return draw_wild_weights(plan.wild_weight_law, rng, n);
}

FitResult fit_restricted(std::shared_ptr<const Design> design, const VectorXd& y,
                         const NullRestriction& restriction) {
  const auto k = static_cast<Eigen::Index>(design->k());
  const auto j = static_cast<Eigen::Index>(restriction.coef);
  if (j >= k) throw Error(ErrorCode::ConfigError, "restricted coefficient index out of range");
  const MatrixXd& x = design->matrix();
  const VectorXd y_adj = y - restriction.value * x.col(j);
  VectorXd beta(k);
  if (k == 1) {
    beta(0) = restriction.value;
  } else {
    MatrixXd reduced(x.rows(), k - 1);
    std::vector<std::string> names;
    for (Eigen::Index c = 0, out = 0; c < k; ++c) {
      if (c == j) continue;
      reduced.col(out++) = x.col(c);
      names.push_back(design->names()[static_cast<std::size_t>(c)]);
    }
    const Design sub(std::move(reduced), std::move(names));
    const VectorXd b = sub.solve(y_adj);
    for (Eigen::Index c = 0, in = 0; c < k; ++c) beta(c) = c == j ? restriction.value : b(in++);
  }
  FitResult fit;
  fit.beta = beta;
  fit.residuals = y - x * beta;
  fit.sigma2_hat = fit.residuals.squaredNorm() / static_cast<double>(design->n() - design->k() + 1);
  fit.design = std::move(design);
  return fit;
}

ResampleDistribution bootstrap_pairs(const Dataset& data, const ModelSpec& spec,
                                     const ResamplePlan& plan) {
  if (plan.scheme != Scheme::Pairs) {
    throw Error(ErrorCode::ConfigError, "bootstrap_pairs needs a Pairs plan");
  }
  require_replications(plan);
  const Prepared p = prepare(data, spec);
  ResampleDistribution dist = make_distribution(plan, p, p.fit.beta);
  const MatrixXd& x = p.design->matrix();
  const auto n = p.design->n();

  std::vector<std::vector<std::size_t>> members;
  if (plan.cluster_map) {
    if (plan.cluster_map->size() != n) {
      throw Error(ErrorCode::ShapeMismatch, "cluster map does not cover every row");
    }
    members.resize(plan.cluster_map->n_clusters());
    for (std::size_t i = 0; i < n; ++i) {
      members[static_cast<std::size_t>(plan.cluster_map->labels()[i])].push_back(i);
    }
  }
  const VcovKind se_kind = replication_se_kind(plan);
  if (needs_clusters(se_kind) && !plan.cluster_map) {
    throw Error(ErrorCode::ConfigError, "cluster standard errors need a cluster map");
  }

  RedrawBudget budget(plan.replications);
  detail::parallel_for(plan.replications, plan.workers, [&](std::size_t b) {
    auto rng = substream(plan.seed, b);
    while (true) {
      std::vector<std::size_t> rows;
      std::vector<int> labels;
      if (plan.cluster_map) {
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        for (std::size_t c = 0; c < members.size(); ++c) {
          const auto& m = members[pick(rng)];
          rows.insert(rows.end(), m.begin(), m.end());
          labels.insert(labels.end(), m.size(), static_cast<int>(c));
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        rows.resize(n);
        for (auto& r : rows) r = pick(rng);
      }
      MatrixXd xb(static_cast<Eigen::Index>(rows.size()), x.cols());
      VectorXd yb(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
        yb(static_cast<Eigen::Index>(i)) = data.outcome(static_cast<Eigen::Index>(rows[i]));
      }
      try {
        auto design = std::make_shared<const Design>(std::move(xb), p.design->names());
        const FitResult f = fit_ols(design, yb);
        VcovRequest request{se_kind, {}, {}};
        if (needs_clusters(se_kind)) {
          // Every drawn cluster copy is its own cluster.
          request.clusters.push_back(ClusterMap::from_raw("draw", labels));
        }
        const VectorXd se = compute_vcov(f, request).se();
        const auto bi = static_cast<Eigen::Index>(b);
        dist.coefficients.row(bi) = f.beta.transpose();
        dist.standard_errors->row(bi) = se.transpose();
        return;
      } catch (const Error& e) {
        if (!is_degenerate(e)) throw;
        budget.spend();
      }
    }
  });
  dist.redraws = budget.used();
  finish_t(dist, plan.t_centering);
  return dist;
}

ResampleDistribution bootstrap_residual(const Dataset& data, const ModelSpec& spec,
                                        const ResamplePlan& plan) {
  if (plan.scheme != Scheme::Residual) {
    throw Error(ErrorCode::ConfigError, "bootstrap_residual needs a Residual plan");
  }
  require_replications(plan);
  const Prepared p = prepare(data, spec);
  const FitResult dgp = dgp_fit(plan, p, data.outcome);
  const VectorXd centered = dgp.residuals.array() - dgp.residuals.mean();
  const auto n = p.design->n();
  return fixed_design_run(plan, p, dgp, [&](std::mt19937_64& rng, std::size_t) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    VectorXd e(static_cast<Eigen::Index>(n));
    for (auto& v : e) v = centered(static_cast<Eigen::Index>(pick(rng)));
    return e;
  });
}

ResampleDistribution bootstrap_wild(const Dataset& data, const ModelSpec& spec,
                                    const ResamplePlan& plan) {
  if (plan.scheme != Scheme::Wild && plan.scheme != Scheme::WildCluster) {
    throw Error(ErrorCode::ConfigError, "bootstrap_wild needs a Wild or WildCluster plan");
  }
  require_replications(plan);
  const Prepared p = prepare(data, spec);
  const FitResult dgp = dgp_fit(plan, p, data.outcome);
  const auto n = p.design->n();
  if (plan.scheme == Scheme::WildCluster &&
      (!plan.cluster_map || plan.cluster_map->size() != n)) {
    throw Error(ErrorCode::ConfigError, "wild cluster bootstrap needs a cluster map for every row");
  }
  const std::vector<int>* labels =
      plan.scheme == Scheme::WildCluster ? &plan.cluster_map->labels() : nullptr;
  const std::size_t draws = labels ? plan.cluster_map->n_clusters() : n;
  return fixed_design_run(plan, p, dgp, [&](std::mt19937_64& rng, std::size_t) {
    const VectorXd v = draw_wild_weights(plan.wild_weight_law, rng, draws);
    VectorXd e(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      e(ii) = dgp.residuals(ii) * (labels ? v((*labels)[i]) : v(ii));
    }
    return e;
  });
}

ResampleDistribution bootstrap(const Dataset& data, const ModelSpec& spec,
                               const ResamplePlan& plan) {
  switch (plan.scheme) {
    case Scheme::Pairs: return bootstrap_pairs(data, spec, plan);
    case Scheme::Residual: return bootstrap_residual(data, spec, plan);
    case Scheme::Wild:
    case Scheme::WildCluster: return bootstrap_wild(data, spec, plan);
    case Scheme::RandomizationInference: break;
  }
  throw Error(ErrorCode::ConfigError, "randomization inference is not a bootstrap scheme");
}

double bootstrap_se(const ResampleDistribution& dist, std::size_t coef) {
  const auto r = dist.coefficients.rows();
  if (r < 2) throw Error(ErrorCode::TooFewReplications, "bootstrap SE needs r >= 2");
  const auto col = dist.coefficients.col(static_cast<Eigen::Index>(coef));
  const double mean = col.mean();
  return std::sqrt((col.array() - mean).square().sum() / static_cast<double>(r - 1));
}

namespace {

// ceil(x) for order-statistic positions, immune to products like
// 10000 * 0.975 landing one ulp above an integer.
std::size_t order_position(double x) {
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

}  // namespace

PercentileBounds percentile_indices(std::size_t r, double alpha) {
  const double rr = static_cast<double>(r);
  return {order_position(rr * alpha / 2.0), order_position(rr * (1.0 - alpha / 2.0))};
}

std::size_t bootstrap_t_index(std::size_t r, double alpha) {
  return order_position(static_cast<double>(r) * (1.0 - alpha));
}

PercentileInterval percentile_ci(const ResampleDistribution& dist, std::size_t coef,
                                 double alpha) {
  const std::size_t r = dist.replications();
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::ConfigError, "alpha must lie in (0, 1)");
  if (static_cast<double>(r) * alpha / 2.0 < 1.0 - 1e-12) {
    throw Error(ErrorCode::TooFewReplications,
                "percentile interval needs r·α/2 >= 1 (r = " + std::to_string(r) + ")");
  }
  const auto bounds = percentile_indices(r, alpha);
  std::vector<double> draws(r);
  for (std::size_t b = 0; b < r; ++b) {
    draws[b] = dist.coefficients(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(coef));
  }
  std::sort(draws.begin(), draws.end());
  return {{draws[bounds.lower_index - 1], draws[bounds.upper_index - 1]}, bounds};
}

BootstrapTResult bootstrap_t(const ResampleDistribution& dist, const FitResult& fit,
                             const VcovRequest& request, std::size_t coef, double alpha,
                             double null_value) {
  if (!dist.t_statistics) {
    throw Error(ErrorCode::MissingPerReplicationSE,
                "distribution carries no per-replication standard errors");
  }
  const std::size_t r = dist.replications();
  if (r < 1000) {
    throw Error(ErrorCode::TooFewReplications, "bootstrap-t needs r >= 1,000");
  }
  std::vector<double> abs_t(r);
  for (std::size_t b = 0; b < r; ++b) {
    abs_t[b] = std::abs((*dist.t_statistics)(static_cast<Eigen::Index>(b),
                                              static_cast<Eigen::Index>(coef)));
  }
  std::sort(abs_t.begin(), abs_t.end());

  BootstrapTResult out;
  out.critical_index = bootstrap_t_index(r, alpha);
  out.critical_value = abs_t[std::clamp<std::size_t>(out.critical_index, 1, r) - 1];
  const double se = compute_vcov(fit, request).se()(static_cast<Eigen::Index>(coef));
  const double estimate = fit.beta(static_cast<Eigen::Index>(coef));
  out.observed_statistic = studentize(estimate - null_value, se);
  const double observed = std::abs(out.observed_statistic);
  const auto first = std::lower_bound(abs_t.begin(), abs_t.end(), observed);
  out.p_value = static_cast<double>(abs_t.end() - first) / static_cast<double>(r);
  out.ci = {estimate - out.critical_value * se, estimate + out.critical_value * se};
  return out;
}

RandomizationResult randomization_inference(const Dataset& data, const ModelSpec& spec,
                                            const ResamplePlan& plan) {
  if (!data.treatment || !data.treatment_name) {
    throw Error(ErrorCode::NoTreatment, "dataset has no treatment column");
  }
  require_replications(plan);
  const Prepared p = prepare(data, spec);
  const auto& names = p.design->names();
  const auto it = std::find(names.begin(), names.end(), *data.treatment_name);
  if (it == names.end()) {
    throw Error(ErrorCode::NoTreatment,
                "treatment '" + *data.treatment_name + "' is not a regressor in the model");
  }
  const auto tcol = static_cast<Eigen::Index>(it - names.begin());
  const VectorXd& treat = *data.treatment;
  const std::size_t n = p.design->n();

  VcovRequest request{plan.se_kind.value_or(VcovKind::HC1), {}, {}};
  if (needs_clusters(request.kind)) {
    if (!plan.cluster_map) {
      throw Error(ErrorCode::ConfigError, "cluster standard errors need a cluster map");
    }
    request.clusters.push_back(*plan.cluster_map);
  }

  // Units being randomized: rows, or clusters for cluster assignment.
  std::vector<int> unit_of(n);
  std::size_t units = n;
  if (plan.assignment == AssignmentScheme::Cluster) {
    if (!plan.cluster_map || plan.cluster_map->size() != n) {
      throw Error(ErrorCode::UnknownAssignmentScheme,
                  "cluster assignment needs a cluster map for every row");
    }
    units = plan.cluster_map->n_clusters();
    unit_of = plan.cluster_map->labels();
  } else {
    std::iota(unit_of.begin(), unit_of.end(), 0);
  }
  std::vector<double> unit_treat(units, -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double& slot = unit_treat[static_cast<std::size_t>(unit_of[i])];
    const double t = treat(static_cast<Eigen::Index>(i));
    if (slot >= 0.0 && slot != t) {
      throw Error(ErrorCode::InvalidLabels, "treatment varies within a randomization cluster");
    }
    slot = t;
  }
  const auto treated = static_cast<std::size_t>(std::count(unit_treat.begin(), unit_treat.end(), 1.0));

  struct Draw {
    double coef = 0.0;
    double stat = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
  };
  auto evaluate = [&](const std::vector<char>& assign) {
    MatrixXd x = p.design->matrix();
    for (std::size_t i = 0; i < n; ++i) {
      x(static_cast<Eigen::Index>(i), tcol) = assign[static_cast<std::size_t>(unit_of[i])] ? 1.0 : 0.0;
    }
    Draw d;
    try {
      auto design = std::make_shared<const Design>(std::move(x), names);
      const FitResult f = fit_ols(design, data.outcome);
      d.coef = f.beta(tcol);
      d.ok = true;
      try {
        const double se = compute_vcov(f, request).se()(tcol);
        d.stat = studentize(d.coef, se);
      } catch (const Error& e) {
        if (!is_degenerate(e)) throw;
      }
    } catch (const Error& e) {
      if (!is_degenerate(e)) throw;
    }
    return d;
  };

  RandomizationResult out;
  std::vector<char> realized(units);
  for (std::size_t u = 0; u < units; ++u) realized[u] = unit_treat[u] == 1.0;
  const Draw obs = evaluate(realized);
  if (!obs.ok) {
    throw Error(ErrorCode::RankDeficient, "observed assignment gives a rank-deficient design");
  }
  out.observed = obs.coef;
  const double scale = data.outcome.size() ? data.outcome.cwiseAbs().maxCoeff() : 0.0;
  if (!std::isnan(obs.stat)) out.observed_statistic = obs.stat;

  const bool bernoulli = plan.assignment == AssignmentScheme::Bernoulli;
  if (bernoulli && !(plan.bernoulli_p > 0.0 && plan.bernoulli_p < 1.0)) {
    throw Error(ErrorCode::ConfigError, "Bernoulli assignment probability must lie in (0, 1)");
  }
  const double possible = bernoulli ? std::pow(2.0, static_cast<double>(units))
                                    : binomial(units, treated);

  // Bernoulli enumeration indexes assignments by a machine word.
  const bool enumerable = !bernoulli || units < 48;
  if (enumerable && possible <= static_cast<double>(plan.exhaustive_threshold)) {
    out.exhaustive = true;
    std::vector<std::vector<char>> assignments;
    std::vector<double> prob;
    if (bernoulli) {
      const std::size_t total = std::size_t{1} << units;
      for (std::size_t mask = 0; mask < total; ++mask) {
        std::vector<char> a(units);
        std::size_t count = 0;
        for (std::size_t u = 0; u < units; ++u) count += (a[u] = (mask >> u) & 1u);
        assignments.push_back(std::move(a));
        prob.push_back(std::pow(plan.bernoulli_p, static_cast<double>(count)) *
                       std::pow(1.0 - plan.bernoulli_p, static_cast<double>(units - count)));
      }
    } else {
      assignments = all_subsets(units, treated);
      prob.assign(assignments.size(), 1.0);
    }
    std::vector<Draw> draws(assignments.size());
    detail::parallel_for(assignments.size(), plan.workers,
                         [&](std::size_t a) { draws[a] = evaluate(assignments[a]); });
    double mass = 0.0;
    double extreme = 0.0;
    std::vector<double> kept, kept_stat, kept_w;
    for (std::size_t a = 0; a < draws.size(); ++a) {
      if (!draws[a].ok) {
        ++out.excluded_assignments;
        continue;
      }
      mass += prob[a];
      if (at_least_as_extreme(draws[a].coef, out.observed, scale)) extreme += prob[a];
      kept.push_back(draws[a].coef);
      kept_stat.push_back(draws[a].stat);
      kept_w.push_back(prob[a]);
    }
    out.ri_p_value = extreme / mass;
    out.assignments = kept.size();
    out.null_distribution = Eigen::Map<VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
    out.null_statistics =
        Eigen::Map<VectorXd>(kept_stat.data(), static_cast<Eigen::Index>(kept_stat.size()));
    out.weights = Eigen::Map<VectorXd>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size())) / mass;
    out.notes.push_back("exhaustive enumeration of " + std::to_string(out.assignments) +
                        " assignments, realized assignment included");
    if (out.excluded_assignments) {
      out.notes.push_back(std::to_string(out.excluded_assignments) +
                          " degenerate assignments excluded and probabilities renormalized");
    }
    return out;
  }

  std::vector<Draw> draws(plan.replications);
  RedrawBudget budget(plan.replications);
  detail::parallel_for(plan.replications, plan.workers, [&](std::size_t b) {
    auto rng = substream(plan.seed, b);
    while (true) {
      std::vector<char> a(units, 0);
      if (bernoulli) {
        std::bernoulli_distribution coin(plan.bernoulli_p);
        for (auto& v : a) v = coin(rng);
      } else {
        std::vector<std::size_t> order(units);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t u = 0; u < treated; ++u) a[order[u]] = 1;
      }
      draws[b] = evaluate(a);
      if (draws[b].ok) return;
      budget.spend();
    }
  });
  out.redraws = budget.used();
  out.assignments = plan.replications;
  out.null_distribution.resize(static_cast<Eigen::Index>(plan.replications));
  out.null_statistics.resize(static_cast<Eigen::Index>(plan.replications));
  std::size_t extreme = 0;
  for (std::size_t b = 0; b < plan.replications; ++b) {
    out.null_distribution(static_cast<Eigen::Index>(b)) = draws[b].coef;
    out.null_statistics(static_cast<Eigen::Index>(b)) = draws[b].stat;
    if (at_least_as_extreme(draws[b].coef, out.observed, scale)) ++extreme;
  }
  out.weights = VectorXd::Constant(static_cast<Eigen::Index>(plan.replications),
                                   1.0 / static_cast<double>(plan.replications));
  out.ri_p_value = static_cast<double>(extreme) / static_cast<double>(plan.replications);
  out.notes.push_back("Monte Carlo randomization: p-value denominator is the " +
                      std::to_string(plan.replications) +
                      " random reassignments; the observed assignment is not added");
  return out;
}

}  // namespace robinf
