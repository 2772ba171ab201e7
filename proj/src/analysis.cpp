#include "robinf/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace robinf {

namespace {

std::string_view to_string(Alternative alt) {
  switch (alt) {
    case Alternative::TwoSided: return "two_sided";
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
  }
  return "two_sided";
}

Alternative parse_alternative(const std::string& text) {
  if (text == "two_sided" || text == "two-sided") return Alternative::TwoSided;
  if (text == "greater") return Alternative::Greater;
  if (text == "less") return Alternative::Less;
  throw Error(ErrorCode::ConfigError, "unknown alternative '" + text + "'",
              "use two_sided, greater or less");
}

[[noreturn]] void config_error(const std::string& message, std::string hint = {}) {
  throw Error(ErrorCode::ConfigError, message, std::move(hint));
}

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      config_error("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
T read(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(std::string("key '") + key + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const Json& obj, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return {};
  const Json& v = obj.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) config_error(std::string("key '") + key + "' must be a string or a list");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) config_error(std::string("key '") + key + "' must list strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

template <class T, class Parse>
T parse_enum(const std::string& text, Parse parse, const char* what) {
  if (auto v = parse(text)) return *v;
  config_error(std::string("unknown ") + what + " '" + text + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

bool is_bootstrap(Scheme s) { return s != Scheme::RandomizationInference; }

bool needs_clusters(VcovKind kind) {
  return kind == VcovKind::ClusterLZ || kind == VcovKind::Multiway;
}

// Per-replication SE kind implied by the analytic choice.
std::optional<VcovKind> replication_kind_for(VcovKind analytic) {
  switch (analytic) {
    case VcovKind::Conventional:
    case VcovKind::HC0:
    case VcovKind::HC1:
    case VcovKind::HC2:
    case VcovKind::HC3:
    case VcovKind::ClusterLZ:
      return analytic;
    case VcovKind::HC2_BM:
      return VcovKind::HC2;
    default:
      return std::nullopt;
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json histogram(const VectorXd& values, const VectorXd& weights, std::size_t bins) {
  Json out;
  if (values.size() == 0) return out;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  const std::size_t nb = hi > lo ? bins : 1;
  std::vector<double> edges(nb + 1);
  for (std::size_t i = 0; i <= nb; ++i) {
    edges[i] = nb == 1 ? (i ? hi : lo) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nb);
  }
  std::vector<double> mass(nb, 0.0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    std::size_t b = nb == 1 ? 0
                            : static_cast<std::size_t>((values(i) - lo) / (hi - lo) * static_cast<double>(nb));
    b = std::min(b, nb - 1);
    mass[b] += weights(i);
  }
  out["edges"] = edges;
  out["probability"] = mass;
  return out;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

Json assumptions_block(const AnalysisConfig& c, const std::string& coefficient) {
  std::string estimand = "Coefficient on '" + coefficient + "' in the least-squares projection of " +
                         join(c.outcomes, ", ") + " on the listed regressors";
  if (c.treatment && *c.treatment == coefficient) {
    estimand = "Effect of '" + coefficient + "' on " + join(c.outcomes, ", ") +
               ", as the regression-adjusted treatment contrast in the analysed sample";
  }
  std::string uncertainty;
  const bool ri = c.resample && c.resample->scheme == Scheme::RandomizationInference;
  const bool clustered = needs_clusters(c.vcov) ||
                         (c.resample && c.resample->scheme == Scheme::WildCluster);
  if (ri) {
    uncertainty = "Design-based: the units are held fixed and uncertainty comes only from the random "
                  "assignment of treatment (" +
                  std::string(to_string(c.resample->assignment)) +
                  " assignment); the test is of the sharp null of no effect for any unit";
  } else if (clustered && !c.clusters.empty()) {
    uncertainty = "Sampling-based: clusters defined by " + join(c.clusters, " and ") +
                  " are drawn independently from a large population; errors may be arbitrarily "
                  "correlated within a cluster";
  } else if (c.vcov == VcovKind::Conventional) {
    uncertainty = "Sampling-based: observations are drawn independently from a large population "
                  "with a common error variance";
  } else {
    uncertainty = "Sampling-based: observations are drawn independently from a large population; "
                  "error variances may differ across observations";
  }
  Json out;
  const bool user_estimand = c.assumptions && !c.assumptions->estimand.empty();
  const bool user_uncertainty = c.assumptions && !c.assumptions->uncertainty.empty();
  out["estimand"] = user_estimand ? c.assumptions->estimand : estimand;
  out["source_of_uncertainty"] = user_uncertainty ? c.assumptions->uncertainty : uncertainty;
  out["origin"] = user_estimand && user_uncertainty   ? "user"
                  : user_estimand || user_uncertainty ? "user+template"
                                                      : "template";
  return out;
}

Json coefficient_json(const CoefficientTest& t) {
  Json j;
  j["name"] = t.name;
  j["estimate"] = t.estimate;
  j["se"] = t.se;
  j["statistic"] = t.statistic;
  j["dof"] = finite_or_null(t.dof);
  j["p_value"] = t.p_value;
  j["ci_low"] = finite_or_null(t.ci_low);
  j["ci_high"] = finite_or_null(t.ci_high);
  j["rejected"] = t.rejected;
  return j;
}

// Replicate statistics of one outcome for resampling-based multiple testing.
struct Replicates {
  VectorXd draws;
  double observed = 0.0;
};

}  // namespace

std::vector<std::string> AnalysisConfig::family_outcomes() const {
  return family.empty() ? outcomes : family;
}

void AnalysisConfig::validate() const {
  if (outcomes.empty()) config_error("no outcome column configured");
  std::set<std::string> seen(outcomes.begin(), outcomes.end());
  if (seen.size() != outcomes.size()) config_error("outcome columns must be distinct");
  if (!(alpha > 0.0 && alpha < 1.0)) config_error("alpha must lie in (0, 1)");
  if (vcov == VcovKind::ClusterLZ && clusters.empty()) {
    config_error("cluster variance needs a cluster column", "set 'clusters'");
  }
  if (vcov == VcovKind::Multiway && clusters.size() != 2) {
    config_error("multiway variance needs exactly two cluster columns");
  }
  if (mht) {
    const auto fam = family_outcomes();
    if (fam.empty()) config_error("an MHT method needs a non-empty family");
    for (const auto& f : fam) {
      if (!seen.count(f)) config_error("family member '" + f + "' is not a configured outcome");
    }
    if ((*mht == MhtMethod::WestfallYoung || *mht == MhtMethod::RomanoWolf) && !resample) {
      config_error(std::string(to_string(*mht)) + " needs resampled statistics",
                   "configure a bootstrap or randomization scheme");
    }
  }
  if (resample) {
    const auto& r = *resample;
    if (!r.seed) {
      config_error("resampling runs require an explicit seed", "set 'resample.seed' or pass --seed");
    }
    if (r.replications < 1) config_error("replications must be at least 1");
    if (r.scheme == Scheme::Pairs && r.impose_null.value_or(false)) {
      config_error("the pairs bootstrap cannot impose a null", "use the residual or wild bootstrap");
    }
    if (r.scheme == Scheme::WildCluster && clusters.empty() && !r.cluster) {
      config_error("the wild cluster bootstrap needs a cluster column");
    }
    if (r.scheme == Scheme::RandomizationInference) {
      if (!treatment) config_error("randomization inference needs a treatment column");
      if (r.assignment == AssignmentScheme::Cluster && clusters.empty() && !r.cluster) {
        config_error("cluster assignment needs a cluster column");
      }
      if (!(r.bernoulli_p > 0.0 && r.bernoulli_p < 1.0)) config_error("bernoulli_p must lie in (0, 1)");
    }
    if (r.se_kind && (*r.se_kind == VcovKind::Multiway || *r.se_kind == VcovKind::MaxConventionalRobust ||
                      *r.se_kind == VcovKind::HC2_BM)) {
      config_error("per-replication standard errors support conventional, hc0-hc3 and cluster only");
    }
    if (r.cluster && std::find(clusters.begin(), clusters.end(), *r.cluster) == clusters.end()) {
      config_error("resample cluster '" + *r.cluster + "' is not listed in 'clusters'");
    }
  }
  if (collapse && (collapse->unit.empty() || collapse->period.empty())) {
    config_error("collapse needs unit and period columns");
  }
}

AnalysisConfig config_from_json(const Json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc,
             {"input", "outcome", "outcomes", "covariates", "clusters", "cluster", "treatment",
              "intercept", "coefficient", "vcov", "small_sample_adjustment", "alpha", "alternative",
              "mht", "resample", "collapse", "assumptions", "output"},
             "config");
  AnalysisConfig c;
  const auto input = read<std::string>(doc, "input", "");
  if (!input.empty()) c.input = resolve(base_dir, input);
  c.outcomes = string_list(doc, "outcomes");
  for (auto& o : string_list(doc, "outcome")) c.outcomes.push_back(o);
  c.covariates = string_list(doc, "covariates");
  c.clusters = string_list(doc, "clusters");
  for (auto& o : string_list(doc, "cluster")) c.clusters.push_back(o);
  if (doc.contains("treatment") && !doc["treatment"].is_null()) {
    c.treatment = read<std::string>(doc, "treatment", "");
  }
  c.intercept = read<bool>(doc, "intercept", true);
  if (doc.contains("coefficient") && !doc["coefficient"].is_null()) {
    c.coefficient = read<std::string>(doc, "coefficient", "");
  }
  c.vcov = parse_enum<VcovKind>(read<std::string>(doc, "vcov", "hc1"), parse_vcov_kind, "vcov kind");
  c.small_sample_adjustment = read<bool>(doc, "small_sample_adjustment", true);
  c.alpha = read<double>(doc, "alpha", 0.05);
  c.alternative = parse_alternative(read<std::string>(doc, "alternative", "two_sided"));

  if (doc.contains("mht") && !doc["mht"].is_null()) {
    const Json& m = doc["mht"];
    if (m.is_string()) {
      c.mht = parse_enum<MhtMethod>(m.get<std::string>(), parse_mht_method, "mht method");
    } else {
      check_keys(m, {"method", "family"}, "mht");
      c.mht = parse_enum<MhtMethod>(read<std::string>(m, "method", ""), parse_mht_method, "mht method");
      c.family = string_list(m, "family");
    }
  }
  if (doc.contains("resample") && !doc["resample"].is_null()) {
    const Json& r = doc["resample"];
    check_keys(r,
               {"scheme", "replications", "seed", "weights", "impose_null", "null_value", "assignment",
                "bernoulli_p", "exhaustive_threshold", "se", "t_centering", "cluster", "workers"},
               "resample");
    ResampleConfig rc;
    rc.scheme = parse_enum<Scheme>(read<std::string>(r, "scheme", "pairs"), parse_scheme, "resampling scheme");
    rc.replications = read<std::size_t>(r, "replications", kMinReplicationsPivotal);
    if (r.contains("seed") && !r["seed"].is_null()) {
      if (!r["seed"].is_number_integer() || r["seed"].get<long long>() < 0) {
        if (!r["seed"].is_number_unsigned()) config_error("seed must be a non-negative integer");
      }
      rc.seed = r["seed"].get<std::uint64_t>();
    }
    rc.weight_law = parse_enum<WeightLaw>(read<std::string>(r, "weights", "rademacher"), parse_weight_law,
                                          "weight law");
    if (r.contains("impose_null") && !r["impose_null"].is_null()) rc.impose_null = read<bool>(r, "impose_null", false);
    rc.null_value = read<double>(r, "null_value", 0.0);
    const auto assignment = read<std::string>(r, "assignment", "complete");
    if (auto a = parse_assignment(assignment)) {
      rc.assignment = *a;
    } else {
      throw Error(ErrorCode::UnknownAssignmentScheme, "unknown assignment scheme '" + assignment + "'",
                  "use complete, bernoulli or cluster");
    }
    rc.bernoulli_p = read<double>(r, "bernoulli_p", 0.5);
    rc.exhaustive_threshold = read<std::size_t>(r, "exhaustive_threshold", kDefaultExhaustiveThreshold);
    if (r.contains("se") && !r["se"].is_null()) {
      rc.se_kind = parse_enum<VcovKind>(read<std::string>(r, "se", ""), parse_vcov_kind, "vcov kind");
    }
    const auto centering = read<std::string>(r, "t_centering", "mean");
    if (centering == "mean") rc.t_centering = TCentering::BootstrapMean;
    else if (centering == "estimate") rc.t_centering = TCentering::PointEstimate;
    else config_error("unknown t_centering '" + centering + "'", "use mean or estimate");
    if (r.contains("cluster") && !r["cluster"].is_null()) rc.cluster = read<std::string>(r, "cluster", "");
    rc.workers = read<std::size_t>(r, "workers", 0);
    c.resample = rc;
  }
  if (doc.contains("collapse") && !doc["collapse"].is_null()) {
    const Json& k = doc["collapse"];
    check_keys(k, {"unit", "period", "cutoff"}, "collapse");
    c.collapse = CollapseConfig{read<std::string>(k, "unit", ""), read<std::string>(k, "period", ""),
                                read<double>(k, "cutoff", 0.0)};
  }
  if (doc.contains("assumptions") && !doc["assumptions"].is_null()) {
    const Json& a = doc["assumptions"];
    check_keys(a, {"estimand", "source_of_uncertainty"}, "assumptions");
    c.assumptions = Assumptions{read<std::string>(a, "estimand", ""),
                                read<std::string>(a, "source_of_uncertainty", "")};
  }
  if (doc.contains("output") && !doc["output"].is_null()) {
    const Json& o = doc["output"];
    check_keys(o, {"json", "csv", "timestamp"}, "output");
    const auto json_path = read<std::string>(o, "json", "");
    if (!json_path.empty()) c.out = resolve(base_dir, json_path);
    const auto csv_path = read<std::string>(o, "csv", "");
    if (!csv_path.empty()) c.csv_out = resolve(base_dir, csv_path);
    c.timestamp = read<bool>(o, "timestamp", false);
  }
  return c;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    config_error("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

Json config_to_json(const AnalysisConfig& c) {
  Json j;
  j["input"] = c.input.string();
  j["outcomes"] = c.outcomes;
  j["covariates"] = c.covariates;
  j["clusters"] = c.clusters;
  j["treatment"] = c.treatment ? Json(*c.treatment) : Json(nullptr);
  j["intercept"] = c.intercept;
  j["coefficient"] = c.coefficient ? Json(*c.coefficient) : Json(nullptr);
  j["vcov"] = std::string(to_string(c.vcov));
  j["small_sample_adjustment"] = c.small_sample_adjustment;
  j["alpha"] = c.alpha;
  j["alternative"] = std::string(to_string(c.alternative));
  if (c.mht) {
    j["mht"] = Json{{"method", std::string(to_string(*c.mht))}, {"family", c.family_outcomes()}};
  } else {
    j["mht"] = nullptr;
  }
  if (c.resample) {
    const auto& r = *c.resample;
    Json rj;
    rj["scheme"] = std::string(to_string(r.scheme));
    rj["replications"] = r.replications;
    rj["seed"] = r.seed ? Json(*r.seed) : Json(nullptr);
    rj["weights"] = std::string(to_string(r.weight_law));
    rj["impose_null"] = r.impose_null ? Json(*r.impose_null) : Json(nullptr);
    rj["null_value"] = r.null_value;
    rj["assignment"] = std::string(to_string(r.assignment));
    rj["bernoulli_p"] = r.bernoulli_p;
    rj["exhaustive_threshold"] = r.exhaustive_threshold;
    rj["se"] = r.se_kind ? Json(std::string(to_string(*r.se_kind))) : Json(nullptr);
    rj["t_centering"] = r.t_centering == TCentering::BootstrapMean ? "mean" : "estimate";
    rj["cluster"] = r.cluster ? Json(*r.cluster) : Json(nullptr);
    j["resample"] = rj;
  } else {
    j["resample"] = nullptr;
  }
  if (c.collapse) {
    j["collapse"] = Json{{"unit", c.collapse->unit}, {"period", c.collapse->period}, {"cutoff", c.collapse->cutoff}};
  } else {
    j["collapse"] = nullptr;
  }
  return j;
}

Json run_analysis(const AnalysisConfig& config) {
  config.validate();
  if (config.input.empty()) config_error("no input file configured");
  return run_analysis(config, read_csv(config.input));
}

Json run_analysis(const AnalysisConfig& config, const CsvTable& input) {
  config.validate();
  std::vector<std::string> warnings;
  Json report;
  report["tool"] = Json{{"name", "robinf"}, {"version", kVersion}};
  if (config.timestamp) report["generated_at"] = utc_now();
  report["config"] = config_to_json(config);

  CsvTable table = input;
  Json data_block;
  data_block["input"] = config.input.string();
  data_block["rows_read"] = table.rows.size();
  if (config.collapse) {
    auto collapsed = collapse_periods(table, config.collapse->unit, config.collapse->period,
                                      config.collapse->cutoff);
    data_block["collapse"] = Json{{"unit", config.collapse->unit},
                                  {"period", config.collapse->period},
                                  {"cutoff", config.collapse->cutoff},
                                  {"rows", collapsed.table.rows.size()},
                                  {"dropped_units", collapsed.dropped_units}};
    for (auto& n : collapsed.notes) warnings.push_back("collapse: " + n);
    table = std::move(collapsed.table);
  }

  const bool joint = config.mht && (*config.mht == MhtMethod::WestfallYoung ||
                                    *config.mht == MhtMethod::RomanoWolf);
  const auto family = config.family_outcomes();
  if (joint) {
    // Joint resampling needs one common sample across the family.
    std::vector<std::size_t> cols;
    for (const auto& f : family) cols.push_back(table.require(f));
    CsvTable common;
    common.columns = table.columns;
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      bool missing = false;
      for (auto c : cols) missing = missing || is_missing(table.rows[r][c]);
      if (missing) {
        ++dropped;
        continue;
      }
      common.rows.push_back(table.rows[r]);
      common.lines.push_back(table.lines[r]);
    }
    data_block["joint_family_dropped_rows"] = dropped;
    if (dropped) {
      warnings.push_back(std::to_string(dropped) +
                         " row(s) dropped so every family outcome shares one sample");
    }
    table = std::move(common);
  }

  Json analyses = Json::array();
  std::vector<std::pair<std::string, CoefficientTest>> targets;
  std::vector<Replicates> replicates;
  Json label_mappings = Json::object();
  std::string target_name;

  for (const auto& outcome : config.outcomes) {
    ColumnRoles roles{outcome, config.covariates, config.clusters, config.treatment, config.intercept};
    IngestResult ing = to_dataset(table, roles);
    for (const auto& [name, mapping] : ing.label_mappings) label_mappings[name] = mapping;
    const Dataset& data = ing.data;
    const FitResult fit = fit_ols(data);
    const auto& names = fit.names();

    if (config.coefficient) {
      target_name = *config.coefficient;
    } else if (config.treatment) {
      target_name = *config.treatment;
    } else {
      target_name = names.front();
      for (const auto& nm : names) {
        if (nm != kInterceptName) {
          target_name = nm;
          break;
        }
      }
    }
    const auto it = std::find(names.begin(), names.end(), target_name);
    if (it == names.end()) config_error("coefficient '" + target_name + "' is not a regressor");
    const auto target = static_cast<std::size_t>(it - names.begin());

    auto line_of = [&](std::size_t row) { return table.lines[ing.source_rows[row]]; };

    std::vector<ClusterMap> maps;
    for (const auto& cl : config.clusters) maps.emplace_back(cl, data.cluster_labels.at(cl));
    VcovRequest request{config.vcov, maps, ClusterOptions{config.small_sample_adjustment}};

    VcovEstimate vcov;
    try {
      vcov = compute_vcov(fit, request);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LeverageInfeasible) throw;
      std::vector<std::string> lines;
      for (auto r : e.indices()) lines.push_back(std::to_string(line_of(r)));
      throw Error(e.code(),
                  std::string(e.what()) + " [outcome '" + outcome + "', input line(s) " + join(lines, ", ") + "]",
                  e.hint(), e.indices());
    }
    const TestReport tests = t_tests(fit, vcov, config.alpha, config.alternative);
    const LeverageReport lev = leverage(fit);

    Json a;
    a["outcome"] = outcome;
    a["n"] = fit.n();
    a["k"] = fit.k();
    a["dropped_rows"] = ing.dropped_rows;
    if (ing.dropped_rows) {
      warnings.push_back("outcome '" + outcome + "': " + std::to_string(ing.dropped_rows) +
                         " row(s) with missing values dropped");
    }
    Json vj;
    vj["kind"] = std::string(to_string(vcov.kind));
    vj["reference_distribution"] = tests.reference_distribution;
    if (needs_clusters(vcov.kind)) vj["small_sample_adjustment"] = config.small_sample_adjustment;
    vj["eigen_repaired"] = vcov.eigen_repaired;
    vj["notes"] = vcov.notes;
    a["vcov"] = vj;
    for (const auto& n : vcov.notes) warnings.push_back("outcome '" + outcome + "': " + n);
    for (const auto& n : tests.notes) {
      if (std::find(vcov.notes.begin(), vcov.notes.end(), n) == vcov.notes.end()) {
        warnings.push_back("outcome '" + outcome + "': " + n);
      }
    }
    Json coefs = Json::array();
    for (const auto& t : tests.coefficients) coefs.push_back(coefficient_json(t));
    a["coefficients"] = coefs;
    targets.emplace_back(outcome, tests.coefficients[target]);

    Json diag;
    diag["max_leverage"] = lev.max();
    Json infeasible = Json::array();
    for (auto r : lev.infeasible) infeasible.push_back(Json{{"row", r}, {"line", line_of(r)}});
    diag["infeasible_rows"] = infeasible;
    Json counts = Json::array();
    Json effective = Json::array();
    for (const auto& m : maps) {
      counts.push_back(Json{{"dimension", m.name()}, {"clusters", m.n_clusters()}});
      if (m.n_clusters() >= 2) {
        effective.push_back(Json{{"dimension", m.name()},
                                 {"coefficient", target_name},
                                 {"effective_clusters", finite_or_null(effective_clusters(fit, m, target))}});
      }
      if (needs_clusters(config.vcov) && m.n_clusters() < kFewClusters) {
        warnings.push_back("outcome '" + outcome + "': only " + std::to_string(m.n_clusters()) +
                           " clusters in '" + m.name() +
                           "'; cluster-robust tests may over-reject, consider the wild cluster bootstrap");
      }
    }
    diag["cluster_counts"] = counts;
    diag["effective_clusters"] = effective;
    if (!lev.infeasible.empty()) {
      warnings.push_back("outcome '" + outcome + "': " + std::to_string(lev.infeasible.size()) +
                         " observation(s) with leverage one; HC2, HC3 and BM are unavailable");
    }
    a["diagnostics"] = diag;

    if (config.resample) {
      const auto& rc = *config.resample;
      ResamplePlan plan;
      plan.scheme = rc.scheme;
      plan.replications = rc.replications;
      plan.seed = *rc.seed;
      plan.wild_weight_law = rc.weight_law;
      plan.exhaustive_threshold = rc.exhaustive_threshold;
      plan.assignment = rc.assignment;
      plan.bernoulli_p = rc.bernoulli_p;
      plan.t_centering = rc.t_centering;
      plan.workers = rc.workers;
      plan.se_kind = rc.se_kind ? rc.se_kind : replication_kind_for(config.vcov);
      const bool cluster_needed =
          rc.scheme == Scheme::WildCluster ||
          (rc.scheme == Scheme::RandomizationInference && rc.assignment == AssignmentScheme::Cluster) ||
          (rc.scheme == Scheme::Pairs && needs_clusters(config.vcov)) || rc.cluster.has_value() ||
          (plan.se_kind && needs_clusters(*plan.se_kind));
      std::optional<std::string> cluster_name = rc.cluster;
      if (!cluster_name && cluster_needed && !config.clusters.empty()) cluster_name = config.clusters.front();
      if (cluster_name) plan.cluster_map = ClusterMap(*cluster_name, data.cluster_labels.at(*cluster_name));
      if (plan.se_kind && needs_clusters(*plan.se_kind) && !plan.cluster_map) {
        config_error("cluster standard errors in resampling need a cluster column");
      }
      const bool impose = rc.impose_null.value_or(rc.scheme == Scheme::Residual ||
                                                  rc.scheme == Scheme::Wild ||
                                                  rc.scheme == Scheme::WildCluster);
      if (impose && is_bootstrap(rc.scheme)) plan.null_imposition = NullRestriction{target, rc.null_value};

      Json rj;
      rj["scheme"] = std::string(to_string(rc.scheme));
      rj["seed"] = plan.seed;
      if (plan.cluster_map) rj["cluster"] = plan.cluster_map->name();

      if (is_bootstrap(rc.scheme)) {
        for (auto& w : plan.warnings(true)) warnings.push_back("outcome '" + outcome + "': " + w);
        const ResampleDistribution dist = bootstrap(data, ModelSpec{}, plan);
        for (auto& w : dist.warnings) {
          if (std::find(warnings.begin(), warnings.end(), "outcome '" + outcome + "': " + w) == warnings.end()) {
            warnings.push_back("outcome '" + outcome + "': " + w);
          }
        }
        VcovRequest rep_request{replication_se_kind(plan), {}, {}};
        if (needs_clusters(rep_request.kind)) rep_request.clusters.push_back(*plan.cluster_map);
        rj["replications"] = dist.replications();
        rj["redraws"] = dist.redraws;
        if (rc.scheme == Scheme::Wild || rc.scheme == Scheme::WildCluster) {
          rj["weights"] = std::string(to_string(rc.weight_law));
        }
        rj["se_kind"] = std::string(to_string(rep_request.kind));
        rj["t_centering"] = rc.t_centering == TCentering::BootstrapMean ? "mean" : "estimate";
        rj["null_imposed"] = plan.null_imposition
                                 ? Json{{"coefficient", target_name}, {"value", rc.null_value}}
                                 : Json(nullptr);
        Json bc = Json::array();
        for (std::size_t j = 0; j < fit.k(); ++j) {
          Json e;
          e["name"] = names[j];
          e["bootstrap_se"] = bootstrap_se(dist, j);
          if (!plan.null_imposition) {
            const auto pci = percentile_ci(dist, j, config.alpha);
            e["percentile_ci"] = Json{{"low", pci.interval.low},
                                      {"high", pci.interval.high},
                                      {"lower_index", pci.bounds.lower_index},
                                      {"upper_index", pci.bounds.upper_index}};
          }
          bc.push_back(e);
        }
        rj["coefficients"] = bc;
        const double null_value = plan.null_imposition ? rc.null_value : 0.0;
        if (dist.replications() >= 1000) {
          const auto bt = bootstrap_t(dist, fit, rep_request, target, config.alpha, null_value);
          Json tj{{"coefficient", target_name},
                  {"null_value", null_value},
                  {"observed_statistic", bt.observed_statistic},
                  {"critical_value", bt.critical_value},
                  {"critical_index", bt.critical_index},
                  {"p_value", bt.p_value}};
          if (!plan.null_imposition) tj["ci"] = Json{{"low", bt.ci.low}, {"high", bt.ci.high}};
          rj["bootstrap_t"] = tj;
        } else {
          warnings.push_back("outcome '" + outcome +
                             "': bootstrap-t skipped, it needs at least 1,000 replications");
        }
        if (joint) {
          if (!dist.t_statistics) {
            throw Error(ErrorCode::MissingPerReplicationSE, "replicate t statistics are unavailable");
          }
          const double se = compute_vcov(fit, rep_request).se()(static_cast<Eigen::Index>(target));
          const double diff = fit.beta(static_cast<Eigen::Index>(target)) - null_value;
          replicates.push_back(Replicates{dist.t_statistics->col(static_cast<Eigen::Index>(target)),
                                          diff == 0.0 ? 0.0 : diff / se});
        }
      } else {
        const RandomizationResult ri = randomization_inference(data, ModelSpec{}, plan);
        for (auto& n : ri.notes) warnings.push_back("outcome '" + outcome + "': " + n);
        rj["assignment"] = std::string(to_string(rc.assignment));
        rj["exhaustive"] = ri.exhaustive;
        rj["replications"] = ri.exhaustive ? ri.assignments : plan.replications;
        rj["assignments"] = ri.assignments;
        rj["excluded_assignments"] = ri.excluded_assignments;
        rj["redraws"] = ri.redraws;
        rj["coefficient"] = *config.treatment;
        rj["observed"] = ri.observed;
        rj["observed_statistic"] = ri.observed_statistic ? Json(*ri.observed_statistic) : Json(nullptr);
        rj["ri_p_value"] = ri.ri_p_value;
        const VectorXd weights =
            ri.weights.size() ? ri.weights
                              : VectorXd::Constant(ri.null_distribution.size(),
                                                   1.0 / static_cast<double>(ri.null_distribution.size()));
        rj["null_distribution"] = Json{{"histogram", histogram(ri.null_distribution, weights, 40)}};
        if (joint) {
          if (*config.treatment != target_name) {
            config_error("randomization-based multiple testing targets the treatment coefficient");
          }
          if (weights.size() && (weights.maxCoeff() - weights.minCoeff()) > 1e-15) {
            config_error("resampling-based multiple testing needs equally likely assignments",
                         "use complete assignment or Monte Carlo Bernoulli draws");
          }
          if (!ri.observed_statistic) {
            throw Error(ErrorCode::MissingPerReplicationSE, "randomization t statistics are unavailable");
          }
          replicates.push_back(Replicates{ri.null_statistics, *ri.observed_statistic});
        }
      }
      a["resampling"] = rj;
    }
    analyses.push_back(a);
  }

  report["data"] = data_block;
  report["data"]["label_mappings"] = label_mappings;
  report["assumptions"] = assumptions_block(config, target_name);
  report["analyses"] = analyses;

  if (config.mht) {
    PValueFamily fam;
    fam.alpha = config.alpha;
    Eigen::MatrixXd reps;
    std::vector<std::size_t> index;
    for (const auto& f : family) {
      index.push_back(static_cast<std::size_t>(
          std::find(config.outcomes.begin(), config.outcomes.end(), f) - config.outcomes.begin()));
    }
    if (joint) {
      const auto r = replicates.front().draws.size();
      reps.resize(r, static_cast<Eigen::Index>(family.size()));
      for (std::size_t l = 0; l < family.size(); ++l) {
        const auto& rep = replicates[index[l]];
        if (rep.draws.size() != r) {
          throw Error(ErrorCode::ShapeMismatch, "replicate counts differ across family outcomes");
        }
        reps.col(static_cast<Eigen::Index>(l)) = rep.draws;
        // Resampling p-value of each hypothesis on its own.
        const double obs = std::abs(rep.observed);
        const auto count = (rep.draws.array().abs() >= obs).count();
        fam.hypotheses.push_back(
            Hypothesis{family[l], static_cast<double>(count) / static_cast<double>(r), rep.observed});
      }
    } else {
      for (std::size_t l = 0; l < family.size(); ++l) {
        const auto& t = targets[index[l]].second;
        fam.hypotheses.push_back(Hypothesis{family[l], t.p_value, t.statistic});
      }
    }
    MHTReport mr;
    switch (*config.mht) {
      case MhtMethod::WestfallYoung: mr = westfall_young(fam, reps); break;
      case MhtMethod::RomanoWolf: mr = romano_wolf(fam, reps); break;
      default: mr = adjust(fam, *config.mht);
    }
    Json mj;
    mj["method"] = std::string(to_string(mr.method));
    mj["error_rate"] = mr.error_rate == ErrorRate::FWER ? "FWER" : "FDR";
    mj["alpha"] = mr.alpha;
    mj["coefficient"] = target_name;
    mj["family"] = family;
    mj["raw_p_source"] = joint ? "resampling" : "analytic";
    Json results = Json::array();
    for (const auto& res : mr.results) {
      Json e;
      e["outcome"] = res.id;
      e["raw_p"] = res.raw_p;
      e[mr.error_rate == ErrorRate::FWER ? "adjusted_p" : "q_value"] = res.adjusted_p;
      e["rejected"] = res.rejected;
      results.push_back(e);
    }
    mj["results"] = results;
    report["mht"] = mj;
  } else {
    report["mht"] = nullptr;
  }
  report["warnings"] = warnings;
  return report;
}

std::string coefficient_csv(const Json& report) {
  CsvTable t;
  t.columns = {"outcome", "term", "estimate", "se", "statistic", "dof", "p_value", "ci_low", "ci_high",
               "rejected", "vcov"};
  auto num = [](const Json& v) {
    if (v.is_null()) return std::string();
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  };
  for (const auto& a : report.at("analyses")) {
    for (const auto& c : a.at("coefficients")) {
      t.rows.push_back({a.at("outcome").get<std::string>(), c.at("name").get<std::string>(),
                        num(c.at("estimate")), num(c.at("se")), num(c.at("statistic")), num(c.at("dof")),
                        num(c.at("p_value")), num(c.at("ci_low")), num(c.at("ci_high")),
                        c.at("rejected").get<bool>() ? "true" : "false",
                        a.at("vcov").at("kind").get<std::string>()});
    }
  }
  return to_csv(t);
}

Json error_to_json(const Error& error) {
  Json j;
  j["code"] = std::string(to_string(error.code()));
  switch (category(error.code())) {
    case ErrorCategory::Config: j["category"] = "config"; break;
    case ErrorCategory::Data: j["category"] = "data"; break;
    case ErrorCategory::Numeric: j["category"] = "numeric"; break;
  }
  j["message"] = error.what();
  j["hint"] = error.hint();
  j["indices"] = error.indices();
  j["exit_code"] = exit_code(error.code());
  return Json{{"error", j}};
}

}  // namespace robinf
