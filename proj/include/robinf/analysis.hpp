#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robinf/error.hpp"
#include "robinf/inference.hpp"
#include "robinf/io.hpp"
#include "robinf/mht.hpp"
#include "robinf/resample.hpp"
#include "robinf/vcov.hpp"

namespace robinf {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
// Rule-of-thumb cluster count below which cluster-robust tests get a warning.
inline constexpr std::size_t kFewClusters = 42;

struct ResampleConfig {
  Scheme scheme = Scheme::Pairs;
  std::size_t replications = kMinReplicationsPivotal;
  // Mandatory: there is no wall-clock seeding.
  std::optional<std::uint64_t> seed;
  WeightLaw weight_law = WeightLaw::Rademacher;
  // Impose H0: β_target = null_value on the DGP. Defaults to on for the
  // residual and wild schemes, unavailable for pairs.
  std::optional<bool> impose_null;
  double null_value = 0.0;
  AssignmentScheme assignment = AssignmentScheme::Complete;
  double bernoulli_p = 0.5;
  std::size_t exhaustive_threshold = kDefaultExhaustiveThreshold;
  std::optional<VcovKind> se_kind;
  TCentering t_centering = TCentering::BootstrapMean;
  // Cluster column driving cluster resampling; defaults to the first one.
  std::optional<std::string> cluster;
  std::size_t workers = 0;
};

struct CollapseConfig {
  std::string unit;
  std::string period;
  double cutoff = 0.0;
};

struct Assumptions {
  std::string estimand;
  std::string uncertainty;
};

struct AnalysisConfig {
  std::filesystem::path input;
  std::vector<std::string> outcomes;
  std::vector<std::string> covariates;
  std::vector<std::string> clusters;
  std::optional<std::string> treatment;
  bool intercept = true;
  // Coefficient targeted by resampling, MHT and the assumption statement;
  // defaults to the treatment, else the first non-intercept column.
  std::optional<std::string> coefficient;
  VcovKind vcov = VcovKind::HC1;
  bool small_sample_adjustment = true;
  double alpha = 0.05;
  Alternative alternative = Alternative::TwoSided;
  std::optional<MhtMethod> mht;
  // Outcomes forming one family; empty means all outcomes.
  std::vector<std::string> family;
  std::optional<ResampleConfig> resample;
  std::optional<CollapseConfig> collapse;
  std::optional<Assumptions> assumptions;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> csv_out;
  bool timestamp = false;

  // Throws ConfigError on any inconsistency detectable without the data.
  void validate() const;
  std::vector<std::string> family_outcomes() const;
};

// Relative input/output paths resolve against `base_dir`.
AnalysisConfig config_from_json(const Json& doc, const std::filesystem::path& base_dir = {});
AnalysisConfig load_config(const std::filesystem::path& path);
Json config_to_json(const AnalysisConfig& config);

Json run_analysis(const AnalysisConfig& config);
// Same, on an already-parsed table (config.input is only echoed).
Json run_analysis(const AnalysisConfig& config, const CsvTable& table);

// Flat coefficient table: one row per (outcome, coefficient).
std::string coefficient_csv(const Json& report);

Json error_to_json(const Error& error);

}  // namespace robinf
