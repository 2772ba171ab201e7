#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace robinf {

struct Hypothesis {
  std::string id;
  double raw_p = 1.0;
  std::optional<double> statistic;
};

struct PValueFamily {
  std::vector<Hypothesis> hypotheses;
  double alpha = 0.05;

  std::size_t m() const { return hypotheses.size(); }
  // raw_p in [0, 1], m >= 1, unique ids, 0 < alpha < 1.
  void validate() const;
};

enum class MhtMethod { Bonferroni, Holm, WestfallYoung, RomanoWolf, BenjaminiHochberg, BKY };
enum class ErrorRate { FWER, FDR };

std::string_view to_string(MhtMethod method);
std::optional<MhtMethod> parse_mht_method(std::string_view text);

struct MhtResult {
  std::string id;
  double raw_p = 1.0;
  // Adjusted p-value (FWER methods) or q-value (FDR methods).
  double adjusted_p = 1.0;
  bool rejected = false;
};

struct MHTReport {
  // Same order as the input family.
  std::vector<MhtResult> results;
  MhtMethod method = MhtMethod::Bonferroni;
  ErrorRate error_rate = ErrorRate::FWER;
  double alpha = 0.05;
};

MHTReport bonferroni(const PValueFamily& family);
MHTReport holm(const PValueFamily& family);
MHTReport benjamini_hochberg(const PValueFamily& family);

// Two-stage sharpened q-values on a grid of this resolution.
inline constexpr double kSharpenedGridStep = 1e-4;
MHTReport bky_sharpened(const PValueFamily& family);

// Max-T step-down. `replicates` is r x m: replicate statistics generated
// under the joint null (WY) or centred at the original estimates (RW), with
// column l matching family.hypotheses[l].
MHTReport westfall_young(const PValueFamily& family, const Eigen::MatrixXd& replicates);
MHTReport romano_wolf(const PValueFamily& family, const Eigen::MatrixXd& replicates);

// Dispatch for the p-value-only methods; throws MissingStatistics for WY/RW.
MHTReport adjust(const PValueFamily& family, MhtMethod method);

}  // namespace robinf
