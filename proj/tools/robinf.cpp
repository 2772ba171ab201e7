#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "robinf/analysis.hpp"

namespace {

// ROBINF_VERBOSITY: quiet | info (default) | debug. Only affects stderr.
int verbosity() {
  const char* v = std::getenv("ROBINF_VERBOSITY");
  if (!v) return 1;
  const std::string s(v);
  if (s == "quiet" || s == "0") return 0;
  if (s == "debug" || s == "2") return 2;
  return 1;
}

void log(int level, const std::string& message) {
  if (verbosity() >= level) std::cerr << "robinf: " << message << '\n';
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw robinf::Error(robinf::ErrorCode::ConfigError, "cannot write '" + path.string() + "'");
  }
  out << text;
}

template <class T, class Parse>
T parse_flag(const std::string& text, Parse parse, const char* what) {
  if (auto v = parse(text)) return *v;
  throw robinf::Error(robinf::ErrorCode::ConfigError, std::string("unknown ") + what + " '" + text + "'");
}

struct AnalyzeFlags {
  std::string config;
  std::optional<std::string> vcov;
  std::optional<std::string> mht;
  std::optional<std::string> boot;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> out;
  std::optional<std::string> csv;
  std::optional<std::size_t> workers;
  bool timestamp = false;
};

int analyze(const AnalyzeFlags& f) {
  robinf::AnalysisConfig config = robinf::load_config(f.config);
  // Flags override the config file.
  if (f.vcov) config.vcov = parse_flag<robinf::VcovKind>(*f.vcov, robinf::parse_vcov_kind, "vcov kind");
  if (f.mht) config.mht = parse_flag<robinf::MhtMethod>(*f.mht, robinf::parse_mht_method, "mht method");
  if (f.boot) {
    if (!config.resample) config.resample = robinf::ResampleConfig{};
    config.resample->scheme = parse_flag<robinf::Scheme>(*f.boot, robinf::parse_scheme, "resampling scheme");
  }
  if (f.reps || f.seed || f.workers) {
    if (!config.resample) {
      throw robinf::Error(robinf::ErrorCode::ConfigError, "--reps/--seed/--workers given without a resampling scheme",
                          "pass --boot or add a 'resample' block");
    }
    if (f.reps) config.resample->replications = *f.reps;
    if (f.seed) config.resample->seed = *f.seed;
    if (f.workers) config.resample->workers = *f.workers;
  }
  if (f.alpha) config.alpha = *f.alpha;
  if (f.out) config.out = *f.out;
  if (f.csv) config.csv_out = *f.csv;
  if (f.timestamp) config.timestamp = true;

  log(2, "running analysis on '" + config.input.string() + "'");
  const robinf::Json report = robinf::run_analysis(config);
  const std::string text = report.dump(2) + "\n";
  if (config.out) {
    write_file(*config.out, text);
    log(1, "report written to '" + config.out->string() + "'");
  } else {
    std::cout << text;
  }
  if (config.csv_out) write_file(*config.csv_out, robinf::coefficient_csv(report));
  for (const auto& w : report["warnings"]) log(1, "warning: " + w.get<std::string>());
  return 0;
}

int collapse(const std::string& input, const std::string& unit, const std::string& period, double cutoff,
             const std::optional<std::string>& out) {
  const auto result = robinf::collapse_periods(robinf::read_csv(input), unit, period, cutoff);
  const std::string text = robinf::to_csv(result.table);
  if (out) write_file(*out, text);
  else std::cout << text;
  for (const auto& n : result.notes) log(1, n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robinf: robust inference for linear regressions"};
  app.require_subcommand(1);

  AnalyzeFlags flags;
  auto* an = app.add_subcommand("analyze", "Fit, test, adjust and resample as configured");
  an->add_option("--config", flags.config, "JSON analysis config")->required();
  an->add_option("--vcov", flags.vcov, "conventional|hc0|hc1|hc2|hc3|bm|cluster|multiway|maxse");
  an->add_option("--mht", flags.mht, "bonferroni|holm|wy|rw|bh|bky");
  an->add_option("--boot", flags.boot, "pairs|residual|wild|wild_cluster|ri");
  an->add_option("--reps", flags.reps, "Replications");
  an->add_option("--seed", flags.seed, "Resampling seed");
  an->add_option("--workers", flags.workers, "Worker threads (output does not depend on it)");
  an->add_option("--alpha", flags.alpha, "Significance level");
  an->add_option("--out", flags.out, "JSON report path (default stdout)");
  an->add_option("--csv", flags.csv, "Flat coefficient table path");
  an->add_flag("--timestamp", flags.timestamp, "Stamp the report with the UTC time");

  std::string input, unit, period;
  double cutoff = 0.0;
  std::optional<std::string> collapse_out;
  auto* cp = app.add_subcommand("collapse-periods", "Average a panel into pre/post rows per unit");
  cp->add_option("--input", input, "CSV panel")->required();
  cp->add_option("--unit", unit, "Unit column")->required();
  cp->add_option("--period", period, "Period column")->required();
  cp->add_option("--cutoff", cutoff, "Last pre-period value")->required();
  cp->add_option("--out", collapse_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (an->parsed()) return analyze(flags);
    return collapse(input, unit, period, cutoff, collapse_out);
  } catch (const robinf::Error& e) {
    std::cerr << robinf::error_to_json(e).dump(2) << '\n';
    return robinf::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << robinf::Json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump(2) << '\n';
    return 1;
  }
}
