#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "oracles.hpp"
#include "robinf/analysis.hpp"

namespace fs = std::filesystem;
using robinf::Json;

namespace {

std::string number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Two-sample table: 3 noisy controls, 27 tight treated rows, three outcomes
// with different effect sizes, two covariates and a 6-level cluster column.
std::string sample_csv(std::uint64_t seed) {
  oracle::Sim sim(seed);
  std::string text = "y1,y2,y3,d,z,g\n";
  for (int i = 0; i < 30; ++i) {
    const double d = i < 3 ? 0.0 : 1.0;
    const double sd = i < 3 ? 2.0 : 0.5;
    text += number(sim.normal(0.9 * d, sd)) + "," + number(sim.normal(0.4 * d, sd)) + "," +
            number(sim.normal(0.0, sd)) + "," + number(d) + "," + number(sim.normal()) + ",s" +
            std::to_string(i % 6) + "\n";
  }
  return text;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("robinf_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
            std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name, std::ios::binary) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string("\"") + ROBINF_CLI + "\" " + args + " 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const Json& coef(const Json& analysis, const std::string& name) {
  for (const auto& c : analysis.at("coefficients")) {
    if (c.at("name") == name) return c;
  }
  throw std::runtime_error("no coefficient " + name);
}

}  // namespace

TEST_CASE("BM on a Behrens-Fisher layout reproduces Welch") {
  const auto table = robinf::parse_csv(sample_csv(1));
  robinf::AnalysisConfig c;
  c.outcomes = {"y1"};
  c.treatment = "d";
  c.vcov = robinf::VcovKind::HC2_BM;
  const Json report = robinf::run_analysis(c, table);
  const Json& d = coef(report["analyses"][0], "d");
  std::vector<double> g0, g1;
  for (const auto& row : table.rows) (row[3] == "0" ? g0 : g1).push_back(std::stod(row[0]));
  const auto w = oracle::welch(g0, g1);
  CHECK(d["estimate"].get<double>() == doctest::Approx(w.difference).epsilon(1e-12));
  CHECK(d["se"].get<double>() == doctest::Approx(w.se).epsilon(1e-10));
  CHECK(d["dof"].get<double>() == doctest::Approx(w.dof).epsilon(1e-8));
  boost::math::students_t dist(w.dof);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(w.t)));
  CHECK(d["p_value"].get<double>() == doctest::Approx(p).epsilon(1e-8));
  CHECK(report["analyses"][0]["vcov"]["kind"] == "hc2_bm");
  CHECK(report["mht"].is_null());
  CHECK(report["assumptions"]["origin"] == "template");
}

TEST_CASE("Holm across outcomes matches a hand step-down") {
  robinf::AnalysisConfig c;
  c.outcomes = {"y1", "y2", "y3"};
  c.treatment = "d";
  c.covariates = {"z"};
  c.mht = robinf::MhtMethod::Holm;
  const Json report = robinf::run_analysis(c, robinf::parse_csv(sample_csv(2)));
  std::vector<std::pair<double, std::string>> raw;
  for (const auto& a : report["analyses"]) {
    raw.emplace_back(coef(a, "d")["p_value"].get<double>(), a["outcome"].get<std::string>());
  }
  std::sort(raw.begin(), raw.end());
  std::map<std::string, double> expected;
  double running = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    running = std::max(running, std::min(1.0, static_cast<double>(3 - i) * raw[i].first));
    expected[raw[i].second] = running;
  }
  const Json& mht = report["mht"];
  CHECK(mht["method"] == "holm");
  CHECK(mht["error_rate"] == "FWER");
  CHECK(mht["raw_p_source"] == "analytic");
  REQUIRE(mht["results"].size() == 3);
  for (const auto& r : mht["results"]) {
    const auto id = r["outcome"].get<std::string>();
    CHECK(r["adjusted_p"].get<double>() == doctest::Approx(expected[id]).epsilon(1e-14));
    CHECK(r["rejected"].get<bool>() == (expected[id] <= 0.05));
  }
}

TEST_CASE("bootstrap section and replication warnings") {
  robinf::AnalysisConfig c;
  c.outcomes = {"y1"};
  c.treatment = "d";
  c.resample = robinf::ResampleConfig{};
  c.resample->replications = 500;
  c.resample->seed = 17;
  c.resample->workers = 1;
  const Json report = robinf::run_analysis(c, robinf::parse_csv(sample_csv(3)));
  const Json& rs = report["analyses"][0]["resampling"];
  CHECK(rs["scheme"] == "pairs");
  CHECK(rs["replications"] == 500);
  CHECK(rs["null_imposed"].is_null());
  CHECK(rs["coefficients"][1].contains("percentile_ci"));
  CHECK_FALSE(rs.contains("bootstrap_t"));
  std::size_t replication_warnings = 0;
  for (const auto& w : report["warnings"]) {
    const auto s = w.get<std::string>();
    replication_warnings += s.find("5,000") != std::string::npos || s.find("10,000") != std::string::npos;
  }
  CHECK(replication_warnings == 2);

  c.resample->scheme = robinf::Scheme::Wild;
  c.resample->replications = 1000;
  const Json wild = robinf::run_analysis(c, robinf::parse_csv(sample_csv(3)));
  const Json& ws = wild["analyses"][0]["resampling"];
  CHECK(ws["null_imposed"]["coefficient"] == "d");
  CHECK_FALSE(ws["coefficients"][1].contains("percentile_ci"));
  CHECK(ws["bootstrap_t"].contains("p_value"));
  CHECK_FALSE(ws["bootstrap_t"].contains("ci"));
}

TEST_CASE("reports are deterministic and survive a JSON round trip") {
  robinf::AnalysisConfig c;
  c.outcomes = {"y1", "y2"};
  c.treatment = "d";
  c.clusters = {"g"};
  c.vcov = robinf::VcovKind::ClusterLZ;
  c.mht = robinf::MhtMethod::RomanoWolf;
  c.resample = robinf::ResampleConfig{};
  c.resample->scheme = robinf::Scheme::WildCluster;
  c.resample->replications = 999;
  c.resample->seed = 4;
  const auto table = robinf::parse_csv(sample_csv(4));
  c.resample->workers = 1;
  const Json a = robinf::run_analysis(c, table);
  c.resample->workers = 3;
  const Json b = robinf::run_analysis(c, table);
  CHECK(a.dump() == b.dump());
  CHECK(Json::parse(a.dump(2)) == a);
  CHECK(a["mht"]["raw_p_source"] == "resampling");
  bool few = false;
  for (const auto& w : a["warnings"]) few = few || w.get<std::string>().find("only 6 clusters") != std::string::npos;
  CHECK(few);

  const Json cfg = robinf::config_to_json(c);
  const auto again = robinf::config_from_json(cfg);
  CHECK(robinf::config_to_json(again) == cfg);

  const auto csv = robinf::parse_csv(robinf::coefficient_csv(a));
  CHECK(csv.rows.size() == 4);
  CHECK(csv.columns.front() == "outcome");
}

TEST_CASE("configuration validation") {
  auto code = [](const Json& doc) {
    try {
      robinf::config_from_json(doc).validate();
    } catch (const robinf::Error& e) {
      return robinf::exit_code(e.code());
    }
    return 0;
  };
  CHECK(code(Json{{"input", "x.csv"}, {"outcome", "y"}}) == 0);
  CHECK(code(Json{{"input", "x.csv"}, {"outcome", "y"}, {"bogus", 1}}) == 2);
  CHECK(code(Json{{"input", "x.csv"}, {"outcome", "y"}, {"vcov", "cluster"}}) == 2);
  CHECK(code(Json{{"input", "x.csv"}, {"outcome", "y"}, {"resample", {{"scheme", "pairs"}}}}) == 2);
  CHECK(code(Json{{"input", "x.csv"}, {"outcome", "y"}, {"mht", "rw"}}) == 2);
  CHECK(code(Json{{"input", "x.csv"}, {"outcome", "y"}, {"alpha", 1.5}}) == 2);
  CHECK(code(Json{{"input", "x.csv"},
                  {"outcome", "y"},
                  {"resample", {{"scheme", "ri"}, {"seed", 1}, {"assignment", "stratified"}}}}) == 2);
}

TEST_CASE("command line front end") {
  TempDir dir;
  const fs::path err = dir.path / "stderr.txt";

  SUBCASE("analysis writes JSON and CSV, repeated runs are byte-identical") {
    dir.write("data.csv", sample_csv(5));
    dir.write("config.json", R"({"input": "data.csv", "outcome": ["y1", "y2"], "treatment": "d",
      "vcov": "hc2", "mht": "bh",
      "resample": {"scheme": "residual", "replications": 1000, "seed": 3}})");
    const std::string base = "analyze --config \"" + (dir.path / "config.json").string() + "\"";
    REQUIRE(run_cli(base + " --out \"" + (dir.path / "a.json").string() + "\" --csv \"" +
                        (dir.path / "a.csv").string() + "\"",
                    err) == 0);
    REQUIRE(run_cli(base + " --workers 2 --out \"" + (dir.path / "b.json").string() + "\"", err) == 0);
    const Json a = Json::parse(slurp(dir.path / "a.json"));
    CHECK(slurp(dir.path / "a.json") == slurp(dir.path / "b.json"));
    REQUIRE(run_cli(base + " --out \"" + (dir.path / "c.json").string() + "\"", err) == 0);
    CHECK(slurp(dir.path / "a.json") == slurp(dir.path / "c.json"));
    CHECK(robinf::parse_csv(slurp(dir.path / "a.csv")).rows.size() == 4);
    CHECK(a["mht"]["error_rate"] == "FDR");
    CHECK(a["analyses"][0]["resampling"]["null_imposed"]["value"] == 0.0);
  }
  SUBCASE("saturated dummy with HC2 exits 4 and names the line") {
    dir.write("data.csv", "y,d,z\n1,0,0\n2,0,1\n3,1,0\n4,1,0\n5,0,0\n6,1,0\n");
    dir.write("config.json", R"({"input": "data.csv", "outcome": "y", "covariates": ["z", "d"], "vcov": "hc2"})");
    CHECK(run_cli("analyze --config \"" + (dir.path / "config.json").string() + "\"", err) == 4);
    const Json e = Json::parse(slurp(err));
    CHECK(e["error"]["code"] == "LeverageInfeasible");
    CHECK(e["error"]["indices"] == Json::array({1}));
    CHECK(e["error"]["message"].get<std::string>().find("line(s) 3") != std::string::npos);
    CHECK(run_cli("analyze --config \"" + (dir.path / "config.json").string() + "\" --vcov hc1 --out \"" +
                      (dir.path / "ok.json").string() + "\"",
                  err) == 0);
  }
  SUBCASE("configuration and data errors") {
    dir.write("data.csv", "y,x\n1,2\n2,oops\n");
    dir.write("bad.json", R"({"input": "data.csv", "outcome": "y", "colour": "red"})");
    dir.write("num.json", R"({"input": "data.csv", "outcome": "y", "covariates": ["x"]})");
    dir.write("seedless.json", R"({"input": "data.csv", "outcome": "y", "resample": {"scheme": "pairs"}})");
    CHECK(run_cli("analyze --config \"" + (dir.path / "bad.json").string() + "\"", err) == 2);
    CHECK(run_cli("analyze --config \"" + (dir.path / "seedless.json").string() + "\"", err) == 2);
    CHECK(Json::parse(slurp(err))["error"]["message"].get<std::string>().find("seed") != std::string::npos);
    CHECK(run_cli("analyze --config \"" + (dir.path / "num.json").string() + "\"", err) == 3);
    CHECK(run_cli("analyze --config \"" + (dir.path / "num.json").string() + "\" --reps 10", err) == 2);
    CHECK(run_cli("analyze --config \"" + (dir.path / "missing.json").string() + "\"", err) == 2);
    CHECK(run_cli("analyze", err) == 2);
  }
  SUBCASE("collapse-periods") {
    dir.write("panel.csv", "unit,period,y\na,1,1\na,2,3\na,3,5\nb,1,4\n");
    CHECK(run_cli("collapse-periods --input \"" + (dir.path / "panel.csv").string() +
                      "\" --unit unit --period period --cutoff 2 --out \"" + (dir.path / "c.csv").string() + "\"",
                  err) == 0);
    const auto t = robinf::parse_csv(slurp(dir.path / "c.csv"));
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][2] == "2");
    CHECK(t.rows[1][2] == "5");
  }
}
