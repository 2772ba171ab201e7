#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "oracles.hpp"
#include "robinf/error.hpp"
#include "robinf/mht.hpp"

using Eigen::MatrixXd;
using robinf::Hypothesis;
using robinf::MhtMethod;
using robinf::PValueFamily;

namespace {

PValueFamily family(std::vector<double> p, double alpha = 0.05) {
  PValueFamily f;
  f.alpha = alpha;
  for (std::size_t i = 0; i < p.size(); ++i) f.hypotheses.push_back(Hypothesis{"h" + std::to_string(i), p[i], {}});
  return f;
}

std::vector<double> adjusted(const robinf::MHTReport& r) {
  std::vector<double> out;
  for (const auto& x : r.results) out.push_back(x.adjusted_p);
  return out;
}

std::vector<bool> rejected(const robinf::MHTReport& r) {
  std::vector<bool> out;
  for (const auto& x : r.results) out.push_back(x.rejected);
  return out;
}

// Column-wise resampled p-values: share of |T*| at least |t|.
std::vector<double> resampled_p(const MatrixXd& reps, const std::vector<double>& t) {
  std::vector<double> p;
  for (Eigen::Index l = 0; l < reps.cols(); ++l) {
    const auto count = (reps.col(l).array().abs() >= std::abs(t[static_cast<std::size_t>(l)])).count();
    p.push_back(static_cast<double>(count) / static_cast<double>(reps.rows()));
  }
  return p;
}

PValueFamily with_stats(const std::vector<double>& t, const std::vector<double>& p, double alpha = 0.05) {
  PValueFamily f = family(p, alpha);
  for (std::size_t i = 0; i < t.size(); ++i) f.hypotheses[i].statistic = t[i];
  return f;
}

MatrixXd normal_replicates(oracle::Sim& sim, Eigen::Index r, Eigen::Index m, double rho) {
  MatrixXd reps(r, m);
  for (Eigen::Index b = 0; b < r; ++b) {
    const double common = sim.normal();
    for (Eigen::Index l = 0; l < m; ++l) {
      reps(b, l) = std::sqrt(rho) * common + std::sqrt(1.0 - rho) * sim.normal();
    }
  }
  return reps;
}

}  // namespace

TEST_CASE("Bonferroni") {
  SUBCASE("m = 10 uses the critical value 0.005") {
    std::vector<double> p(10, 0.5);
    p[0] = 0.0049;
    p[1] = 0.005;
    const auto r = robinf::bonferroni(family(p));
    CHECK(r.results[0].rejected);
    CHECK_FALSE(r.results[1].rejected);
    CHECK(r.results[1].adjusted_p == doctest::Approx(0.05));
  }
  SUBCASE("m = 1 is the raw test") {
    const auto r = robinf::bonferroni(family({0.03}));
    CHECK(r.results[0].adjusted_p == 0.03);
    CHECK(r.results[0].rejected);
  }
  SUBCASE("two-test hand example") {
    const auto r = robinf::bonferroni(family({0.004, 0.02}));
    CHECK(rejected(r) == std::vector<bool>{true, true});
    CHECK(adjusted(r)[0] == doctest::Approx(0.008));
    CHECK(adjusted(r)[1] == doctest::Approx(0.04));
    CHECK(r.error_rate == robinf::ErrorRate::FWER);
  }
}

TEST_CASE("Holm") {
  SUBCASE("all three rejected") {
    const auto r = robinf::holm(family({0.001, 0.02, 0.04}));
    CHECK(rejected(r) == std::vector<bool>{true, true, true});
    CHECK(adjusted(r)[0] == doctest::Approx(0.003));
    CHECK(adjusted(r)[1] == doctest::Approx(0.04));
    CHECK(adjusted(r)[2] == doctest::Approx(0.04));
  }
  SUBCASE("stops at the first failure") {
    const auto r = robinf::holm(family({0.03, 0.04}));
    CHECK(rejected(r) == std::vector<bool>{false, false});
  }
  SUBCASE("equal p below alpha/m") {
    const auto r = robinf::holm(family({0.01, 0.01, 0.01, 0.01}));
    CHECK(rejected(r) == std::vector<bool>{true, true, true, true});
  }
}

TEST_CASE("Benjamini-Hochberg") {
  SUBCASE("hand example") {
    const auto r = robinf::benjamini_hochberg(family({0.01, 0.02, 0.04, 0.30}));
    CHECK(rejected(r) == std::vector<bool>{true, true, false, false});
    const auto q = adjusted(r);
    CHECK(q[0] == doctest::Approx(0.04));
    CHECK(q[1] == doctest::Approx(0.04));
    CHECK(q[2] == doctest::Approx(0.04 * 4.0 / 3.0));
    CHECK(q[3] == doctest::Approx(0.30));
    CHECK(r.error_rate == robinf::ErrorRate::FDR);
  }
  SUBCASE("all nulls") {
    const auto r = robinf::benjamini_hochberg(family({1.0, 1.0, 1.0}));
    CHECK(adjusted(r) == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(rejected(r) == std::vector<bool>{false, false, false});
  }
  SUBCASE("m = 1") {
    const auto r = robinf::benjamini_hochberg(family({0.049}));
    CHECK(r.results[0].adjusted_p == 0.049);
    CHECK(r.results[0].rejected);
  }
}

TEST_CASE("BKY sharpened q-values") {
  SUBCASE("no stage-one rejections: BH at alpha/(1+alpha)") {
    const auto fam = family({0.049, 0.049, 0.049, 0.049});
    const auto bky = robinf::bky_sharpened(fam);
    const auto bh = robinf::benjamini_hochberg(fam);
    CHECK(rejected(bh) == std::vector<bool>{true, true, true, true});
    CHECK(rejected(bky) == std::vector<bool>{false, false, false, false});
    for (std::size_t i = 0; i < 4; ++i) CHECK(bky.results[i].adjusted_p >= bh.results[i].adjusted_p);
  }
  SUBCASE("many tiny p-values sharpen the rest below BH") {
    std::vector<double> p(8, 1e-6);
    p.push_back(0.03);
    p.push_back(0.045);
    const auto fam = family(p);
    const auto bky = robinf::bky_sharpened(fam);
    const auto bh = robinf::benjamini_hochberg(fam);
    CHECK(bky.results[8].adjusted_p < bh.results[8].adjusted_p);
    CHECK(bky.results[9].adjusted_p < bh.results[9].adjusted_p);
  }
  SUBCASE("a sharpened q below its raw p exists") {
    oracle::Sim sim(404);
    bool found = false;
    for (int rep = 0; rep < 500 && !found; ++rep) {
      std::vector<double> p;
      const auto m = sim.integer(5, 30);
      for (std::size_t i = 0; i < m; ++i) p.push_back(sim.uniform() < 0.7 ? sim.uniform(0.0, 0.002) : sim.uniform(0.0, 0.2));
      const auto r = robinf::bky_sharpened(family(p));
      for (const auto& x : r.results) found = found || x.adjusted_p < x.raw_p;
    }
    CHECK(found);
  }
  SUBCASE("q-values are grid points in [0, 1] and decisions follow them") {
    const auto r = robinf::bky_sharpened(family({0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.074, 0.205, 0.212, 0.216}));
    for (const auto& x : r.results) {
      CHECK(x.adjusted_p >= 0.0);
      CHECK(x.adjusted_p <= 1.0);
      const double steps = x.adjusted_p / robinf::kSharpenedGridStep;
      CHECK(std::abs(steps - std::round(steps)) < 1e-6);
      CHECK(x.rejected == (x.adjusted_p <= 0.05));
    }
  }
}

TEST_CASE("family-wide properties on random families") {
  oracle::Sim sim(99);
  const MhtMethod methods[] = {MhtMethod::Bonferroni, MhtMethod::Holm, MhtMethod::BenjaminiHochberg,
                               MhtMethod::BKY};
  for (int rep = 0; rep < 300; ++rep) {
    const auto m = sim.integer(1, 12);
    std::vector<double> p;
    for (std::size_t i = 0; i < m; ++i) {
      p.push_back(sim.uniform() < 0.4 ? sim.uniform(0.0, 0.02) : sim.uniform());
      if (i > 0 && sim.uniform() < 0.1) p.back() = p[i - 1];  // ties
    }
    const auto fam = family(p);
    CAPTURE(rep);
    const auto bonf = robinf::bonferroni(fam);
    const auto holm = robinf::holm(fam);
    for (std::size_t i = 0; i < m; ++i) CHECK(holm.results[i].adjusted_p <= bonf.results[i].adjusted_p);

    for (auto method : methods) {
      const auto base = robinf::adjust(fam, method);
      for (const auto& x : base.results) {
        CHECK(x.adjusted_p >= 0.0);
        CHECK(x.adjusted_p <= 1.0);
        if (base.error_rate == robinf::ErrorRate::FWER) CHECK(x.adjusted_p >= x.raw_p);
      }
      // Monotone along the sort order, and no rejected hypothesis sits above
      // a non-rejected one.
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
      for (std::size_t j = 1; j < m; ++j) {
        CHECK(base.results[order[j]].adjusted_p >= base.results[order[j - 1]].adjusted_p);
        if (base.results[order[j]].rejected) CHECK(base.results[order[j - 1]].rejected);
      }
      // Shuffling the family leaves id -> decision unchanged.
      PValueFamily shuffled = fam;
      std::shuffle(shuffled.hypotheses.begin(), shuffled.hypotheses.end(), sim.rng);
      const auto other = robinf::adjust(shuffled, method);
      std::map<std::string, std::pair<bool, double>> a, b;
      for (const auto& x : base.results) a[x.id] = {x.rejected, x.adjusted_p};
      for (const auto& x : other.results) b[x.id] = {x.rejected, x.adjusted_p};
      CHECK(a == b);
      // Lowering one p-value never shrinks the rejection set.
      PValueFamily lowered = fam;
      const auto pick = sim.integer(0, m - 1);
      lowered.hypotheses[pick].raw_p *= sim.uniform();
      const auto low = robinf::adjust(lowered, method);
      for (std::size_t i = 0; i < m; ++i) {
        if (base.results[i].rejected) CHECK(low.results[i].rejected);
      }
    }
  }
}

TEST_CASE("Westfall-Young and Romano-Wolf") {
  oracle::Sim sim(1234);
  SUBCASE("m = 1 reduces to the resampled p-value") {
    const MatrixXd reps = normal_replicates(sim, 5000, 1, 0.0);
    const std::vector<double> t{1.9};
    const auto p = resampled_p(reps, t);
    const auto fam = with_stats(t, p);
    CHECK(robinf::westfall_young(fam, reps).results[0].adjusted_p == doctest::Approx(p[0]).epsilon(1e-15));
    CHECK(robinf::romano_wolf(fam, reps).results[0].adjusted_p == doctest::Approx(p[0]).epsilon(1e-15));
  }
  SUBCASE("duplicated hypotheses are not doubled") {
    const MatrixXd one = normal_replicates(sim, 5000, 1, 0.0);
    MatrixXd reps(5000, 2);
    reps << one, one;
    const std::vector<double> t{2.1, 2.1};
    const auto p = resampled_p(reps, t);
    const auto fam = with_stats(t, p);
    for (const auto& r : {robinf::westfall_young(fam, reps), robinf::romano_wolf(fam, reps)}) {
      CHECK(r.results[0].adjusted_p == doctest::Approx(p[0]));
      CHECK(r.results[1].adjusted_p == doctest::Approx(p[0]));
    }
    CHECK(robinf::bonferroni(fam).results[0].adjusted_p == doctest::Approx(2.0 * p[0]));
  }
  SUBCASE("independent replicates track Holm on resampled p") {
    const MatrixXd reps = normal_replicates(sim, 20000, 5, 0.0);
    const std::vector<double> t{3.0, 2.8, 2.5, 2.2, 1.0};
    const auto p = resampled_p(reps, t);
    const auto fam = with_stats(t, p);
    const auto wy = robinf::westfall_young(fam, reps);
    const auto holm = robinf::holm(fam);
    for (std::size_t l = 0; l < 5; ++l) {
      CHECK(std::abs(wy.results[l].adjusted_p - holm.results[l].adjusted_p) <= 0.02);
    }
  }
  SUBCASE("Romano-Wolf rejects at least what Bonferroni rejects") {
    for (int rep = 0; rep < 100; ++rep) {
      const MatrixXd reps = normal_replicates(sim, 2000, 6, 0.5);
      std::vector<double> t;
      for (int l = 0; l < 6; ++l) t.push_back(sim.normal(l < 3 ? 3.0 : 0.0, 1.0));
      const auto fam = with_stats(t, resampled_p(reps, t));
      const auto rw = robinf::romano_wolf(fam, reps);
      const auto bonf = robinf::bonferroni(fam);
      CAPTURE(rep);
      for (std::size_t l = 0; l < 6; ++l) {
        if (bonf.results[l].rejected) CHECK(rw.results[l].rejected);
      }
    }
  }
  SUBCASE("statistics are required") {
    const auto fam = family({0.01, 0.2});
    CHECK_THROWS_AS(robinf::westfall_young(fam, MatrixXd::Zero(10, 2)), robinf::Error);
    try {
      robinf::adjust(fam, MhtMethod::RomanoWolf);
      FAIL("expected MissingStatistics");
    } catch (const robinf::Error& e) {
      CHECK(e.code() == robinf::ErrorCode::MissingStatistics);
    }
  }
}

TEST_CASE("family validation and method names") {
  CHECK_THROWS_AS(robinf::holm(family({0.1, 1.2})), robinf::Error);
  CHECK_THROWS_AS(robinf::holm(family({})), robinf::Error);
  auto dup = family({0.1, 0.2});
  dup.hypotheses[1].id = dup.hypotheses[0].id;
  CHECK_THROWS_AS(robinf::holm(dup), robinf::Error);
  CHECK(robinf::parse_mht_method("rw") == MhtMethod::RomanoWolf);
  CHECK(robinf::parse_mht_method("bky") == MhtMethod::BKY);
  CHECK_FALSE(robinf::parse_mht_method("sidak").has_value());
}
