#include "robinf/mht.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "robinf/error.hpp"

namespace robinf {

namespace {

// Ascending raw p, ties broken by id.
std::vector<std::size_t> p_order(const PValueFamily& f) {
  std::vector<std::size_t> idx(f.m());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& ha = f.hypotheses[a];
    const auto& hb = f.hypotheses[b];
    if (ha.raw_p != hb.raw_p) return ha.raw_p < hb.raw_p;
    return ha.id < hb.id;
  });
  return idx;
}

MHTReport skeleton(const PValueFamily& f, MhtMethod method, ErrorRate rate) {
  f.validate();
  MHTReport r;
  r.method = method;
  r.error_rate = rate;
  r.alpha = f.alpha;
  for (const auto& h : f.hypotheses) r.results.push_back({h.id, h.raw_p, h.raw_p, false});
  return r;
}

// Largest rank i (1-based, 0 if none) with p_(i) <= (i/m)·level.
std::size_t step_up_count(const std::vector<double>& sorted_p, double level) {
  const double m = static_cast<double>(sorted_p.size());
  for (std::size_t i = sorted_p.size(); i > 0; --i) {
    if (sorted_p[i - 1] <= (static_cast<double>(i) / m) * level) return i;
  }
  return 0;
}

std::size_t two_stage_count(const std::vector<double>& sorted_p, double alpha) {
  const std::size_t m = sorted_p.size();
  const double level1 = alpha / (1.0 + alpha);
  const std::size_t r1 = step_up_count(sorted_p, level1);
  if (r1 == 0) return 0;
  if (r1 == m) return m;
  const double level2 = level1 * static_cast<double>(m) / static_cast<double>(m - r1);
  return step_up_count(sorted_p, level2);
}

void require_statistics(const PValueFamily& f, const Eigen::MatrixXd& replicates) {
  for (const auto& h : f.hypotheses) {
    if (!h.statistic) {
      throw Error(ErrorCode::MissingStatistics, "hypothesis '" + h.id + "' has no statistic",
                  "resampling-based corrections need observed statistics");
    }
  }
  if (replicates.rows() < 1 || replicates.cols() != static_cast<Eigen::Index>(f.m())) {
    throw Error(ErrorCode::MissingStatistics,
                "replicate matrix must be r x m with one column per hypothesis");
  }
}

// Descending |statistic|, ties broken by id.
std::vector<std::size_t> stat_order(const PValueFamily& f) {
  std::vector<std::size_t> idx(f.m());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double sa = std::abs(*f.hypotheses[a].statistic);
    const double sb = std::abs(*f.hypotheses[b].statistic);
    if (sa != sb) return sa > sb;
    return f.hypotheses[a].id < f.hypotheses[b].id;
  });
  return idx;
}

// Step-down max-T adjusted p-values, indexed by position in `order`.
std::vector<double> max_t_adjusted(const PValueFamily& f, const Eigen::MatrixXd& rep,
                                   const std::vector<std::size_t>& order) {
  const std::size_t m = f.m();
  const auto r = rep.rows();
  std::vector<std::size_t> counts(m, 0);
  std::vector<double> suffix(m);
  for (Eigen::Index b = 0; b < r; ++b) {
    double running = -1.0;
    for (std::size_t j = m; j > 0; --j) {
      running = std::max(running, std::abs(rep(b, static_cast<Eigen::Index>(order[j - 1]))));
      suffix[j - 1] = running;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (suffix[j] >= std::abs(*f.hypotheses[order[j]].statistic)) ++counts[j];
    }
  }
  std::vector<double> adj(m);
  double prev = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    prev = std::max(prev, static_cast<double>(counts[j]) / static_cast<double>(r));
    adj[j] = prev;
  }
  return adj;
}

}  // namespace

void PValueFamily::validate() const {
  if (hypotheses.empty()) {
    throw Error(ErrorCode::ConfigError, "hypothesis family is empty");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::ConfigError, "alpha must lie in (0, 1)");
  }
  std::set<std::string> ids;
  for (const auto& h : hypotheses) {
    if (!(h.raw_p >= 0.0 && h.raw_p <= 1.0)) {
      throw Error(ErrorCode::ShapeMismatch, "p-value of '" + h.id + "' outside [0, 1]");
    }
    if (!ids.insert(h.id).second) {
      throw Error(ErrorCode::ConfigError, "duplicate hypothesis id '" + h.id + "'");
    }
  }
}

std::string_view to_string(MhtMethod method) {
  switch (method) {
    case MhtMethod::Bonferroni: return "bonferroni";
    case MhtMethod::Holm: return "holm";
    case MhtMethod::WestfallYoung: return "wy";
    case MhtMethod::RomanoWolf: return "rw";
    case MhtMethod::BenjaminiHochberg: return "bh";
    case MhtMethod::BKY: return "bky";
  }
  return "unknown";
}

std::optional<MhtMethod> parse_mht_method(std::string_view text) {
  static const std::map<std::string_view, MhtMethod> table = {
      {"bonferroni", MhtMethod::Bonferroni}, {"holm", MhtMethod::Holm},
      {"wy", MhtMethod::WestfallYoung},      {"westfall_young", MhtMethod::WestfallYoung},
      {"rw", MhtMethod::RomanoWolf},         {"romano_wolf", MhtMethod::RomanoWolf},
      {"bh", MhtMethod::BenjaminiHochberg},  {"bky", MhtMethod::BKY}};
  auto it = table.find(text);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

MHTReport bonferroni(const PValueFamily& family) {
  MHTReport r = skeleton(family, MhtMethod::Bonferroni, ErrorRate::FWER);
  const double m = static_cast<double>(family.m());
  for (auto& res : r.results) {
    res.adjusted_p = std::min(1.0, m * res.raw_p);
    res.rejected = res.raw_p < family.alpha / m;
  }
  return r;
}

MHTReport holm(const PValueFamily& family) {
  MHTReport r = skeleton(family, MhtMethod::Holm, ErrorRate::FWER);
  const auto order = p_order(family);
  const std::size_t m = family.m();
  double running = 0.0;
  bool still_rejecting = true;
  for (std::size_t i = 0; i < m; ++i) {
    auto& res = r.results[order[i]];
    const double remaining = static_cast<double>(m - i);
    running = std::max(running, std::min(1.0, remaining * res.raw_p));
    res.adjusted_p = running;
    still_rejecting = still_rejecting && res.raw_p < family.alpha / remaining;
    res.rejected = still_rejecting;
  }
  return r;
}

MHTReport benjamini_hochberg(const PValueFamily& family) {
  MHTReport r = skeleton(family, MhtMethod::BenjaminiHochberg, ErrorRate::FDR);
  const auto order = p_order(family);
  const std::size_t m = family.m();
  std::vector<double> sorted(m);
  for (std::size_t i = 0; i < m; ++i) sorted[i] = family.hypotheses[order[i]].raw_p;
  const std::size_t cutoff = step_up_count(sorted, family.alpha);
  double running = 1.0;
  for (std::size_t i = m; i > 0; --i) {
    const double q = static_cast<double>(m) / static_cast<double>(i) * sorted[i - 1];
    running = std::min(running, std::min(1.0, q));
    auto& res = r.results[order[i - 1]];
    res.adjusted_p = running;
    res.rejected = i <= cutoff;
  }
  return r;
}

MHTReport bky_sharpened(const PValueFamily& family) {
  MHTReport r = skeleton(family, MhtMethod::BKY, ErrorRate::FDR);
  const auto order = p_order(family);
  const std::size_t m = family.m();
  std::vector<double> sorted(m);
  for (std::size_t i = 0; i < m; ++i) sorted[i] = family.hypotheses[order[i]].raw_p;

  // q_(i) = smallest grid level whose two-stage procedure rejects rank i.
  std::vector<double> q(m, 1.0);
  std::size_t assigned = 0;
  const auto steps = static_cast<long>(std::llround(1.0 / kSharpenedGridStep));
  for (long s = 1; s <= steps && assigned < m; ++s) {
    const double level = static_cast<double>(s) * kSharpenedGridStep;
    const std::size_t count = two_stage_count(sorted, level);
    for (; assigned < count; ++assigned) q[assigned] = level;
  }
  // Step-up rejection sets are prefixes, so q is already monotone; the
  // running min only guards against rounding in the grid.
  for (std::size_t i = m - 1; i > 0; --i) q[i - 1] = std::min(q[i - 1], q[i]);

  const std::size_t cutoff = two_stage_count(sorted, family.alpha);
  for (std::size_t i = 0; i < m; ++i) {
    auto& res = r.results[order[i]];
    res.adjusted_p = std::min(1.0, q[i]);
    res.rejected = i < cutoff;
  }
  return r;
}

MHTReport westfall_young(const PValueFamily& family, const Eigen::MatrixXd& replicates) {
  MHTReport r = skeleton(family, MhtMethod::WestfallYoung, ErrorRate::FWER);
  require_statistics(family, replicates);
  const auto order = stat_order(family);
  const auto adj = max_t_adjusted(family, replicates, order);
  for (std::size_t j = 0; j < order.size(); ++j) {
    auto& res = r.results[order[j]];
    res.adjusted_p = std::max(adj[j], 0.0);
    res.rejected = adj[j] <= family.alpha;
  }
  return r;
}

MHTReport romano_wolf(const PValueFamily& family, const Eigen::MatrixXd& replicates) {
  MHTReport r = skeleton(family, MhtMethod::RomanoWolf, ErrorRate::FWER);
  require_statistics(family, replicates);
  const auto order = stat_order(family);
  const std::size_t m = family.m();
  const auto reps = replicates.rows();

  // Iterate: critical value from the max statistic over the hypotheses not
  // yet rejected; stop when a pass rejects nothing new.
  std::size_t rejected = 0;
  std::vector<double> maxima(static_cast<std::size_t>(reps));
  const auto rank = static_cast<std::size_t>(
      std::ceil((1.0 - family.alpha) * static_cast<double>(reps)));
  while (rejected < m) {
    for (Eigen::Index b = 0; b < reps; ++b) {
      double mx = 0.0;
      for (std::size_t j = rejected; j < m; ++j) {
        mx = std::max(mx, std::abs(replicates(b, static_cast<Eigen::Index>(order[j]))));
      }
      maxima[static_cast<std::size_t>(b)] = mx;
    }
    std::sort(maxima.begin(), maxima.end());
    const double critical = maxima[std::clamp<std::size_t>(rank, 1, maxima.size()) - 1];
    std::size_t next = rejected;
    while (next < m && std::abs(*family.hypotheses[order[next]].statistic) > critical) ++next;
    if (next == rejected) break;
    rejected = next;
  }

  const auto adj = max_t_adjusted(family, replicates, order);
  for (std::size_t j = 0; j < m; ++j) {
    auto& res = r.results[order[j]];
    res.adjusted_p = adj[j];
    res.rejected = j < rejected;
  }
  return r;
}

MHTReport adjust(const PValueFamily& family, MhtMethod method) {
  switch (method) {
    case MhtMethod::Bonferroni: return bonferroni(family);
    case MhtMethod::Holm: return holm(family);
    case MhtMethod::BenjaminiHochberg: return benjamini_hochberg(family);
    case MhtMethod::BKY: return bky_sharpened(family);
    case MhtMethod::WestfallYoung:
    case MhtMethod::RomanoWolf:
      break;
  }
  throw Error(ErrorCode::MissingStatistics,
              std::string(to_string(method)) + " needs replicate statistics",
              "configure a bootstrap or randomization scheme");
}

}  // namespace robinf
