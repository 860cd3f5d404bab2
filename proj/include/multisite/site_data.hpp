#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "multisite/csv.hpp"
#include "multisite/errors.hpp"

namespace mst {

// One site's effect summary: the point estimate and its squared standard
// error, both on the same (effect-size) scale. This pair is the entire
// data input for every model in the library.
struct SiteSummary {
  std::string site_id;
  double tau_hat = 0.0;
  double se2 = 0.0;
};

struct TrialDataset {
  std::vector<SiteSummary> sites;

  std::size_t num_sites() const { return sites.size(); }

  std::vector<double> tau_hats() const {
    std::vector<double> v;
    v.reserve(sites.size());
    for (const auto& s : sites) v.push_back(s.tau_hat);
    return v;
  }
  std::vector<double> se2s() const {
    std::vector<double> v;
    v.reserve(sites.size());
    for (const auto& s : sites) v.push_back(s.se2);
    return v;
  }
  std::vector<std::string> site_ids() const {
    std::vector<std::string> v;
    v.reserve(sites.size());
    for (const auto& s : sites) v.push_back(s.site_id);
    return v;
  }
};

// Design-side description of one site; used when working back from
// unit-level counts (sample-size rules, precision formulas).
struct SiteDesign {
  int n_j = 0;       // site sample size, >= 5
  double p_j = 0.5;  // proportion treated, in (0,1)
  double r2 = 0.0;   // covariate R^2, in [0,1)
  double s2 = 1.0;   // within-arm outcome variance

  // Neyman sampling variance of the site's effect estimate:
  //   (1/p + 1/(1-p)) * s^2 (1 - R^2) / n.
  // At the defaults (p = 1/2, R^2 = 0, s^2 = 1) this is the 4/n used by
  // the simulation designs.
  double se2() const {
    if (n_j < 1) throw InputError("site size must be positive");
    if (!(p_j > 0.0 && p_j < 1.0))
      throw InputError("proportion treated must be in (0,1)");
    if (!(r2 >= 0.0 && r2 < 1.0)) throw InputError("R^2 must be in [0,1)");
    return (1.0 / p_j + 1.0 / (1.0 - p_j)) * s2 * (1.0 - r2) /
           static_cast<double>(n_j);
  }
};

// Average reliability of the raw site estimates: the shrinkage factor
// evaluated at the geometric mean of the se_j^2. In [0,1].
struct Informativeness {
  double value = 0.0;
};

// 2x2 outcome table for one site with a binary endpoint.
struct BinarySiteTable {
  std::string site_id;
  long long treated_success = 0;
  long long treated_total = 0;
  long long control_success = 0;
  long long control_total = 0;
};

// Checks dataset invariants and returns the dataset unchanged.
// Throws DuplicateSiteId, NonPositiveVariance or TooFewSites.
inline const TrialDataset& validate_dataset(const TrialDataset& d) {
  if (d.num_sites() < 2) throw TooFewSites(d.num_sites());
  std::unordered_set<std::string> seen;
  for (const auto& s : d.sites) {
    if (!seen.insert(s.site_id).second) throw DuplicateSiteId(s.site_id);
    if (!(s.se2 > 0.0) || !std::isfinite(s.se2))
      throw NonPositiveVariance(s.site_id);
    if (!std::isfinite(s.tau_hat))
      throw InputError("non-finite effect estimate at site: " + s.site_id);
  }
  return d;
}

// I = sigma^2 / (sigma^2 + GM(se_j^2)), GM the geometric mean.
inline Informativeness informativeness(const TrialDataset& d, double sigma2) {
  validate_dataset(d);
  if (!(sigma2 >= 0.0))
    throw InputError("informativeness needs sigma2 >= 0");
  double mean_log = 0.0;
  for (const auto& s : d.sites) mean_log += std::log(s.se2);
  mean_log /= static_cast<double>(d.num_sites());
  if (sigma2 == 0.0) return {0.0};
  return {sigma2 / (sigma2 + std::exp(mean_log))};
}

// Log odds ratio -> standardized mean difference (Cohen's d) scale:
// d = logOR * sqrt(3)/pi, var_d = var_logOR * 3/pi^2.
inline std::pair<double, double> logor_to_d(double logor, double var_logor) {
  if (!(var_logor > 0.0)) throw InputError("logor_to_d needs var_logor > 0");
  constexpr double pi = std::numbers::pi;
  return {logor * (std::numbers::sqrt3 / pi), var_logor * (3.0 / (pi * pi))};
}

struct IngestResult {
  TrialDataset data;
  std::vector<std::string> dropped_site_ids;
};

// Converts per-site 2x2 tables to effect-size summaries on the d scale.
// Sites where either arm total is below min_cell are dropped (both
// n_j*p_j and n_j*(1-p_j) must reach min_cell; those products ARE the arm
// totals). Zero cells get the +0.5 continuity correction applied to all
// four cells of that site.
inline IngestResult ingest_binary_sites(
    const std::vector<BinarySiteTable>& tables, long long min_cell = 8) {
  if (tables.empty()) throw InputError("no binary site tables given");
  IngestResult out;
  for (const auto& t : tables) {
    if (t.treated_total < 1 || t.control_total < 1)
      throw InputError("arm total below 1 at site: " + t.site_id);
    if (t.treated_success < 0 || t.control_success < 0 ||
        t.treated_success > t.treated_total ||
        t.control_success > t.control_total)
      throw InputError("successes exceed totals at site: " + t.site_id);
    if (t.treated_total < min_cell || t.control_total < min_cell) {
      out.dropped_site_ids.push_back(t.site_id);
      continue;
    }
    double a = static_cast<double>(t.treated_success);
    double b = static_cast<double>(t.treated_total - t.treated_success);
    double c = static_cast<double>(t.control_success);
    double d = static_cast<double>(t.control_total - t.control_success);
    if (a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0) {
      a += 0.5;
      b += 0.5;
      c += 0.5;
      d += 0.5;
    }
    double logor = std::log((a * d) / (b * c));
    double var_logor = 1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d;
    auto [eff, var] = logor_to_d(logor, var_logor);
    out.data.sites.push_back({t.site_id, eff, var});
  }
  if (out.data.sites.empty()) throw AllSitesExcluded();
  return out;
}

// ---- CSV formats -----------------------------------------------------
// sites:  site_id,tau_hat,se2
// binary: site_id,t_succ,t_tot,c_succ,c_tot
// truth:  site_id,tau_true[,n_j]

inline TrialDataset read_sites_csv(const std::string& path) {
  auto t = csv::read_file(path);
  auto ci = t.col("site_id"), ct = t.col("tau_hat"), cs = t.col("se2");
  TrialDataset d;
  for (const auto& r : t.rows)
    d.sites.push_back({r[ci], csv::to_double(r[ct]), csv::to_double(r[cs])});
  return d;
}

inline void write_sites_csv(std::ostream& out, const TrialDataset& d) {
  csv::Writer w(out);
  w.row("site_id", "tau_hat", "se2");
  for (const auto& s : d.sites) w.row(s.site_id, s.tau_hat, s.se2);
}

inline std::vector<BinarySiteTable> read_binary_csv(const std::string& path) {
  auto t = csv::read_file(path);
  auto ci = t.col("site_id");
  auto ts = t.col("t_succ"), tt = t.col("t_tot");
  auto cs = t.col("c_succ"), ct = t.col("c_tot");
  std::vector<BinarySiteTable> tables;
  for (const auto& r : t.rows)
    tables.push_back({r[ci], csv::to_int(r[ts]), csv::to_int(r[tt]),
                      csv::to_int(r[cs]), csv::to_int(r[ct])});
  return tables;
}

}  // namespace mst
