#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "multisite/csv.hpp"
#include "multisite/draws.hpp"
#include "multisite/errors.hpp"

namespace mst {

enum class Method { PM, CB, GR };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::PM: return "pm";
    case Method::CB: return "cb";
    case Method::GR: return "gr";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "pm") return Method::PM;
  if (s == "cb") return Method::CB;
  if (s == "gr") return Method::GR;
  throw InputError("unknown summary method: " + s);
}

struct SiteEstimates {
  std::vector<std::string> site_ids;
  std::vector<double> estimates;
  Method method = Method::PM;
  ModelKind model = ModelKind::Gaussian;
};

// Per-site posterior moments plus the finite-population spread terms that
// drive the constrained-Bayes rescale:
//   sigma_hat^2 = mean(lambda) + v, v the (J-1)-denominator variance of
//   the posterior means.
struct PosteriorSummaryStats {
  std::vector<double> eta;     // posterior means
  std::vector<double> lambda;  // posterior variances
  double eta_bar = 0.0;
  double v = 0.0;
  double sigma_hat = 0.0;
};

namespace detail {

inline void require_draws(const DrawMatrix& d) {
  if (d.num_draws < 2) throw InputError("need at least 2 posterior draws");
  if (d.num_sites() < 1) throw InputError("draw matrix has no sites");
}

}  // namespace detail

inline PosteriorSummaryStats compute_summary_stats(const DrawMatrix& d) {
  detail::require_draws(d);
  const std::size_t s_n = d.num_draws, j_n = d.num_sites();
  PosteriorSummaryStats st;
  st.eta.assign(j_n, 0.0);
  st.lambda.assign(j_n, 0.0);
  for (std::size_t s = 0; s < s_n; ++s)
    for (std::size_t j = 0; j < j_n; ++j) st.eta[j] += d.tau[s * j_n + j];
  for (double& e : st.eta) e /= static_cast<double>(s_n);
  for (std::size_t s = 0; s < s_n; ++s)
    for (std::size_t j = 0; j < j_n; ++j) {
      double c = d.tau[s * j_n + j] - st.eta[j];
      st.lambda[j] += c * c;
    }
  for (double& l : st.lambda) l /= static_cast<double>(s_n - 1);
  st.eta_bar = std::accumulate(st.eta.begin(), st.eta.end(), 0.0) /
               static_cast<double>(j_n);
  if (j_n >= 2) {
    for (double e : st.eta) st.v += (e - st.eta_bar) * (e - st.eta_bar);
    st.v /= static_cast<double>(j_n - 1);
  }
  double mean_lambda =
      std::accumulate(st.lambda.begin(), st.lambda.end(), 0.0) /
      static_cast<double>(j_n);
  st.sigma_hat = std::sqrt(mean_lambda + st.v);
  return st;
}

// Posterior means: the MSEL-optimal summary.
inline SiteEstimates summarize_pm(const DrawMatrix& d) {
  auto st = compute_summary_stats(d);
  return {d.site_ids, std::move(st.eta), Method::PM, d.model};
}

// Constrained Bayes: rescales the posterior means about their average so
// their finite-sample variance equals sigma_hat^2, undoing shrinkage-
// induced underdispersion.
inline SiteEstimates summarize_cb(const DrawMatrix& d) {
  if (d.num_sites() < 2) throw InputError("CB needs at least 2 sites");
  auto st = compute_summary_stats(d);
  if (!(st.v > 0.0)) throw DegenerateVariance();
  double scale = st.sigma_hat / std::sqrt(st.v);
  std::vector<double> est(d.num_sites());
  for (std::size_t j = 0; j < est.size(); ++j)
    est[j] = st.eta_bar + (st.eta[j] - st.eta_bar) * scale;
  return {d.site_ids, std::move(est), Method::CB, d.model};
}

// Pooled posterior EDF of all draws evaluated at each grid point
// (grid must be sorted ascending).
inline std::vector<double> posterior_edf(const DrawMatrix& d,
                                         const std::vector<double>& t_grid) {
  detail::require_draws(d);
  if (!std::is_sorted(t_grid.begin(), t_grid.end()))
    throw InputError("posterior_edf needs a sorted grid");
  std::vector<double> pooled = d.tau;
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> out;
  out.reserve(t_grid.size());
  double n = static_cast<double>(pooled.size());
  for (double t : t_grid) {
    auto it = std::upper_bound(pooled.begin(), pooled.end(), t);
    out.push_back(static_cast<double>(it - pooled.begin()) / n);
  }
  return out;
}

// Triple-goal summary. Stage 1 pins J evenly spaced quantiles of the
// pooled posterior EDF; stage 2 orders sites by posterior expected rank
// (computed within iterations, so joint dependence is kept); stage 3
// hands quantile k to the site with integer rank k. Ties in the expected
// ranks break by site order.
inline SiteEstimates summarize_gr(const DrawMatrix& d) {
  detail::require_draws(d);
  const std::size_t s_n = d.num_draws, j_n = d.num_sites();

  // quantiles of the pooled EDF at (2k-1)/(2J), left-continuous inverse
  std::vector<double> pooled = d.tau;
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> u(j_n);
  for (std::size_t k = 1; k <= j_n; ++k) {
    std::size_t m = (2 * k - 1) * s_n;  // p*N*2
    std::size_t idx = (m + 1) / 2 - 1;  // ceil(p*N) - 1
    u[k - 1] = pooled[idx];
  }

  // expected ascending ranks, averaging per-iteration tie-aware ranks
  std::vector<double> rbar(j_n, 0.0);
  std::vector<double> row(j_n), sorted_row(j_n);
  for (std::size_t s = 0; s < s_n; ++s) {
    for (std::size_t j = 0; j < j_n; ++j) row[j] = d.tau[s * j_n + j];
    sorted_row = row;
    std::sort(sorted_row.begin(), sorted_row.end());
    for (std::size_t j = 0; j < j_n; ++j) {
      auto it =
          std::upper_bound(sorted_row.begin(), sorted_row.end(), row[j]);
      rbar[j] += static_cast<double>(it - sorted_row.begin());
    }
  }
  for (double& r : rbar) r /= static_cast<double>(s_n);

  // discretize to integer ranks 1..J, ties by site order
  std::vector<std::size_t> order(j_n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return rbar[a] < rbar[b];
                   });
  std::vector<double> est(j_n);
  for (std::size_t pos = 0; pos < j_n; ++pos) est[order[pos]] = u[pos];
  return {d.site_ids, std::move(est), Method::GR, d.model};
}

inline SiteEstimates summarize(const DrawMatrix& d, Method m) {
  switch (m) {
    case Method::PM: return summarize_pm(d);
    case Method::CB: return summarize_cb(d);
    case Method::GR: return summarize_gr(d);
  }
  throw InputError("unknown summary method");
}

// estimates CSV: site_id,estimate,method,model
inline void write_estimates_csv(std::ostream& out, const SiteEstimates& e) {
  csv::Writer w(out);
  w.row("site_id", "estimate", "method", "model");
  for (std::size_t j = 0; j < e.site_ids.size(); ++j)
    w.row(e.site_ids[j], e.estimates[j], to_string(e.method),
          to_string(e.model));
}

inline std::vector<SiteEstimates> read_estimates_csv(const std::string& path) {
  auto t = csv::read_file(path);
  auto ci = t.col("site_id"), ce = t.col("estimate");
  auto cm = t.col("method"), cmod = t.col("model");
  std::vector<SiteEstimates> groups;
  for (const auto& r : t.rows) {
    Method meth = parse_method(r[cm]);
    ModelKind model = parse_model(r[cmod]);
    if (groups.empty() || groups.back().method != meth ||
        groups.back().model != model) {
      groups.push_back({{}, {}, meth, model});
    }
    groups.back().site_ids.push_back(r[ci]);
    groups.back().estimates.push_back(csv::to_double(r[ce]));
  }
  return groups;
}

}  // namespace mst
