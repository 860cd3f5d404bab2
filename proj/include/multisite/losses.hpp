#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "multisite/csv.hpp"
#include "multisite/errors.hpp"

namespace mst {

namespace detail {

inline void require_same_length(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
  if (a.empty()) throw InputError("empty loss input");
}

// Ascending ranks 1..J; ties broken by position (simulated truths are
// almost surely tie-free, this just pins the degenerate case).
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    r[order[pos]] = static_cast<double>(pos + 1);
  return r;
}

// Left-continuous generalized inverse of the EDF.
inline double edf_quantile(std::vector<double> sorted_values, double q) {
  std::sort(sorted_values.begin(), sorted_values.end());
  double n = static_cast<double>(sorted_values.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * n));
  if (idx < 1) idx = 1;
  if (idx > sorted_values.size()) idx = sorted_values.size();
  return sorted_values[idx - 1];
}

}  // namespace detail

// Root mean squared error of the estimates against the truth.
inline double rmse(const std::vector<double>& est,
                   const std::vector<double>& truth) {
  detail::require_same_length(est, truth);
  double ss = 0.0;
  for (std::size_t j = 0; j < est.size(); ++j)
    ss += (est[j] - truth[j]) * (est[j] - truth[j]);
  return std::sqrt(ss / static_cast<double>(est.size()));
}

// Mean squared error of the rank vectors (integer ranks).
inline double mselr(const std::vector<double>& est,
                    const std::vector<double>& truth) {
  detail::require_same_length(est, truth);
  auto a = detail::ranks(est);
  auto r = detail::ranks(truth);
  double ss = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
    ss += (a[j] - r[j]) * (a[j] - r[j]);
  return ss / static_cast<double>(a.size());
}

// Mean squared error of the percentiles: MSELR / J^2, comparable across
// different numbers of sites.
inline double mselp(const std::vector<double>& est,
                    const std::vector<double>& truth) {
  double j = static_cast<double>(est.size());
  return mselr(est, truth) / (j * j);
}

// Integrated squared error between the two EDFs, integrated exactly:
// both are step functions, so the squared difference is piecewise
// constant between pooled breakpoints and vanishes outside their range.
inline double isel(const std::vector<double>& est,
                   const std::vector<double>& truth) {
  detail::require_same_length(est, truth);
  std::vector<double> a = est, b = truth;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double n = static_cast<double>(a.size());
  std::size_t ia = 0, ib = 0;
  double total = 0.0;
  double prev = 0.0;
  bool started = false;
  while (ia < a.size() || ib < b.size()) {
    double v = (ia < a.size() && (ib >= b.size() || a[ia] <= b[ib])) ? a[ia]
                                                                     : b[ib];
    if (started && v > prev) {
      double diff = (static_cast<double>(ia) - static_cast<double>(ib)) / n;
      total += diff * diff * (v - prev);
    }
    while (ia < a.size() && a[ia] == v) ++ia;
    while (ib < b.size() && b[ib] == v) ++ib;
    prev = v;
    started = true;
  }
  return total;
}

// Squared gap between the q-quantiles of the two EDFs.
inline double mse_percentile(const std::vector<double>& est,
                             const std::vector<double>& truth, double q) {
  detail::require_same_length(est, truth);
  if (!(q > 0.0 && q < 1.0)) throw InputError("quantile must be in (0,1)");
  double qa = detail::edf_quantile(est, q);
  double qb = detail::edf_quantile(truth, q);
  return (qa - qb) * (qa - qb);
}

struct LossReport {
  std::string scenario_id;
  long long rep = 0;
  std::string model;
  std::string method;
  double rmse = 0.0;
  double isel = 0.0;
  double mselp = 0.0;
  double mse_p90 = 0.0;
  double informativeness = 0.0;
};

inline LossReport evaluate_losses(const std::vector<double>& est,
                                  const std::vector<double>& truth) {
  LossReport r;
  r.rmse = rmse(est, truth);
  r.isel = isel(est, truth);
  r.mselp = mselp(est, truth);
  r.mse_p90 = mse_percentile(est, truth, 0.9);
  return r;
}

inline void write_losses_header(std::ostream& out) {
  csv::Writer(out).row("scenario_id", "rep", "model", "method", "rmse",
                       "isel", "mselp", "mse_p90", "I");
}

inline void write_losses_row(std::ostream& out, const LossReport& r) {
  csv::Writer(out).row(r.scenario_id, r.rep, r.model, r.method, r.rmse,
                       r.isel, r.mselp, r.mse_p90, r.informativeness);
}

inline std::vector<LossReport> read_losses_csv(const std::string& path) {
  auto t = csv::read_file(path);
  auto cs = t.col("scenario_id"), cr = t.col("rep");
  auto cmod = t.col("model"), cmet = t.col("method");
  auto c1 = t.col("rmse"), c2 = t.col("isel"), c3 = t.col("mselp");
  auto c4 = t.col("mse_p90"), c5 = t.col("I");
  std::vector<LossReport> out;
  for (const auto& row : t.rows) {
    LossReport r;
    r.scenario_id = row[cs];
    r.rep = csv::to_int(row[cr]);
    r.model = row[cmod];
    r.method = row[cmet];
    r.rmse = csv::to_double(row[c1]);
    r.isel = csv::to_double(row[c2]);
    r.mselp = csv::to_double(row[c3]);
    r.mse_p90 = csv::to_double(row[c4]);
    r.informativeness = csv::to_double(row[c5]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mst
