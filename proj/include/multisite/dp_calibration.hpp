#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "multisite/dp_model.hpp"
#include "multisite/errors.hpp"

namespace mst {

// Prior pmf over the occupied-cluster count K = 1..J.
struct ClusterPrior {
  std::vector<double> pmf;

  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) m += (k + 1.0) * pmf[k];
    return m;
  }
  int mode() const {
    return static_cast<int>(std::max_element(pmf.begin(), pmf.end()) -
                            pmf.begin()) + 1;
  }
};

struct GammaHyper {
  double a = 1.0;
  double b = 1.0;
};

namespace detail {

inline double logaddexp(double x, double y) {
  if (x == -std::numeric_limits<double>::infinity()) return y;
  if (y == -std::numeric_limits<double>::infinity()) return x;
  double m = std::max(x, y);
  return m + std::log(std::exp(x - m) + std::exp(y - m));
}

}  // namespace detail

// log |S1(J, K)| for K = 1..J, via the row recurrence
// |S1(n+1,k)| = n|S1(n,k)| + |S1(n,k-1)| carried in log space.
inline std::vector<double> log_stirling1(int J) {
  if (J < 1 || J > 1000) throw InputError("log_stirling1 needs 1 <= J <= 1000");
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> row(static_cast<std::size_t>(J) + 1, ninf);
  row[1] = 0.0;  // |S1(1,1)| = 1
  std::vector<double> next(row.size(), ninf);
  for (int n = 1; n < J; ++n) {
    std::fill(next.begin(), next.end(), ninf);
    double logn = std::log(static_cast<double>(n));
    for (int k = 1; k <= n + 1; ++k) {
      next[k] = detail::logaddexp(logn + row[k], row[k - 1]);
    }
    row.swap(next);
  }
  return {row.begin() + 1, row.end()};
}

namespace detail {

// Shared quadrature grid for integrals over alpha after the alpha = e^t
// substitution. base[t] = lgamma(e^t) - lgamma(e^t + J) is the only
// J-dependent and (a,b)-independent part of the Eq.-A.7 integrand, so one
// grid serves a whole calibration run.
struct AlphaGrid {
  int J;
  double t0, h;
  std::vector<double> t, et, base;

  AlphaGrid(int J_, double t_hi) : J(J_), t0(-20.0), h(0.01) {
    std::size_t n = static_cast<std::size_t>(std::ceil((t_hi - t0) / h)) + 1;
    t.resize(n);
    et.resize(n);
    base.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = t0 + h * static_cast<double>(i);
      et[i] = std::exp(t[i]);
      base[i] = std::lgamma(et[i]) - std::lgamma(et[i] + J);
    }
  }
};

inline double grid_upper(double max_coef, double b) {
  // past the mode the -b*e^t term kills the integrand; pad generously
  return std::max(12.0, std::log((max_coef + 1.0) / b) + 10.0);
}

// log of int_0^inf alpha^(K+a-1) e^(-b alpha) Gamma(alpha)/Gamma(alpha+J)
// d alpha. Trapezoid on the grid plus an analytic left tail: below t0 the
// integrand is exp((K+a-1)t)/Gamma(J) to relative accuracy ~e^t0.
inline double log_alpha_integral(const AlphaGrid& g, int K, double a,
                                 double b, std::vector<double>& scratch) {
  const double c = K + a - 1.0;
  const std::size_t n = g.t.size();
  scratch.resize(n);
  double maxf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double f = (c + 1.0) * g.t[i] - b * g.et[i] + g.base[i];
    scratch[i] = f;
    if (f > maxf) maxf = f;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = std::exp(scratch[i] - maxf);
    sum += (i == 0 || i + 1 == n) ? 0.5 * e : e;
  }
  double log_numeric = maxf + std::log(sum * g.h);
  double log_tail =
      c * g.t0 - std::lgamma(static_cast<double>(g.J)) - std::log(c);
  return logaddexp(log_numeric, log_tail);
}

}  // namespace detail

// Pr(K | J, a, b): the cluster-count prior induced by a Gamma(a, b) prior
// on the concentration (Antoniak / Dorazio form). Raises QuadratureFailure
// if the raw probabilities do not sum to 1 within 1e-4.
inline ClusterPrior cluster_prior(int J, double a, double b,
                                  const std::vector<double>* ls1 = nullptr,
                                  const detail::AlphaGrid* grid = nullptr) {
  if (!(a > 0.0) || !(b > 0.0)) throw InputError("cluster_prior needs a,b > 0");
  std::vector<double> ls1_local;
  if (!ls1) {
    ls1_local = log_stirling1(J);
    ls1 = &ls1_local;
  }
  std::optional<detail::AlphaGrid> grid_local;
  if (!grid) {
    grid_local.emplace(J, detail::grid_upper(J + a, b));
    grid = &*grid_local;
  }
  ClusterPrior p;
  p.pmf.resize(static_cast<std::size_t>(J));
  std::vector<double> scratch;
  double lead = a * std::log(b) - std::lgamma(a);
  for (int k = 1; k <= J; ++k) {
    double li = detail::log_alpha_integral(*grid, k, a, b, scratch);
    p.pmf[k - 1] = std::exp(lead + (*ls1)[k - 1] + li);
  }
  double raw = 0.0;
  for (double v : p.pmf) raw += v;
  if (!(std::abs(raw - 1.0) <= 1e-4))
    throw QuadratureFailure("cluster-prior mass " + std::to_string(raw) +
                            " for (J,a,b)=(" + std::to_string(J) + "," +
                            std::to_string(a) + "," + std::to_string(b) + ")");
  for (double& v : p.pmf) v /= raw;
  return p;
}

// KL(target || induced) over K = 1..J; 0 log 0 = 0.
inline double kl_divergence(const ClusterPrior& target,
                            const ClusterPrior& induced) {
  if (target.pmf.size() != induced.pmf.size())
    throw LengthMismatch(target.pmf.size(), induced.pmf.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < target.pmf.size(); ++i) {
    if (target.pmf[i] == 0.0) continue;
    if (induced.pmf[i] <= 0.0) throw InfiniteDivergence();
    kl += target.pmf[i] * std::log(target.pmf[i] / induced.pmf[i]);
  }
  return kl;
}

// chi^2(df) density evaluated on the integer grid K = 1..J and
// renormalized. df may be fractional; the density is Gamma-based.
inline ClusterPrior chi2_target(int J, double df) {
  if (!(df >= 1.0)) throw InputError("chi2_target needs df >= 1");
  ClusterPrior p;
  p.pmf.resize(static_cast<std::size_t>(J));
  double half = df / 2.0;
  double lead = -half * std::log(2.0) - std::lgamma(half);
  double sum = 0.0;
  for (int k = 1; k <= J; ++k) {
    double lp = lead + (half - 1.0) * std::log(static_cast<double>(k)) -
                0.5 * static_cast<double>(k);
    p.pmf[k - 1] = std::exp(lp);
    sum += p.pmf[k - 1];
  }
  for (double& v : p.pmf) v /= sum;
  return p;
}

// DP-diffuse rule: E(alpha) = J/2 and Var(alpha) = 5J, i.e. b = 0.1 and
// a = J/20.
inline GammaHyper diffuse_hyper(int J) {
  if (J < 2) throw InputError("diffuse_hyper needs J >= 2");
  return {static_cast<double>(J) / 20.0, 0.1};
}

struct CalibrationResult {
  double a = 0.0;
  double b = 0.0;
  double kl = 0.0;
  ClusterPrior target;
  ClusterPrior induced;
};

// Coarse-to-fine grid search for the Gamma(a, b) whose induced
// cluster-count prior is KL-closest to chi^2(df), over a in [0.05, 20]
// and b in [0.05, 5] at final resolution 0.01. Deterministic; exact
// argmin with lexicographic (a, b) tie-break.
inline CalibrationResult calibrate_inform(int J, double df) {
  ClusterPrior target = chi2_target(J, df);
  auto ls1 = log_stirling1(J);
  detail::AlphaGrid grid(J, detail::grid_upper(J + 20.0, 0.05));

  constexpr double a_lo = 0.05, a_hi = 20.0, b_lo = 0.05, b_hi = 5.0;
  double best_a = a_lo, best_b = b_lo;
  double best_kl = std::numeric_limits<double>::infinity();
  ClusterPrior best_pmf;

  auto eval = [&](double a, double b) {
    auto induced = cluster_prior(J, a, b, &ls1, &grid);
    double kl = kl_divergence(target, induced);
    if (kl < best_kl ||
        (kl == best_kl && (a < best_a || (a == best_a && b < best_b)))) {
      best_kl = kl;
      best_a = a;
      best_b = b;
      best_pmf = std::move(induced);
    }
  };

  auto sweep = [&](double lo_a, double hi_a, double lo_b, double hi_b,
                   double step) {
    lo_a = std::max(lo_a, a_lo);
    hi_a = std::min(hi_a, a_hi);
    lo_b = std::max(lo_b, b_lo);
    hi_b = std::min(hi_b, b_hi);
    int na = static_cast<int>(std::round((hi_a - lo_a) / step));
    int nb = static_cast<int>(std::round((hi_b - lo_b) / step));
    for (int i = 0; i <= na; ++i) {
      double a = lo_a + step * i;
      for (int k = 0; k <= nb; ++k) eval(a, lo_b + step * k);
    }
  };

  sweep(a_lo, a_hi, b_lo, b_hi, 0.25);
  sweep(best_a - 0.30, best_a + 0.30, best_b - 0.30, best_b + 0.30, 0.05);
  sweep(best_a - 0.06, best_a + 0.06, best_b - 0.06, best_b + 0.06, 0.01);

  // snap to the 0.01 lattice to undo accumulated stepping error
  best_a = std::round(best_a * 100.0) / 100.0;
  best_b = std::round(best_b * 100.0) / 100.0;
  return {best_a, best_b, best_kl, std::move(target), std::move(best_pmf)};
}

// Mean of the induced cluster-count prior computed the other way round:
// E(K | alpha, J) averaged over the Gamma(a, b) prior. Cross-checks the
// pmf from cluster_prior.
inline double gamma_averaged_expected_clusters(int J, double a, double b) {
  detail::AlphaGrid grid(J, detail::grid_upper(a, b));
  double lead = a * std::log(b) - std::lgamma(a);
  const std::size_t n = grid.t.size();
  std::vector<double> f(n);
  double maxf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double ek = expected_clusters(grid.et[i], J);
    f[i] = lead + a * grid.t[i] - b * grid.et[i] + std::log(ek);
    maxf = std::max(maxf, f[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = std::exp(f[i] - maxf);
    sum += (i == 0 || i + 1 == n) ? 0.5 * e : e;
  }
  double numeric = std::exp(maxf) * sum * grid.h;
  // left tail: E(K | alpha -> 0) -> 1, density ~ b^a alpha^(a-1)/Gamma(a)
  double tail = std::exp(lead + a * grid.t0) / a;
  return numeric + tail;
}

}  // namespace mst
