#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "multisite/draws.hpp"
#include "multisite/errors.hpp"
#include "multisite/rng.hpp"
#include "multisite/site_data.hpp"

namespace mst {

struct McmcConfig {
  std::size_t draws_kept = 4000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (draws_kept < 1) throw InputError("draws_kept must be positive");
    if (thin < 1) throw InputError("thin must be positive");
  }
};

// Hyperpriors shared by the Gaussian model and the DP base distribution:
// grand mean tau ~ N(0, 100), cross-site SD sigma ~ half-Cauchy(0, 5).
inline constexpr double kTauPriorVar = 100.0;
inline constexpr double kSigmaCauchyScale = 5.0;

// Closed-form conditional posterior of one site effect given the
// hyperparameters: the shrinkage mean and its variance.
//   tau* = tau + (tau_hat - tau) * sigma2/(sigma2 + se2)
//   V    = 1 / (1/sigma2 + 1/se2)
inline std::pair<double, double> conditional_posterior_moments(
    double tau_hat, double se2, double tau, double sigma2) {
  if (!(se2 > 0.0)) throw InputError("se2 must be positive");
  if (!(sigma2 >= 0.0)) throw InputError("sigma2 must be non-negative");
  if (sigma2 == 0.0) return {tau, 0.0};
  double shrink = sigma2 / (sigma2 + se2);
  double tau_star = tau + (tau_hat - tau) * shrink;
  double v = 1.0 / (1.0 / sigma2 + 1.0 / se2);
  return {tau_star, v};
}

namespace detail {

// Univariate slice sampler with stepping-out (width w, unlimited
// expansion), constrained to x > lo.
template <class LogDensity>
double slice_sample(const LogDensity& logf, double x0, double w, double lo,
                    Rng& rng) {
  double fx0 = logf(x0);
  double logy = fx0 - rng.exponential();
  double left = x0 - w * rng.uniform();
  double right = left + w;
  if (left < lo) left = lo;
  while (left > lo && logf(left) > logy) {
    left -= w;
    if (left < lo) left = lo;
  }
  while (logf(right) > logy) right += w;
  for (;;) {
    double x = rng.uniform(left, right);
    if (logf(x) > logy) return x;
    if (x < x0)
      left = x;
    else
      right = x;
  }
}

// Conjugate update of the grand mean given values ~ N(tau, sigma^2) iid.
inline double update_hyper_tau(const std::vector<double>& values,
                               double sigma, Rng& rng) {
  double sigma2 = sigma * sigma;
  double prec = static_cast<double>(values.size()) / sigma2 +
                1.0 / kTauPriorVar;
  double sum = 0.0;
  for (double v : values) sum += v;
  double mean = (sum / sigma2) / prec;
  return rng.normal(mean, std::sqrt(1.0 / prec));
}

// Slice update of sigma on its half-Cauchy-prior full conditional given
// values ~ N(tau, sigma^2) iid. Sampled on log sigma (Jacobian included)
// so the stepping-out interval covers scale changes in O(1) expansions
// wherever the heavy Cauchy tail sends the chain.
inline double update_hyper_sigma(const std::vector<double>& values,
                                 double tau, double sigma_cur, Rng& rng) {
  double ss = 0.0;
  for (double v : values) ss += (v - tau) * (v - tau);
  double n = static_cast<double>(values.size());
  auto logf = [&](double t) {
    double s2 = std::exp(2.0 * t);
    return (1.0 - n) * t - ss / (2.0 * s2) -
           std::log1p(s2 / (kSigmaCauchyScale * kSigmaCauchyScale));
  };
  double t = slice_sample(logf, std::log(sigma_cur), 1.0,
                          -std::numeric_limits<double>::infinity(), rng);
  return std::exp(t);
}

}  // namespace detail

struct GaussianFitOptions {
  // Clamp the hyperparameters instead of sampling them (closed-form
  // checks and prior-sensitivity experiments).
  std::optional<double> fixed_tau;
  std::optional<double> fixed_sigma;
};

// Gibbs sampler state for the two-stage normal hierarchy. One scan
// updates the site effects from their closed-form normal conditionals,
// the grand mean from its conjugate normal, and sigma by slice sampling.
class GaussianSampler {
 public:
  GaussianSampler(const TrialDataset& d, GaussianFitOptions opts = {})
      : opts_(opts) {
    validate_dataset(d);
    for (const auto& s : d.sites) {
      tau_hat_.push_back(s.tau_hat);
      se2_.push_back(s.se2);
    }
    site_ = tau_hat_;
    double m = 0.0;
    for (double t : tau_hat_) m += t;
    tau_ = m / static_cast<double>(tau_hat_.size());
    double ss = 0.0;
    for (double t : tau_hat_) ss += (t - tau_) * (t - tau_);
    sigma_ = std::sqrt(ss / static_cast<double>(tau_hat_.size() - 1));
    if (!(sigma_ > 0.0)) sigma_ = 0.1;
    if (opts_.fixed_tau) tau_ = *opts_.fixed_tau;
    if (opts_.fixed_sigma) sigma_ = *opts_.fixed_sigma;
  }

  void scan(Rng& rng) {
    double sigma2 = sigma_ * sigma_;
    for (std::size_t i = 0; i < site_.size(); ++i) {
      auto [m, v] =
          conditional_posterior_moments(tau_hat_[i], se2_[i], tau_, sigma2);
      site_[i] = rng.normal(m, std::sqrt(v));
    }
    if (!opts_.fixed_tau) tau_ = detail::update_hyper_tau(site_, sigma_, rng);
    if (!opts_.fixed_sigma)
      sigma_ = detail::update_hyper_sigma(site_, tau_, sigma_, rng);
  }

  // Replace the observed effects in place (keeps the sampling variances);
  // used by simulator-consistency checks that redraw data each step.
  void set_observations(const std::vector<double>& tau_hat) {
    if (tau_hat.size() != tau_hat_.size())
      throw LengthMismatch(tau_hat.size(), tau_hat_.size());
    tau_hat_ = tau_hat;
  }

  bool finite() const {
    if (!std::isfinite(tau_) || !std::isfinite(sigma_) || !(sigma_ > 0.0))
      return false;
    for (double v : site_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  const std::vector<double>& site_effects() const { return site_; }
  const std::vector<double>& se2() const { return se2_; }
  double hyper_tau() const { return tau_; }
  double hyper_sigma() const { return sigma_; }

 private:
  GaussianFitOptions opts_;
  std::vector<double> tau_hat_, se2_;
  std::vector<double> site_;
  double tau_ = 0.0;
  double sigma_ = 0.1;
};

inline DrawMatrix fit_gaussian(const TrialDataset& d, const McmcConfig& cfg,
                               const GaussianFitOptions& opts = {}) {
  cfg.validate();
  GaussianSampler sampler(d, opts);
  Rng rng(cfg.seed);

  DrawMatrix out;
  out.model = ModelKind::Gaussian;
  out.site_ids = d.site_ids();
  out.num_draws = cfg.draws_kept;
  out.tau.reserve(cfg.draws_kept * d.num_sites());

  const std::size_t total = cfg.burn_in + cfg.draws_kept * cfg.thin;
  for (std::size_t iter = 0; iter < total; ++iter) {
    sampler.scan(rng);
    if (!sampler.finite()) throw ChainDiverged(iter);
    if (iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0) {
      const auto& site = sampler.site_effects();
      out.tau.insert(out.tau.end(), site.begin(), site.end());
      out.hyper_tau.push_back(sampler.hyper_tau());
      out.hyper_sigma.push_back(sampler.hyper_sigma());
    }
  }
  return out;
}

}  // namespace mst
