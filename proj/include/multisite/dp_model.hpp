#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "multisite/draws.hpp"
#include "multisite/errors.hpp"
#include "multisite/gaussian_model.hpp"
#include "multisite/rng.hpp"
#include "multisite/site_data.hpp"

namespace mst {

// Gamma(a, b) hyperprior on the DP concentration (shape a, rate b).
struct DpConfig {
  double a = 2.5;
  double b = 0.1;
  McmcConfig mcmc;
  ModelKind label = ModelKind::DpDiffuse;  // provenance for draw files
  std::optional<double> fixed_alpha;       // clamp instead of sampling
  int aux_components = 3;                  // algorithm-8 auxiliaries

  void validate() const {
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("Gamma(a,b) needs a,b > 0");
    if (aux_components < 1) throw InputError("need at least 1 auxiliary");
    mcmc.validate();
  }
};

// Expected number of occupied clusters among J sites at concentration
// alpha: sum_{j=1..J} alpha/(alpha + j - 1).
inline double expected_clusters(double alpha, int J) {
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  if (J < 1) throw InputError("J must be at least 1");
  double e = 0.0;
  for (int j = 1; j <= J; ++j) e += alpha / (alpha + j - 1);
  return e;
}

// One pass of the sequential urn over J sites; returns the number of
// occupied clusters. Site j opens a new cluster with probability
// alpha/(alpha + j - 1).
inline int simulate_urn(double alpha, int J, Rng& rng) {
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  int k = 0;
  for (int j = 1; j <= J; ++j) {
    if (rng.uniform() < alpha / (alpha + j - 1)) ++k;
  }
  return k;
}

namespace detail {

inline double normal_logpdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

// Escobar-West auxiliary-variable update of the concentration given the
// current cluster count.
inline double update_alpha(double alpha, int k, int j, double a, double b,
                           Rng& rng) {
  double eta = rng.beta(alpha + 1.0, static_cast<double>(j));
  double rate = b - std::log(eta);
  double odds = (a + k - 1.0) / (static_cast<double>(j) * rate);
  double shape = (rng.uniform() < odds / (1.0 + odds)) ? a + k : a + k - 1.0;
  return rng.gamma(shape, rate);
}

}  // namespace detail

// Collapsed Gibbs sampler for the DP-mixture prior, with algorithm-8
// auxiliary components in the allocation step (weights handled in log
// space so tiny sampling variances cannot underflow the ratios). The base
// distribution is N(tau, sigma^2) with the Gaussian model's hyperpriors,
// updated against the occupied cluster locations; the concentration gets
// the Escobar-West auxiliary update against its Gamma(a, b) prior.
class DpSampler {
 public:
  DpSampler(const TrialDataset& d, const DpConfig& cfg) : cfg_(cfg) {
    validate_dataset(d);
    cfg_.validate();
    for (const auto& s : d.sites) {
      tau_hat_.push_back(s.tau_hat);
      se2_.push_back(s.se2);
    }
    const std::size_t j = tau_hat_.size();
    double m = 0.0;
    for (double t : tau_hat_) m += t;
    tau_ = m / static_cast<double>(j);
    double ss = 0.0;
    for (double t : tau_hat_) ss += (t - tau_) * (t - tau_);
    sigma_ = std::sqrt(ss / static_cast<double>(j - 1));
    if (!(sigma_ > 0.0)) sigma_ = 0.1;
    alpha_ = cfg_.fixed_alpha ? *cfg_.fixed_alpha : cfg_.a / cfg_.b;
    loc_ = {tau_};  // everyone starts in one shared cluster
    count_ = {static_cast<int>(j)};
    alloc_.assign(j, 0);
  }

  void scan(Rng& rng) {
    update_allocations(rng);
    update_locations(rng);
    tau_ = detail::update_hyper_tau(loc_, sigma_, rng);
    sigma_ = detail::update_hyper_sigma(loc_, tau_, sigma_, rng);
    if (!cfg_.fixed_alpha) {
      alpha_ = detail::update_alpha(alpha_, k(), num_sites(), cfg_.a, cfg_.b,
                                    rng);
    }
  }

  void set_observations(const std::vector<double>& tau_hat) {
    if (tau_hat.size() != tau_hat_.size())
      throw LengthMismatch(tau_hat.size(), tau_hat_.size());
    tau_hat_ = tau_hat;
  }

  int num_sites() const { return static_cast<int>(tau_hat_.size()); }
  int k() const { return static_cast<int>(loc_.size()); }
  double alpha() const { return alpha_; }
  double hyper_tau() const { return tau_; }
  double hyper_sigma() const { return sigma_; }
  double site_effect(std::size_t j) const { return loc_[alloc_[j]]; }
  const std::vector<int>& cluster_sizes() const { return count_; }
  const std::vector<std::size_t>& allocations() const { return alloc_; }

  bool finite() const {
    if (!std::isfinite(tau_) || !std::isfinite(sigma_) || !(sigma_ > 0.0))
      return false;
    if (!std::isfinite(alpha_) || !(alpha_ > 0.0)) return false;
    for (double v : loc_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  void update_allocations(Rng& rng) {
    const std::size_t j_n = tau_hat_.size();
    const int m = cfg_.aux_components;
    const double logm = std::log(static_cast<double>(m));
    for (std::size_t i = 0; i < j_n; ++i) {
      std::size_t c = alloc_[i];
      bool emptied = (--count_[c] == 0);
      double orphan = loc_[c];
      if (emptied) {
        // swap-remove; redirect sites pointing at the moved last cluster
        std::size_t last = loc_.size() - 1;
        loc_[c] = loc_[last];
        count_[c] = count_[last];
        loc_.pop_back();
        count_.pop_back();
        if (c != last) {
          for (auto& a : alloc_)
            if (a == last) a = c;
        }
      }
      const std::size_t k_cur = loc_.size();
      aux_.clear();
      for (int t = 0; t < m; ++t) {
        aux_.push_back((emptied && t == 0) ? orphan
                                           : rng.normal(tau_, sigma_));
      }
      logw_.clear();
      double x = tau_hat_[i];
      double se2 = se2_[i];
      double maxw = -std::numeric_limits<double>::infinity();
      for (std::size_t c2 = 0; c2 < k_cur; ++c2) {
        double lw = std::log(static_cast<double>(count_[c2])) +
                    detail::normal_logpdf(x, loc_[c2], se2);
        logw_.push_back(lw);
        maxw = std::max(maxw, lw);
      }
      for (int t = 0; t < m; ++t) {
        double lw = std::log(alpha_) - logm +
                    detail::normal_logpdf(x, aux_[static_cast<std::size_t>(t)],
                                          se2);
        logw_.push_back(lw);
        maxw = std::max(maxw, lw);
      }
      w_.clear();
      double total = 0.0;
      for (double lw : logw_) {
        double e = std::exp(lw - maxw);
        w_.push_back(e);
        total += e;
      }
      std::size_t pick = rng.categorical(w_, total);
      if (pick < k_cur) {
        alloc_[i] = pick;
        ++count_[pick];
      } else {
        loc_.push_back(aux_[pick - k_cur]);
        count_.push_back(1);
        alloc_[i] = loc_.size() - 1;
      }
    }
  }

  void update_locations(Rng& rng) {
    double sigma2 = sigma_ * sigma_;
    sum_prec_.assign(loc_.size(), 1.0 / sigma2);
    sum_mean_.assign(loc_.size(), tau_ / sigma2);
    for (std::size_t i = 0; i < tau_hat_.size(); ++i) {
      sum_prec_[alloc_[i]] += 1.0 / se2_[i];
      sum_mean_[alloc_[i]] += tau_hat_[i] / se2_[i];
    }
    for (std::size_t c = 0; c < loc_.size(); ++c)
      loc_[c] = rng.normal(sum_mean_[c] / sum_prec_[c],
                           std::sqrt(1.0 / sum_prec_[c]));
  }

  DpConfig cfg_;
  std::vector<double> tau_hat_, se2_;
  std::vector<double> loc_;
  std::vector<int> count_;
  std::vector<std::size_t> alloc_;
  double tau_ = 0.0, sigma_ = 0.1, alpha_ = 1.0;
  std::vector<double> aux_, logw_, w_, sum_prec_, sum_mean_;
};

inline DrawMatrix fit_dp(const TrialDataset& d, const DpConfig& cfg) {
  DpSampler sampler(d, cfg);
  Rng rng(cfg.mcmc.seed);

  DrawMatrix out;
  out.model = cfg.label;
  out.site_ids = d.site_ids();
  out.num_draws = cfg.mcmc.draws_kept;
  const std::size_t j = d.num_sites();
  out.tau.reserve(cfg.mcmc.draws_kept * j);

  const std::size_t total =
      cfg.mcmc.burn_in + cfg.mcmc.draws_kept * cfg.mcmc.thin;
  for (std::size_t iter = 0; iter < total; ++iter) {
    sampler.scan(rng);
    if (!sampler.finite()) throw ChainDiverged(iter);
    if (iter >= cfg.mcmc.burn_in &&
        (iter - cfg.mcmc.burn_in) % cfg.mcmc.thin == 0) {
      for (std::size_t i = 0; i < j; ++i)
        out.tau.push_back(sampler.site_effect(i));
      out.hyper_tau.push_back(sampler.hyper_tau());
      out.hyper_sigma.push_back(sampler.hyper_sigma());
      out.alpha.push_back(sampler.alpha());
      out.k.push_back(sampler.k());
    }
  }
  return out;
}

}  // namespace mst
