#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "multisite/errors.hpp"
#include "multisite/rng.hpp"
#include "multisite/site_data.hpp"

namespace mst {

enum class GShape { Gaussian, GaussianMixture, AsymmetricLaplace };

inline std::string to_string(GShape g) {
  switch (g) {
    case GShape::Gaussian: return "gaussian";
    case GShape::GaussianMixture: return "gaussian-mixture";
    case GShape::AsymmetricLaplace: return "asymmetric-laplace";
  }
  return "?";
}

inline GShape parse_gshape(const std::string& s) {
  if (s == "gaussian") return GShape::Gaussian;
  if (s == "gaussian-mixture" || s == "mixture")
    return GShape::GaussianMixture;
  if (s == "asymmetric-laplace" || s == "al")
    return GShape::AsymmetricLaplace;
  throw UnknownShape(s);
}

// Two-component Gaussian mixture, normalized so the mixture has mean 0
// and variance 1 before the sigma rescale. delta is the gap between the
// component means and u the variance ratio of component 2 to component 1.
struct MixtureSpec {
  double w = 0.5;
  double delta = 3.0;
  double u = 1.0;

  double normalizer() const {
    return std::sqrt(w + (1.0 - w) * u + w * (1.0 - w) * delta * delta);
  }
};

// Asymmetric Laplace with location/scale solved so that mean = 0 and
// variance = 1 for the given skewness rho. rho < 1 puts the long tail on
// the right.
struct ALSpec {
  double rho = 0.1;

  double scale() const {
    return std::sqrt(2.0 * rho * rho / (1.0 + std::pow(rho, 4)));
  }
  double location() const {
    return -scale() * (1.0 - rho * rho) / (std::numbers::sqrt2 * rho);
  }
};

// One cell of the simulation design.
struct Scenario {
  std::string id;  // empty -> canonical id derived from the factors
  int J = 50;
  double n_bar = 80.0;
  double cv = 0.0;
  double sigma = 0.15;
  GShape g_shape = GShape::Gaussian;
  MixtureSpec mixture;
  ALSpec al;
  std::uint64_t seed = 0;

  std::string canonical_id() const {
    if (!id.empty()) return id;
    std::ostringstream os;
    os << "J" << J << "_n" << n_bar << "_cv" << cv << "_sg" << sigma << "_"
       << to_string(g_shape);
    return os.str();
  }
};

struct GeneratedDataset {
  TrialDataset data;
  std::vector<double> tau_true;
  std::vector<int> n_j;
};

// Site sizes: equal when cv = 0, otherwise gamma with mean n_bar and SD
// n_bar*cv, rounded to the nearest integer and floored at 5.
inline std::vector<int> draw_site_sizes(int J, double n_bar, double cv,
                                        Rng& rng) {
  if (!(n_bar >= 5.0)) throw InputError("n_bar must be at least 5");
  if (cv < 0.0) throw InputError("cv must be non-negative");
  std::vector<int> sizes(static_cast<std::size_t>(J));
  if (cv == 0.0) {
    std::fill(sizes.begin(), sizes.end(),
              static_cast<int>(std::lround(n_bar)));
    return sizes;
  }
  double shape = 1.0 / (cv * cv);
  double rate = shape / n_bar;  // mean = shape/rate = n_bar
  for (auto& n : sizes) {
    n = std::max(5, static_cast<int>(std::lround(rng.gamma(shape, rate))));
  }
  return sizes;
}

// J draws from the requested cross-site shape, rescaled to SD sigma.
// Every shape has mean 0 and variance 1 before the rescale.
inline std::vector<double> sample_true_effects(int J, GShape shape,
                                               double sigma, Rng& rng,
                                               const MixtureSpec& mix = {},
                                               const ALSpec& al = {}) {
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  std::vector<double> tau(static_cast<std::size_t>(J));
  switch (shape) {
    case GShape::Gaussian:
      for (auto& t : tau) t = sigma * rng.normal();
      break;
    case GShape::GaussianMixture: {
      double c = mix.normalizer();
      double m1 = -(1.0 - mix.w) * mix.delta / c;
      double m2 = mix.w * mix.delta / c;
      double sd1 = 1.0 / c;
      double sd2 = std::sqrt(mix.u) / c;
      for (auto& t : tau) {
        t = (rng.uniform() < mix.w) ? rng.normal(m1, sd1)
                                    : rng.normal(m2, sd2);
        t *= sigma;
      }
      break;
    }
    case GShape::AsymmetricLaplace: {
      double psi = al.scale();
      double mu = al.location();
      for (auto& t : tau) {
        double e1 = rng.exponential();
        double e2 = rng.exponential();
        t = mu + psi / std::numbers::sqrt2 * (e1 / al.rho - e2 * al.rho);
        t *= sigma;
      }
      break;
    }
  }
  return tau;
}

// Full data-generating process for one replication: site sizes, sampling
// variances se2_j = 4/n_j, true effects, and noisy observed effects
// tau_hat_j ~ N(tau_j, se2_j).
inline GeneratedDataset generate(const Scenario& sc, Rng& rng) {
  GeneratedDataset g;
  g.n_j = draw_site_sizes(sc.J, sc.n_bar, sc.cv, rng);
  g.tau_true =
      sample_true_effects(sc.J, sc.g_shape, sc.sigma, rng, sc.mixture, sc.al);
  g.data.sites.reserve(g.n_j.size());
  for (std::size_t j = 0; j < g.n_j.size(); ++j) {
    double se2 = 4.0 / static_cast<double>(g.n_j[j]);
    double obs = rng.normal(g.tau_true[j], std::sqrt(se2));
    g.data.sites.push_back({"s" + std::to_string(j + 1), obs, se2});
  }
  return g;
}

inline GeneratedDataset generate(const Scenario& sc) {
  Rng rng(sc.seed);
  return generate(sc, rng);
}

inline void write_truth_csv(std::ostream& out, const GeneratedDataset& g) {
  csv::Writer w(out);
  w.row("site_id", "tau_true", "n_j");
  for (std::size_t j = 0; j < g.tau_true.size(); ++j)
    w.row(g.data.sites[j].site_id, g.tau_true[j],
          static_cast<long long>(g.n_j[j]));
}

struct TruthVector {
  std::vector<std::string> site_ids;
  std::vector<double> tau_true;
};

inline TruthVector read_truth_csv(const std::string& path) {
  auto t = csv::read_file(path);
  auto ci = t.col("site_id"), cv_ = t.col("tau_true");
  TruthVector tv;
  for (const auto& r : t.rows) {
    tv.site_ids.push_back(r[ci]);
    tv.tau_true.push_back(csv::to_double(r[cv_]));
  }
  return tv;
}

}  // namespace mst
