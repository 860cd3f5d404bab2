#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "multisite/errors.hpp"

namespace mst {

// One simulation factor: name plus its level set, reference level first.
struct FactorSpec {
  std::string name;
  std::vector<std::string> levels;

  int level_index(const std::string& level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] == level) return static_cast<int>(i);
    throw UnknownLevel(name + "=" + level);
  }
};

// One meta-model observation: factor levels (parallel to the factor
// list), the log-loss outcome, and the dataset identifier used for
// clustering.
struct MetaRow {
  std::vector<std::string> levels;
  double y = 0.0;
  std::string cluster_id;
};

struct MetaDesign {
  std::vector<FactorSpec> factors;
  std::vector<std::string> col_names;  // col 0 is the intercept
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> cluster_ids;
};

struct MetaFit {
  std::vector<FactorSpec> factors;
  std::vector<std::string> col_names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;  // CR1 cluster-robust
  std::size_t n_rows = 0;
  std::size_t n_clusters = 0;
};

struct Prediction {
  double point = 0.0;  // on the log-outcome scale
  double lo = 0.0;
  double hi = 0.0;
  double mult_change = 1.0;  // exp(point - reference prediction)
};

namespace detail {

// Treatment-coded row: intercept, main-effect dummies per factor, then
// all two-way interaction products in (factor_i < factor_j) order.
inline Eigen::RowVectorXd encode_row(const std::vector<FactorSpec>& factors,
                                     const std::vector<std::string>& levels,
                                     std::vector<std::string>* names) {
  if (levels.size() != factors.size())
    throw LengthMismatch(levels.size(), factors.size());
  std::vector<double> main;  // concatenated dummies, no intercept
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::vector<std::string> main_names;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    int idx = factors[f].level_index(levels[f]);
    std::size_t start = main.size();
    for (std::size_t l = 1; l < factors[f].levels.size(); ++l) {
      main.push_back(idx == static_cast<int>(l) ? 1.0 : 0.0);
      if (names)
        main_names.push_back(factors[f].name + "=" + factors[f].levels[l]);
    }
    spans.emplace_back(start, main.size());
  }
  std::vector<double> row;
  row.push_back(1.0);
  if (names) names->push_back("(intercept)");
  row.insert(row.end(), main.begin(), main.end());
  if (names) names->insert(names->end(), main_names.begin(), main_names.end());
  for (std::size_t f1 = 0; f1 < factors.size(); ++f1)
    for (std::size_t f2 = f1 + 1; f2 < factors.size(); ++f2)
      for (std::size_t i = spans[f1].first; i < spans[f1].second; ++i)
        for (std::size_t k = spans[f2].first; k < spans[f2].second; ++k) {
          row.push_back(main[i] * main[k]);
          if (names)
            names->push_back(main_names[i - 0] + ":" + main_names[k - 0]);
        }
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = row[i];
  return out;
}

}  // namespace detail

// Derives factor level sets from the observed rows. Reference levels are
// taken from the given map when observed, otherwise the lexicographically
// (numeric-aware) smallest observed level is used. Remaining levels keep
// numeric-aware ascending order.
inline std::vector<FactorSpec> infer_factors(
    const std::vector<std::string>& names,
    const std::vector<MetaRow>& rows,
    const std::map<std::string, std::string>& reference) {
  auto numeric_less = [](const std::string& a, const std::string& b) {
    try {
      std::size_t pa = 0, pb = 0;
      double va = std::stod(a, &pa), vb = std::stod(b, &pb);
      if (pa == a.size() && pb == b.size()) return va < vb;
    } catch (...) {
    }
    return a < b;
  };
  std::vector<FactorSpec> factors;
  for (std::size_t f = 0; f < names.size(); ++f) {
    std::set<std::string> seen;
    for (const auto& r : rows) {
      if (r.levels.size() != names.size())
        throw LengthMismatch(r.levels.size(), names.size());
      seen.insert(r.levels[f]);
    }
    std::vector<std::string> levels(seen.begin(), seen.end());
    std::sort(levels.begin(), levels.end(), numeric_less);
    auto ref = reference.find(names[f]);
    if (ref != reference.end()) {
      auto it = std::find(levels.begin(), levels.end(), ref->second);
      if (it != levels.end()) std::rotate(levels.begin(), it, it + 1);
    }
    factors.push_back({names[f], std::move(levels)});
  }
  return factors;
}

// Assembles the treatment-coded design with all two-way interactions and
// verifies it has full column rank.
inline MetaDesign build_design(const std::vector<FactorSpec>& factors,
                               const std::vector<MetaRow>& rows) {
  if (rows.empty()) throw InputError("no meta-model rows");
  MetaDesign d;
  d.factors = factors;
  Eigen::RowVectorXd first =
      detail::encode_row(factors, rows[0].levels, &d.col_names);
  d.x.resize(static_cast<Eigen::Index>(rows.size()), first.cols());
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  d.x.row(0) = first;
  d.y(0) = rows[0].y;
  d.cluster_ids.reserve(rows.size());
  d.cluster_ids.push_back(rows[0].cluster_id);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    d.x.row(static_cast<Eigen::Index>(i)) =
        detail::encode_row(factors, rows[i].levels, nullptr);
    d.y(static_cast<Eigen::Index>(i)) = rows[i].y;
    d.cluster_ids.push_back(rows[i].cluster_id);
  }
  if (d.x.rows() < d.x.cols())
    throw RankDeficient("fewer rows than design columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.x);
  if (qr.rank() < d.x.cols())
    throw RankDeficient("design has rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(d.x.cols()) + " columns");
  return d;
}

// OLS via QR with the CR1 clustered sandwich:
//   vcov = c (X'X)^-1 [sum_g X_g' e_g e_g' X_g] (X'X)^-1,
//   c = G/(G-1) * (N-1)/(N-K).
inline MetaFit fit_ols_crse(const MetaDesign& d) {
  const Eigen::Index n = d.x.rows(), k = d.x.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.x);
  if (qr.rank() < k) throw RankDeficient("design is rank deficient");
  MetaFit fit;
  fit.factors = d.factors;
  fit.col_names = d.col_names;
  fit.beta = qr.solve(d.y);
  fit.n_rows = static_cast<std::size_t>(n);

  Eigen::VectorXd resid = d.y - d.x * fit.beta;
  std::map<std::string, Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, fresh] = scores.try_emplace(d.cluster_ids[i],
                                          Eigen::VectorXd::Zero(k));
    it->second += d.x.row(i).transpose() * resid(i);
  }
  fit.n_clusters = scores.size();
  if (fit.n_clusters < 2) throw InputError("need at least 2 clusters");

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, s] : scores) meat += s * s.transpose();

  Eigen::MatrixXd xtx = d.x.transpose() * d.x;
  Eigen::MatrixXd bread = xtx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  double g = static_cast<double>(fit.n_clusters);
  double c = (g / (g - 1.0)) * (static_cast<double>(n - 1) /
                                static_cast<double>(n - k));
  fit.vcov = c * bread * meat * bread;
  fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose()).eval();
  if (!fit.vcov.allFinite()) throw SingularSandwich();
  return fit;
}

// Point and 95% interval for the log outcome at one factor setting, plus
// the multiplicative change relative to the all-reference setting.
inline Prediction predict(const MetaFit& fit,
                          const std::vector<std::string>& levels) {
  Eigen::RowVectorXd x = detail::encode_row(fit.factors, levels, nullptr);
  if (x.cols() != fit.beta.size())
    throw LengthMismatch(static_cast<std::size_t>(x.cols()),
                         static_cast<std::size_t>(fit.beta.size()));
  Prediction p;
  p.point = x * fit.beta;
  double var = x * fit.vcov * x.transpose();
  double se = std::sqrt(std::max(0.0, var));
  p.lo = p.point - 1.96 * se;
  p.hi = p.point + 1.96 * se;
  p.mult_change = std::exp(p.point - fit.beta(0));
  return p;
}

}  // namespace mst
