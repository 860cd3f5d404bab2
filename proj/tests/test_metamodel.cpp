#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "multisite/metamodel.hpp"
#include "multisite/rng.hpp"
#include "oracles.hpp"

using namespace mst;

namespace {

std::vector<MetaRow> full_factorial(const std::vector<FactorSpec>& factors,
                                    int copies, Rng* rng = nullptr) {
  std::vector<MetaRow> rows;
  std::vector<std::size_t> idx(factors.size(), 0);
  for (;;) {
    for (int c = 0; c < copies; ++c) {
      MetaRow r;
      for (std::size_t f = 0; f < factors.size(); ++f)
        r.levels.push_back(factors[f].levels[idx[f]]);
      r.y = rng ? rng->normal() : 0.0;
      r.cluster_id = "c" + std::to_string(rows.size() / 2);
      rows.push_back(std::move(r));
    }
    std::size_t f = 0;
    while (f < factors.size() && ++idx[f] == factors[f].levels.size()) {
      idx[f] = 0;
      ++f;
    }
    if (f == factors.size()) break;
  }
  return rows;
}

}  // namespace

TEST_CASE("build_design column counts") {
  // single factor, two levels: intercept + one dummy
  std::vector<FactorSpec> one{{"f", {"a", "b"}}};
  auto rows1 = full_factorial(one, 2);
  auto d1 = build_design(one, rows1);
  REQUIRE(d1.col_names.size() == 2);

  // two 2-level factors: intercept + 2 dummies + 1 interaction
  std::vector<FactorSpec> two{{"f", {"a", "b"}}, {"g", {"x", "y"}}};
  auto rows2 = full_factorial(two, 2);
  auto d2 = build_design(two, rows2);
  REQUIRE(d2.col_names.size() == 4);
}

TEST_CASE("build_design matches the combinatorial column formula on the paper design") {
  std::vector<FactorSpec> factors{
      {"J", {"25", "50", "75", "100", "300"}},
      {"n_bar", {"10", "20", "40", "80", "160"}},
      {"cv", {"0", "0.25", "0.5", "0.75"}},
      {"sigma", {"0.05", "0.1", "0.15", "0.2", "0.25"}},
      {"model", {"gaussian", "dp-diffuse", "dp-inform"}},
      {"method", {"pm", "cb", "gr"}}};
  std::size_t mains = 0, inters = 0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    mains += factors[i].levels.size() - 1;
    for (std::size_t j = i + 1; j < factors.size(); ++j)
      inters += (factors[i].levels.size() - 1) * (factors[j].levels.size() - 1);
  }
  auto rows = full_factorial(factors, 1);
  auto d = build_design(factors, rows);
  REQUIRE(d.col_names.size() == 1 + mains + inters);
  REQUIRE(d.col_names.size() == 168);
  REQUIRE(static_cast<std::size_t>(d.x.cols()) == 1 + mains + inters);
}

TEST_CASE("build_design rejects collinear designs") {
  // second factor is a copy of the first, so its dummy duplicates a column
  std::vector<MetaRow> rows;
  for (int i = 0; i < 12; ++i) {
    MetaRow r;
    std::string level = (i % 2) ? "hi" : "lo";
    r.levels = {level, level};
    r.y = i;
    r.cluster_id = "c" + std::to_string(i % 4);
    rows.push_back(r);
  }
  std::vector<FactorSpec> factors{{"f", {"lo", "hi"}}, {"g", {"lo", "hi"}}};
  REQUIRE_THROWS_AS(build_design(factors, rows), RankDeficient);
}

TEST_CASE("fit_ols_crse coefficients match the normal equations") {
  Rng rng(31);
  std::vector<FactorSpec> factors{{"f", {"a", "b", "c"}}, {"g", {"x", "y"}}};
  auto rows = full_factorial(factors, 4, &rng);
  auto d = build_design(factors, rows);
  auto fit = fit_ols_crse(d);
  auto beta0 = oracle::ols_normal_equations(d.x, d.y);
  for (Eigen::Index i = 0; i < fit.beta.size(); ++i)
    REQUIRE_THAT(fit.beta(i), Catch::Matchers::WithinAbs(beta0(i), 1e-8));
}

TEST_CASE("OLS residuals are orthogonal to the design") {
  Rng rng(37);
  std::vector<FactorSpec> factors{{"f", {"a", "b", "c", "d"}},
                                  {"g", {"x", "y", "z"}}};
  auto rows = full_factorial(factors, 3, &rng);
  auto d = build_design(factors, rows);
  auto fit = fit_ols_crse(d);
  Eigen::VectorXd resid = d.y - d.x * fit.beta;
  Eigen::VectorXd xtres = d.x.transpose() * resid;
  for (Eigen::Index i = 0; i < xtres.size(); ++i)
    REQUIRE_THAT(xtres(i), Catch::Matchers::WithinAbs(0.0, 1e-8));
}

TEST_CASE("CR1 with one observation per cluster reduces to HC1") {
  Rng rng(41);
  std::vector<FactorSpec> factors{{"f", {"a", "b", "c"}}};
  auto rows = full_factorial(factors, 5, &rng);
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i].cluster_id = "u" + std::to_string(i);  // singleton clusters
  auto d = build_design(factors, rows);
  auto fit = fit_ols_crse(d);

  // HC1 by hand
  Eigen::Index n = d.x.rows(), k = d.x.cols();
  Eigen::VectorXd resid = d.y - d.x * fit.beta;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i)
    meat += resid(i) * resid(i) * d.x.row(i).transpose() * d.x.row(i);
  Eigen::MatrixXd bread = (d.x.transpose() * d.x).inverse();
  Eigen::MatrixXd hc1 = (static_cast<double>(n) / static_cast<double>(n - k)) *
                        bread * meat * bread;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      REQUIRE_THAT(fit.vcov(i, j),
                   Catch::Matchers::WithinAbs(hc1(i, j), 1e-10));
}

TEST_CASE("CR1 vcov is invariant to cluster relabeling") {
  Rng rng(43);
  std::vector<FactorSpec> factors{{"f", {"a", "b", "c"}}, {"g", {"x", "y"}}};
  auto rows = full_factorial(factors, 6, &rng);
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i].cluster_id = "g" + std::to_string(i % 9);
  auto fit1 = fit_ols_crse(build_design(factors, rows));
  for (auto& r : rows) r.cluster_id = "relabeled_" + r.cluster_id;
  auto fit2 = fit_ols_crse(build_design(factors, rows));
  REQUIRE(fit1.vcov.isApprox(fit2.vcov, 1e-12));
}

TEST_CASE("planted coefficients are recovered within 3 robust SEs") {
  Rng rng(47);
  std::vector<FactorSpec> factors{{"f", {"a", "b", "c"}}, {"g", {"x", "y"}}};
  int within = 0, total = 0;
  for (int rep = 0; rep < 20; ++rep) {
    auto rows = full_factorial(factors, 34, &rng);  // 204 rows
    auto d0 = build_design(factors, rows);
    Eigen::VectorXd beta_true(d0.x.cols());
    for (Eigen::Index i = 0; i < beta_true.size(); ++i)
      beta_true(i) = rng.normal(0.0, 1.0);
    // cluster structure: 2 rows per cluster, shared noise
    for (std::size_t i = 0; i < rows.size(); i += 2) {
      double shared = rng.normal(0.0, 0.7);
      for (std::size_t k = i; k < std::min(i + 2, rows.size()); ++k) {
        Eigen::RowVectorXd x = d0.x.row(static_cast<Eigen::Index>(k));
        rows[k].y = x * beta_true + shared + rng.normal(0.0, 0.3);
        rows[k].cluster_id = "c" + std::to_string(i / 2);
      }
    }
    auto d = build_design(factors, rows);
    auto fit = fit_ols_crse(d);
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i) {
      double se = std::sqrt(fit.vcov(i, i));
      if (std::abs(fit.beta(i) - beta_true(i)) <= 3.0 * se) ++within;
      ++total;
    }
  }
  REQUIRE(within >= static_cast<int>(0.95 * total));
}

TEST_CASE("predict: reference setting, intervals, and known-beta changes") {
  Rng rng(53);
  std::vector<FactorSpec> factors{{"f", {"a", "b", "c"}}, {"g", {"x", "y"}}};
  auto rows = full_factorial(factors, 10, &rng);
  auto d = build_design(factors, rows);
  auto fit = fit_ols_crse(d);

  auto ref = predict(fit, {"a", "x"});
  REQUIRE(ref.mult_change == 1.0);  // exp(beta0 - beta0) exactly
  REQUIRE(ref.lo <= ref.point);
  REQUIRE(ref.point <= ref.hi);

  auto other = predict(fit, {"b", "y"});
  // exp(delta x' beta) against hand-built delta
  Eigen::RowVectorXd xs = detail::encode_row(factors, {"b", "y"}, nullptr);
  Eigen::RowVectorXd xr = detail::encode_row(factors, {"a", "x"}, nullptr);
  double expected = std::exp((xs - xr) * fit.beta);
  REQUIRE_THAT(other.mult_change,
               Catch::Matchers::WithinRel(expected, 1e-12));

  REQUIRE_THROWS_AS(predict(fit, {"nope", "x"}), UnknownLevel);
}

TEST_CASE("fitted values at observed settings average to the sample mean") {
  Rng rng(59);
  std::vector<FactorSpec> factors{{"f", {"a", "b"}}, {"g", {"x", "y", "z"}}};
  auto rows = full_factorial(factors, 7, &rng);
  auto d = build_design(factors, rows);
  auto fit = fit_ols_crse(d);
  double fitted_sum = 0.0;
  for (Eigen::Index i = 0; i < d.x.rows(); ++i)
    fitted_sum += d.x.row(i) * fit.beta;
  REQUIRE_THAT(fitted_sum / static_cast<double>(d.x.rows()),
               Catch::Matchers::WithinAbs(d.y.mean(), 1e-10));
}
