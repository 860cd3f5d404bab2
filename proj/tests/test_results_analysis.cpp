#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "multisite/results_analysis.hpp"
#include "multisite/rng.hpp"

using namespace mst;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("mst_ra_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// synthetic campaign results over a 2(J) x 2(sigma) design
std::vector<LossReport> synthetic_losses(Rng& rng, bool dominating = false) {
  std::vector<LossReport> out;
  for (std::string j : {"25", "100"})
    for (std::string sg : {"0.05", "0.25"})
      for (int rep = 0; rep < 5; ++rep)
        for (std::string model : {"gaussian", "dp-diffuse", "dp-inform"})
          for (std::string method : {"pm", "cb", "gr"}) {
            LossReport r;
            r.scenario_id = "J" + j + "_n40_cv0.5_sg" + sg + "_gaussian-mixture";
            r.rep = rep;
            r.model = model;
            r.method = method;
            double bump = 0.0;
            if (dominating)
              bump = (model == "dp-inform" && method == "gr") ? -0.5 : 0.0;
            double base = (j == "100" ? 0.8 : 1.0) * (sg == "0.25" ? 1.4 : 1.0);
            r.rmse = base * std::exp(bump + 0.05 * rng.normal());
            r.isel = 0.5 * base * std::exp(bump + 0.05 * rng.normal());
            r.mselp = 0.05 * std::exp(0.02 * rng.normal());
            r.mse_p90 = 0.01;
            r.informativeness = sg == "0.25" ? 0.4 : 0.05;
            out.push_back(std::move(r));
          }
  return out;
}

}  // namespace

TEST_CASE("parse_scenario_factors handles canonical and rejects custom ids") {
  auto f = parse_scenario_factors("J100_n160_cv0.5_sg0.25_gaussian-mixture");
  REQUIRE(f.j == "100");
  REQUIRE(f.n_bar == "160");
  REQUIRE(f.cv == "0.5");
  REQUIRE(f.sigma == "0.25");
  REQUIRE(f.g_shape == "gaussian-mixture");
  REQUIRE_THROWS_AS(parse_scenario_factors("my_custom_cell"), InputError);
}

TEST_CASE("meta_rows_from_losses rejects mixed shapes without a filter") {
  Rng rng(3);
  auto losses = synthetic_losses(rng);
  auto extra = losses;
  extra[0].scenario_id = "J25_n40_cv0.5_sg0.05_gaussian";
  REQUIRE_THROWS_AS(meta_rows_from_losses(extra, MetaOutcome::LogRmse),
                    InputError);
  REQUIRE_NOTHROW(
      meta_rows_from_losses(extra, MetaOutcome::LogRmse, "gaussian-mixture"));
}

TEST_CASE("factor-effects table equals exp(delta x' beta) from the fit") {
  Rng rng(5);
  auto losses = synthetic_losses(rng);
  auto dir = fresh_dir("fx");
  emit_factor_effects(losses, dir.string());
  auto table = csv::read_file((dir / "factor_effects.csv").string());
  REQUIRE(!table.rows.empty());

  auto fit = fit_metamodel(losses, MetaOutcome::LogRmse);
  auto ci = table.col("outcome");
  std::size_t checked = 0;
  for (const auto& row : table.rows) {
    if (row[ci] != "log_rmse") continue;
    // reconstruct the two settings and compare against the fit directly
    std::vector<std::string> base, shifted;
    for (const auto& fac : fit.factors) base.push_back(fac.levels[0]);
    base[4] = row[table.col("model")];
    base[5] = row[table.col("method")];
    shifted = base;
    const std::string fname = row[table.col("factor")];
    for (std::size_t k = 0; k < fit.factors.size(); ++k)
      if (fit.factors[k].name == fname) shifted[k] = row[table.col("level")];
    double expect =
        std::exp(predict(fit, shifted).point - predict(fit, base).point);
    REQUIRE_THAT(csv::to_double(row[table.col("mult_change")]),
                 Catch::Matchers::WithinRel(expect, 1e-9));
    double lo = csv::to_double(row[table.col("lo")]);
    double hi = csv::to_double(row[table.col("hi")]);
    REQUIRE(lo <= csv::to_double(row[table.col("mult_change")]));
    REQUIRE(csv::to_double(row[table.col("mult_change")]) <= hi);
    ++checked;
  }
  // 2 factors with 2 levels -> 1 non-reference level each, x 9 combos
  REQUIRE(checked == 2u * 9u);
}

TEST_CASE("best-combo lists a strictly dominating combination everywhere") {
  Rng rng(7);
  auto losses = synthetic_losses(rng, /*dominating=*/true);
  auto dir = fresh_dir("bc");
  emit_best_combo(losses, dir.string());
  auto table = csv::read_file((dir / "best_combo.csv").string());
  std::size_t cells = 0;
  for (const auto& row : table.rows) {
    if (row[table.col("outcome")] == "mselp") continue;  // flat by design
    REQUIRE(row[table.col("best_model")] == "dp-inform");
    REQUIRE(row[table.col("best_method")] == "gr");
    ++cells;
  }
  REQUIRE(cells == 8);  // 4 cells x 2 outcomes
}

TEST_CASE("cluster-prior emission writes pmfs with the expected modes") {
  auto dir = fresh_dir("cp");
  emit_cluster_prior(50, {{2.5, 0.1}, {1.60, 1.22}}, dir.string());
  auto table = csv::read_file((dir / "cluster_prior.csv").string());
  REQUIRE(table.rows.size() == 100);
  // recover the two pmfs and check their modes fall where the priors say
  std::map<std::string, std::pair<int, double>> best;
  for (const auto& row : table.rows) {
    auto key = row[table.col("a")];
    double p = csv::to_double(row[table.col("prob")]);
    int k = static_cast<int>(csv::to_int(row[table.col("K")]));
    if (p > best[key].second) best[key] = {k, p};
  }
  REQUIRE(best["2.5"].first >= 20);
  REQUIRE(best["2.5"].first <= 35);
  REQUIRE(best["1.6"].first <= 6);
  REQUIRE(fs::exists(dir / "cluster_prior_a2.5_b0.1.svg"));
}
