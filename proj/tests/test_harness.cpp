#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "multisite/harness.hpp"

using namespace mst;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("mst_harness_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CampaignSpec tiny_spec() {
  CampaignSpec spec;
  Scenario a;
  a.J = 10;
  a.n_bar = 40.0;
  a.cv = 0.0;
  a.sigma = 0.2;
  Scenario b = a;
  b.J = 12;
  b.sigma = 0.1;
  b.g_shape = GShape::GaussianMixture;
  spec.scenarios = {a, b};
  spec.reps = 2;
  spec.mcmc.draws_kept = 150;
  spec.mcmc.burn_in = 60;
  spec.master_seed = 20240601;
  spec.dp_inform_df = 1.0;  // J/10 ~ 1 for these sizes anyway
  return spec;
}

}  // namespace

TEST_CASE("seed_for: stable, distinct, and collision-free at scale") {
  auto s1 = seed_for(1, "scenA", 0, RngStage::Datagen);
  REQUIRE(s1 == seed_for(1, "scenA", 0, RngStage::Datagen));
  REQUIRE(s1 != seed_for(1, "scenA", 1, RngStage::Datagen));
  REQUIRE(s1 != seed_for(1, "scenB", 0, RngStage::Datagen));
  REQUIRE(s1 != seed_for(1, "scenA", 0, RngStage::FitGaussian));
  REQUIRE(s1 != seed_for(2, "scenA", 0, RngStage::Datagen));

  std::set<std::uint64_t> seen;
  for (int scen = 0; scen < 100; ++scen)
    for (int rep = 0; rep < 2500; ++rep)
      for (auto st : {RngStage::Datagen, RngStage::FitGaussian,
                      RngStage::FitDpDiffuse, RngStage::FitDpInform})
        seen.insert(seed_for(7, "s" + std::to_string(scen), rep, st));
  REQUIRE(seen.size() == 100u * 2500u * 4u);
}

TEST_CASE("run_campaign: row counts, schema, and determinism") {
  auto dir1 = fresh_dir("a");
  Campaign c;
  c.spec = tiny_spec();
  c.output_dir = dir1.string();
  c.threads = 2;
  auto out1 = run_campaign(c);
  REQUIRE(out1.completed_units == 4);
  REQUIRE(out1.failed_units == 0);

  auto rows = read_losses_csv(out1.results_path);
  REQUIRE(rows.size() == 2u * 2u * 9u);
  std::set<std::string> models, methods;
  for (const auto& r : rows) {
    models.insert(r.model);
    methods.insert(r.method);
    REQUIRE(r.rmse >= 0.0);
    REQUIRE(r.informativeness > 0.0);
    REQUIRE(r.informativeness < 1.0);
  }
  REQUIRE(models == std::set<std::string>{"gaussian", "dp-diffuse",
                                          "dp-inform"});
  REQUIRE(methods == std::set<std::string>{"pm", "cb", "gr"});

  // same spec, fresh dir, different thread count: identical artifact
  auto dir2 = fresh_dir("b");
  Campaign c2 = c;
  c2.output_dir = dir2.string();
  c2.threads = 1;
  auto out2 = run_campaign(c2);
  REQUIRE(slurp(out1.results_path) == slurp(out2.results_path));
}

TEST_CASE("run_campaign: keep_draws retains per-run draw files") {
  auto dir = fresh_dir("draws");
  Campaign c;
  c.spec = tiny_spec();
  c.spec.scenarios.resize(1);
  c.spec.reps = 1;
  c.spec.keep_draws = true;
  c.output_dir = dir.string();
  run_campaign(c);
  const std::string id = c.spec.scenarios[0].canonical_id();
  for (std::string model : {"gaussian", "dp-diffuse", "dp-inform"}) {
    auto p = dir / "draws" / (id + "_r0_" + model + ".bin");
    REQUIRE(fs::exists(p));
    auto draws = read_draws_file(p.string());
    REQUIRE(draws.num_draws == 150);
    REQUIRE(to_string(draws.model) == model);
  }
}

TEST_CASE("run_campaign: per-unit informativeness is shared by all 9 rows") {
  auto dir = fresh_dir("i");
  Campaign c;
  c.spec = tiny_spec();
  c.output_dir = dir.string();
  auto out = run_campaign(c);
  std::map<std::pair<std::string, long long>, std::set<double>> per_unit;
  for (const auto& r : read_losses_csv(out.results_path))
    per_unit[{r.scenario_id, r.rep}].insert(r.informativeness);
  REQUIRE(per_unit.size() == 4);
  for (const auto& [key, vals] : per_unit) REQUIRE(vals.size() == 1);
}

TEST_CASE("run_campaign: interrupt and resume reproduce the full artifact") {
  auto full_dir = fresh_dir("full");
  Campaign full;
  full.spec = tiny_spec();
  full.output_dir = full_dir.string();
  auto ref = run_campaign(full);
  std::string want = slurp(ref.results_path);

  auto part_dir = fresh_dir("part");
  Campaign part = full;
  part.output_dir = part_dir.string();
  part.max_units = 1;
  part.threads = 1;
  auto first = run_campaign(part);
  REQUIRE(first.stopped_early);
  REQUIRE(first.completed_units >= 1);
  REQUIRE(first.completed_units < 4);

  Campaign rest = part;
  rest.max_units.reset();
  auto second = run_campaign(rest);
  REQUIRE(second.skipped_units == first.completed_units);
  REQUIRE(slurp(second.results_path) == want);
}

TEST_CASE("run_campaign: journal survives a torn trailing line") {
  auto dir = fresh_dir("torn");
  Campaign c;
  c.spec = tiny_spec();
  c.output_dir = dir.string();
  c.max_units = 2;
  c.threads = 1;
  auto partial = run_campaign(c);
  REQUIRE(partial.completed_units >= 2);

  {
    std::ofstream j(partial.journal_path, std::ios::app);
    j << "J10_n40_cv0_sg0.2_gaussian,1,gaussian,pm,0.1";  // torn mid-row
  }
  Campaign resume = c;
  resume.max_units.reset();
  auto done = run_campaign(resume);
  auto want_dir = fresh_dir("torn_ref");
  Campaign ref = c;
  ref.output_dir = want_dir.string();
  ref.max_units.reset();
  auto want = run_campaign(ref);
  REQUIRE(slurp(done.results_path) == slurp(want.results_path));
}

TEST_CASE("campaign JSON: grid crossing, defaults, and validation") {
  auto j = nlohmann::json::parse(R"({
    "grid": {"J": [25, 100], "n_bar": [10, 160], "sigma": [0.05, 0.25]},
    "cv": 0.5,
    "g_shape": "gaussian-mixture",
    "reps": 20,
    "mcmc": {"draws_kept": 2000, "burn_in": 1000},
    "seed": 94301
  })");
  auto spec = parse_campaign_json(j);
  REQUIRE(spec.scenarios.size() == 8);
  REQUIRE(spec.reps == 20);
  REQUIRE(spec.mcmc.draws_kept == 2000);
  REQUIRE(spec.master_seed == 94301);
  std::set<std::string> ids;
  for (const auto& sc : spec.scenarios) {
    ids.insert(sc.id);
    REQUIRE(sc.cv == 0.5);
    REQUIRE(sc.g_shape == GShape::GaussianMixture);
  }
  REQUIRE(ids.size() == 8);

  REQUIRE_THROWS_AS(parse_campaign_json(nlohmann::json::parse("{}")),
                    InputError);
  auto bad = nlohmann::json::parse(R"({"scenarios": [{"J": 10}], "reps": 0})");
  REQUIRE_THROWS_AS(parse_campaign_json(bad), InputError);
}

TEST_CASE("scenario JSON parses the documented schema") {
  auto j = nlohmann::json::parse(R"({
    "J": 50, "n_bar": 80, "cv": 0.25, "sigma": 0.15,
    "g_shape": "asymmetric-laplace",
    "mixture": {"w": 0.4, "delta": 2.5, "u": 1.5},
    "al": {"rho": 0.2},
    "seed": 17
  })");
  auto sc = parse_scenario_json(j);
  REQUIRE(sc.J == 50);
  REQUIRE(sc.n_bar == 80.0);
  REQUIRE(sc.cv == 0.25);
  REQUIRE(sc.sigma == 0.15);
  REQUIRE(sc.g_shape == GShape::AsymmetricLaplace);
  REQUIRE(sc.mixture.w == 0.4);
  REQUIRE(sc.al.rho == 0.2);
  REQUIRE(sc.seed == 17);
}
