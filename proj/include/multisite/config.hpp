#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisite/datagen.hpp"
#include "multisite/errors.hpp"
#include "multisite/gaussian_model.hpp"

namespace mst {

struct CampaignSpec {
  std::vector<Scenario> scenarios;
  int reps = 100;
  McmcConfig mcmc;
  std::uint64_t master_seed = 0;
  std::optional<double> dp_inform_df;  // default: J/10, floored at 1
  bool keep_draws = false;
};

namespace detail {

inline void apply_scenario_fields(const nlohmann::json& j, Scenario& sc) {
  if (j.contains("id")) sc.id = j.at("id").get<std::string>();
  if (j.contains("J")) sc.J = j.at("J").get<int>();
  if (j.contains("n_bar")) sc.n_bar = j.at("n_bar").get<double>();
  if (j.contains("cv")) sc.cv = j.at("cv").get<double>();
  if (j.contains("sigma")) sc.sigma = j.at("sigma").get<double>();
  if (j.contains("g_shape"))
    sc.g_shape = parse_gshape(j.at("g_shape").get<std::string>());
  if (j.contains("mixture")) {
    const auto& m = j.at("mixture");
    if (m.contains("w")) sc.mixture.w = m.at("w").get<double>();
    if (m.contains("delta")) sc.mixture.delta = m.at("delta").get<double>();
    if (m.contains("u")) sc.mixture.u = m.at("u").get<double>();
  }
  if (j.contains("al")) {
    const auto& a = j.at("al");
    if (a.contains("rho")) sc.al.rho = a.at("rho").get<double>();
  }
  if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace detail

// scenario.json: {J, n_bar, cv, sigma, g_shape, mixture:{w,delta,u},
// al:{rho}, reps, seed}; reps is ignored here (campaign-level concern).
inline Scenario parse_scenario_json(const nlohmann::json& j) {
  Scenario sc;
  detail::apply_scenario_fields(j, sc);
  return sc;
}

// campaign.json: either an explicit "scenarios" array, a "grid" object
// whose array-valued fields are crossed, or both. Scalar scenario fields
// at the top level act as defaults for grid cells.
inline CampaignSpec parse_campaign_json(const nlohmann::json& j) {
  CampaignSpec c;
  Scenario defaults;
  detail::apply_scenario_fields(j, defaults);
  defaults.id.clear();

  if (j.contains("scenarios")) {
    for (const auto& js : j.at("scenarios")) {
      Scenario sc = defaults;
      detail::apply_scenario_fields(js, sc);
      c.scenarios.push_back(sc);
    }
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    auto list_d = [&](const char* key, double fallback) {
      std::vector<double> v;
      if (g.contains(key))
        for (const auto& e : g.at(key)) v.push_back(e.get<double>());
      else
        v.push_back(fallback);
      return v;
    };
    std::vector<std::string> shapes;
    if (g.contains("g_shape"))
      for (const auto& e : g.at("g_shape")) shapes.push_back(e.get<std::string>());
    else
      shapes.push_back(to_string(defaults.g_shape));
    auto js = list_d("J", defaults.J);
    auto ns = list_d("n_bar", defaults.n_bar);
    auto cvs = list_d("cv", defaults.cv);
    auto sgs = list_d("sigma", defaults.sigma);
    for (double jv : js)
      for (double nv : ns)
        for (double cvv : cvs)
          for (double sgv : sgs)
            for (const auto& sh : shapes) {
              Scenario sc = defaults;
              sc.J = static_cast<int>(jv);
              sc.n_bar = nv;
              sc.cv = cvv;
              sc.sigma = sgv;
              sc.g_shape = parse_gshape(sh);
              sc.id = sc.canonical_id();
              c.scenarios.push_back(sc);
            }
  }
  if (c.scenarios.empty())
    throw InputError("campaign config has neither scenarios nor grid");
  for (auto& sc : c.scenarios)
    if (sc.id.empty()) sc.id = sc.canonical_id();

  if (j.contains("reps")) c.reps = j.at("reps").get<int>();
  if (j.contains("mcmc")) {
    const auto& m = j.at("mcmc");
    if (m.contains("draws_kept"))
      c.mcmc.draws_kept = m.at("draws_kept").get<std::size_t>();
    if (m.contains("burn_in")) c.mcmc.burn_in = m.at("burn_in").get<std::size_t>();
    if (m.contains("thin")) c.mcmc.thin = m.at("thin").get<std::size_t>();
  }
  if (j.contains("seed")) c.master_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("dp_inform_df"))
    c.dp_inform_df = j.at("dp_inform_df").get<double>();
  if (j.contains("keep_draws")) c.keep_draws = j.at("keep_draws").get<bool>();
  if (c.reps < 1) throw InputError("reps must be at least 1");
  return c;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace mst
