// mst: site-specific effect estimation for multisite trials.
//
// Subcommands cover the full workflow: ingest binary outcome tables,
// simulate campaigns, fit the Gaussian or DP-mixture models, summarize
// posteriors (PM/CB/GR), evaluate losses against truth, calibrate DP
// hyperpriors, run meta-model regressions, and emit figure data.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisite/multisite.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInternal = 4;

double median(std::vector<double> v) {
  if (v.empty()) throw mst::InputError("median of empty vector");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct FitArgs {
  std::string data_path;
  std::string model = "gaussian";
  std::size_t draws = 4000;
  std::size_t burnin = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  double df = 0.0;  // 0 -> J/10
  std::string out_path;
};

int cmd_fit(const FitArgs& a) {
  auto data = mst::read_sites_csv(a.data_path);
  mst::validate_dataset(data);
  mst::McmcConfig mc;
  mc.draws_kept = a.draws;
  mc.burn_in = a.burnin;
  mc.thin = a.thin;
  mc.seed = a.seed;
  mc.validate();

  mst::ModelKind kind = mst::parse_model(a.model);
  mst::DrawMatrix draws;
  if (kind == mst::ModelKind::Gaussian) {
    draws = mst::fit_gaussian(data, mc);
  } else {
    mst::DpConfig dc;
    dc.mcmc = mc;
    dc.label = kind;
    int j = static_cast<int>(data.num_sites());
    if (kind == mst::ModelKind::DpDiffuse) {
      auto h = mst::diffuse_hyper(j);
      dc.a = h.a;
      dc.b = h.b;
    } else {
      double df = a.df > 0.0 ? a.df : std::max(1.0, j / 10.0);
      auto cal = mst::calibrate_inform(j, df);
      dc.a = cal.a;
      dc.b = cal.b;
      std::cout << "dp-inform hyperprior: a=" << cal.a << " b=" << cal.b
                << " (df=" << df << ")\n";
    }
    draws = mst::fit_dp(data, dc);
  }
  mst::write_draws_file(a.out_path, draws);

  double sigma_med = median(draws.hyper_sigma);
  double i = mst::informativeness(data, sigma_med * sigma_med).value;
  std::cout << "sigma_hat_median=" << mst::csv::fmt(sigma_med)
            << " I=" << mst::csv::fmt(i) << "\n";
  return kExitOk;
}

int cmd_summarize(const std::string& draws_path, const std::string& method,
                  const std::string& model_override,
                  const std::string& out_path) {
  auto draws = mst::read_draws_file(draws_path);
  if (!model_override.empty()) draws.model = mst::parse_model(model_override);
  auto est = mst::summarize(draws, mst::parse_method(method));
  std::ofstream out(out_path);
  if (!out) throw mst::InputError("cannot write: " + out_path);
  mst::write_estimates_csv(out, est);
  if (est.method == mst::Method::CB) {
    auto st = mst::compute_summary_stats(draws);
    double mean = 0.0, var = 0.0;
    for (double e : est.estimates) mean += e;
    mean /= static_cast<double>(est.estimates.size());
    for (double e : est.estimates) var += (e - mean) * (e - mean);
    var /= static_cast<double>(est.estimates.size() - 1);
    std::cout << "cb_variance=" << mst::csv::fmt(var)
              << " sigma_hat2=" << mst::csv::fmt(st.sigma_hat * st.sigma_hat)
              << "\n";
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& est_path, const std::string& truth_path,
                 const std::string& out_path, const std::string& sites_path,
                 const std::string& scenario_id, long long rep) {
  auto groups = mst::read_estimates_csv(est_path);
  auto truth = mst::read_truth_csv(truth_path);
  std::map<std::string, double> truth_by_id;
  for (std::size_t i = 0; i < truth.site_ids.size(); ++i)
    truth_by_id[truth.site_ids[i]] = truth.tau_true[i];

  // No campaign context here, so sigma is taken as the truth-vector SD;
  // the geometric-mean sampling variance needs the sites file.
  double informativeness = 0.0;
  if (!sites_path.empty()) {
    double mean = 0.0;
    for (double t : truth.tau_true) mean += t;
    mean /= static_cast<double>(truth.tau_true.size());
    double var = 0.0;
    for (double t : truth.tau_true) var += (t - mean) * (t - mean);
    var /= std::max(1.0, static_cast<double>(truth.tau_true.size()) - 1.0);
    auto sites = mst::read_sites_csv(sites_path);
    informativeness = mst::informativeness(sites, var).value;
  }

  std::ofstream out(out_path);
  if (!out) throw mst::InputError("cannot write: " + out_path);
  mst::write_losses_header(out);
  for (const auto& g : groups) {
    std::vector<double> t;
    t.reserve(g.site_ids.size());
    for (const auto& id : g.site_ids) {
      auto it = truth_by_id.find(id);
      if (it == truth_by_id.end())
        throw mst::InputError("no truth for site: " + id);
      t.push_back(it->second);
    }
    auto r = mst::evaluate_losses(g.estimates, t);
    r.scenario_id = scenario_id;
    r.rep = rep;
    r.model = mst::to_string(g.model);
    r.method = mst::to_string(g.method);
    r.informativeness = informativeness;
    mst::write_losses_row(out, r);
  }
  return kExitOk;
}

int cmd_generate(const std::string& scenario_path, const std::string& out_dir,
                 int reps_flag) {
  auto j = mst::load_json_file(scenario_path);
  auto sc = mst::parse_scenario_json(j);
  int reps = reps_flag;
  if (reps <= 0) reps = j.contains("reps") ? j.at("reps").get<int>() : 1;
  if (reps < 1) throw mst::InputError("reps must be at least 1");
  std::filesystem::create_directories(out_dir);
  const std::string id = sc.canonical_id();
  for (int r = 0; r < reps; ++r) {
    mst::Rng rng(mst::derive_stream(sc.seed, id, static_cast<std::uint64_t>(r),
                                    0));
    auto g = mst::generate(sc, rng);
    auto base = std::filesystem::path(out_dir);
    std::ofstream sites(base / ("sites_r" + std::to_string(r) + ".csv"));
    mst::write_sites_csv(sites, g.data);
    std::ofstream truth(base / ("truth_r" + std::to_string(r) + ".csv"));
    mst::write_truth_csv(truth, g);
  }
  std::cout << "scenario=" << id << " reps=" << reps << " dir=" << out_dir
            << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 int threads, std::optional<int> max_units) {
  mst::Campaign c;
  c.spec = mst::parse_campaign_json(mst::load_json_file(config_path));
  c.output_dir = out_dir;
  c.threads = threads;
  c.max_units = max_units;
  auto outcome = mst::run_campaign(c);
  std::cout << "completed=" << outcome.completed_units
            << " skipped=" << outcome.skipped_units
            << " failed=" << outcome.failed_units
            << (outcome.stopped_early ? " (stopped early)" : "") << "\n"
            << "results=" << outcome.results_path << "\n";
  return outcome.failed_units > 0 ? kExitNumeric : kExitOk;
}

int cmd_calibrate(int j, double df, const std::string& out_path) {
  auto cal = mst::calibrate_inform(j, df);
  std::cout << "a=" << mst::csv::fmt(cal.a) << " b=" << mst::csv::fmt(cal.b)
            << " kl=" << mst::csv::fmt(cal.kl) << "\n";
  nlohmann::json out{
      {"J", j},          {"df", df},
      {"a", cal.a},      {"b", cal.b},
      {"kl", cal.kl},    {"pmf_target", cal.target.pmf},
      {"pmf_induced", cal.induced.pmf},
  };
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    if (!f) throw mst::InputError("cannot write: " + out_path);
    f << out.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_metamodel(const std::string& results_path, const std::string& outcome,
                  const std::string& gshape, const std::string& out_dir) {
  auto losses = mst::read_losses_csv(results_path);
  auto oc = mst::parse_outcome(outcome);
  auto fit = mst::fit_metamodel(losses, oc, gshape);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "metamodel_coef.csv");
    mst::csv::Writer w(out);
    w.row("term", "estimate", "se");
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i)
      w.row(fit.col_names[static_cast<std::size_t>(i)], fit.beta(i),
            std::sqrt(std::max(0.0, fit.vcov(i, i))));
  }
  {
    // predictions at every observed factor setting
    auto rows = mst::meta_rows_from_losses(losses, oc, gshape);
    std::set<std::vector<std::string>> settings;
    for (const auto& r : rows) settings.insert(r.levels);
    std::ofstream out(fs::path(out_dir) / "metamodel_pred.csv");
    mst::csv::Writer w(out);
    w.row("J", "n_bar", "cv", "sigma", "model", "method", "point", "lo",
          "hi", "mult_change");
    for (const auto& s : settings) {
      auto p = mst::predict(fit, s);
      w.row(s[0], s[1], s[2], s[3], s[4], s[5], p.point, p.lo, p.hi,
            p.mult_change);
    }
  }
  // the all-reference setting, if observed, has multiplicative change 1
  std::vector<std::string> ref;
  for (const auto& f : fit.factors) ref.push_back(f.levels[0]);
  auto p0 = mst::predict(fit, ref);
  std::cout << "n=" << fit.n_rows << " clusters=" << fit.n_clusters
            << " terms=" << fit.col_names.size()
            << " reference_mult_change=" << mst::csv::fmt(p0.mult_change)
            << "\n";
  return kExitOk;
}

int cmd_ingest(const std::string& binary_path, const std::string& out_path,
               long long min_cell) {
  auto tables = mst::read_binary_csv(binary_path);
  auto res = mst::ingest_binary_sites(tables, min_cell);
  std::ofstream out(out_path);
  if (!out) throw mst::InputError("cannot write: " + out_path);
  mst::write_sites_csv(out, res.data);
  std::cout << "kept=" << res.data.num_sites()
            << " dropped=" << res.dropped_site_ids.size();
  for (const auto& id : res.dropped_site_ids) std::cout << " " << id;
  std::cout << "\n";
  return kExitOk;
}

int cmd_plotdata(const std::string& kind, const std::string& results_path,
                 const std::string& est_path, const std::string& truth_path,
                 int j, const std::vector<std::string>& gamma_pairs,
                 const std::string& gshape, const std::string& out_dir) {
  if (kind == "factor-effects") {
    if (results_path.empty())
      throw mst::InputError("factor-effects needs --results");
    mst::emit_factor_effects(mst::read_losses_csv(results_path), out_dir,
                             gshape);
  } else if (kind == "best-combo") {
    if (results_path.empty())
      throw mst::InputError("best-combo needs --results");
    mst::emit_best_combo(mst::read_losses_csv(results_path), out_dir);
  } else if (kind == "edf-hist") {
    if (est_path.empty()) throw mst::InputError("edf-hist needs --est");
    auto groups = mst::read_estimates_csv(est_path);
    std::vector<double> truth;
    if (!truth_path.empty()) truth = mst::read_truth_csv(truth_path).tau_true;
    mst::emit_edf_hist(groups, truth, out_dir);
  } else if (kind == "cluster-prior") {
    if (j < 2) throw mst::InputError("cluster-prior needs --J");
    std::vector<mst::GammaHyper> hypers;
    for (const auto& s : gamma_pairs) {
      auto comma = s.find(',');
      if (comma == std::string::npos)
        throw mst::InputError("--gamma expects 'a,b', got: " + s);
      hypers.push_back({mst::csv::to_double(s.substr(0, comma)),
                        mst::csv::to_double(s.substr(comma + 1))});
    }
    if (hypers.empty()) {
      hypers.push_back(mst::diffuse_hyper(j));
      auto cal = mst::calibrate_inform(j, std::max(1.0, j / 10.0));
      hypers.push_back({cal.a, cal.b});
    }
    mst::emit_cluster_prior(j, hypers, out_dir);
  } else {
    throw mst::UnknownKind(kind);
  }
  std::cout << "wrote " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"site-specific effect estimation for multisite trials"};
  app.require_subcommand(1);

  // fit
  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "fit a model to site summaries");
  fit->add_option("--data", fa.data_path, "sites CSV (site_id,tau_hat,se2)")
      ->required();
  fit->add_option("--model", fa.model, "gaussian | dp-diffuse | dp-inform");
  fit->add_option("--draws", fa.draws, "kept posterior draws");
  fit->add_option("--burnin", fa.burnin, "burn-in iterations");
  fit->add_option("--thin", fa.thin, "thinning interval");
  fit->add_option("--seed", fa.seed, "RNG seed");
  fit->add_option("--df", fa.df, "chi^2 df for dp-inform (default J/10)");
  fit->add_option("--out", fa.out_path, "draw file (.csv or binary)")
      ->required();

  // summarize
  std::string sm_draws, sm_method = "pm", sm_model, sm_out;
  auto* summ = app.add_subcommand("summarize", "posterior summary estimates");
  summ->add_option("--draws", sm_draws, "draw file")->required();
  summ->add_option("--method", sm_method, "pm | cb | gr");
  summ->add_option("--model", sm_model, "override model provenance");
  summ->add_option("--out", sm_out, "estimates CSV")->required();

  // evaluate
  std::string ev_est, ev_truth, ev_out, ev_sites, ev_id = "adhoc";
  long long ev_rep = 0;
  auto* ev = app.add_subcommand("evaluate", "losses against known truth");
  ev->add_option("--est", ev_est, "estimates CSV")->required();
  ev->add_option("--truth", ev_truth, "truth CSV (site_id,tau_true)")
      ->required();
  ev->add_option("--out", ev_out, "losses CSV")->required();
  ev->add_option("--sites", ev_sites,
                 "sites CSV; enables the informativeness column");
  ev->add_option("--scenario-id", ev_id, "scenario id for the output rows");
  ev->add_option("--rep", ev_rep, "replication index for the output rows");

  // generate
  std::string ge_scenario, ge_out = "generated";
  int ge_reps = 0;
  auto* gen = app.add_subcommand("generate",
                                 "synthetic datasets from a scenario.json");
  gen->add_option("--scenario", ge_scenario, "scenario.json")->required();
  gen->add_option("--out", ge_out, "output directory");
  gen->add_option("--reps", ge_reps,
                  "replications (default: scenario's reps field, else 1)");

  // simulate
  std::string si_config, si_out = "campaign_out";
  int si_threads = 0;
  int si_max_units = -1;
  auto* sim = app.add_subcommand("simulate", "run a simulation campaign");
  sim->add_option("--config", si_config, "campaign.json")->required();
  sim->add_option("--out", si_out, "output directory");
  sim->add_option("--threads", si_threads, "worker threads (0 = auto)");
  sim->add_option("--max-units", si_max_units,
                  "stop after N (scenario, rep) units; resume later");

  // calibrate
  int ca_j = 0;
  double ca_df = 0.0;
  std::string ca_out;
  auto* cal = app.add_subcommand("calibrate",
                                 "DP-inform Gamma(a,b) from a chi^2 target");
  cal->add_option("--J", ca_j, "number of sites")->required();
  cal->add_option("--df", ca_df, "chi^2 degrees of freedom")->required();
  cal->add_option("--out", ca_out, "JSON output path (default: stdout)");

  // metamodel
  std::string mm_results, mm_outcome = "log_rmse", mm_gshape, mm_out = ".";
  auto* mm = app.add_subcommand("metamodel",
                                "log-loss regression on design factors");
  mm->add_option("--results", mm_results, "campaign results CSV")->required();
  mm->add_option("--outcome", mm_outcome, "log_rmse | log_isel | log_mselp");
  mm->add_option("--gshape", mm_gshape, "true-G filter when results mix shapes");
  mm->add_option("--out", mm_out, "output directory");

  // ingest
  std::string in_binary, in_out;
  long long in_min_cell = 8;
  auto* ing = app.add_subcommand("ingest",
                                 "binary 2x2 tables -> effect-size sites");
  ing->add_option("--binary", in_binary, "tables CSV")->required();
  ing->add_option("--out", in_out, "sites CSV")->required();
  ing->add_option("--min-cell", in_min_cell, "minimum per-arm total");

  // plotdata
  std::string pd_kind, pd_results, pd_est, pd_truth, pd_gshape, pd_out = "plots";
  int pd_j = 0;
  std::vector<std::string> pd_gamma;
  auto* pd = app.add_subcommand("plotdata", "tidy CSV/SVG figure data");
  pd->add_option("--kind", pd_kind,
                 "factor-effects | best-combo | edf-hist | cluster-prior")
      ->required();
  pd->add_option("--results", pd_results, "losses CSV");
  pd->add_option("--est", pd_est, "estimates CSV (edf-hist)");
  pd->add_option("--truth", pd_truth, "truth CSV (edf-hist overlay)");
  pd->add_option("--J", pd_j, "number of sites (cluster-prior)");
  pd->add_option("--gamma", pd_gamma, "a,b pair (repeatable, cluster-prior)");
  pd->add_option("--gshape", pd_gshape, "true-G filter (factor-effects)");
  pd->add_option("--out", pd_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit) return cmd_fit(fa);
    if (*summ) return cmd_summarize(sm_draws, sm_method, sm_model, sm_out);
    if (*gen) return cmd_generate(ge_scenario, ge_out, ge_reps);
    if (*ev)
      return cmd_evaluate(ev_est, ev_truth, ev_out, ev_sites, ev_id, ev_rep);
    if (*sim)
      return cmd_simulate(si_config, si_out, si_threads,
                          si_max_units >= 0 ? std::optional<int>(si_max_units)
                                            : std::nullopt);
    if (*cal) return cmd_calibrate(ca_j, ca_df, ca_out);
    if (*mm) return cmd_metamodel(mm_results, mm_outcome, mm_gshape, mm_out);
    if (*ing) return cmd_ingest(in_binary, in_out, in_min_cell);
    if (*pd)
      return cmd_plotdata(pd_kind, pd_results, pd_est, pd_truth, pd_j,
                          pd_gamma, pd_gshape, pd_out);
    std::cerr << "no subcommand\n";
    return kExitInput;
  } catch (const mst::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const mst::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
