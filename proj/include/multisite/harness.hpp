#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "multisite/config.hpp"
#include "multisite/datagen.hpp"
#include "multisite/dp_calibration.hpp"
#include "multisite/dp_model.hpp"
#include "multisite/draws.hpp"
#include "multisite/gaussian_model.hpp"
#include "multisite/losses.hpp"
#include "multisite/rng.hpp"
#include "multisite/summaries.hpp"

namespace mst {

// RNG stage tags; every (scenario, rep, stage) triple gets its own stream
// so execution order and campaign composition never affect a run.
enum class RngStage : std::uint64_t {
  Datagen = 0,
  FitGaussian = 1,
  FitDpDiffuse = 2,
  FitDpInform = 3,
};

inline std::uint64_t seed_for(std::uint64_t master_seed,
                              const std::string& scenario_id,
                              std::uint64_t rep, RngStage stage) {
  return derive_stream(master_seed, scenario_id, rep,
                       static_cast<std::uint64_t>(stage));
}

struct Campaign {
  CampaignSpec spec;
  std::string output_dir;
  int threads = 0;                // 0 -> hardware limit (capped by MST_THREADS)
  std::optional<int> max_units;   // stop after completing N units this process
};

struct CampaignOutcome {
  std::size_t completed_units = 0;
  std::size_t failed_units = 0;
  std::size_t skipped_units = 0;  // already in the journal
  bool stopped_early = false;
  std::string results_path;
  std::string journal_path;
};

namespace detail {

struct UnitKey {
  std::size_t scenario_index;
  int rep;
};

inline int model_order(const std::string& m) {
  if (m == "gaussian") return 0;
  if (m == "dp-diffuse") return 1;
  if (m == "dp-inform") return 2;
  return 3;
}
inline int method_order(const std::string& m) {
  if (m == "pm") return 0;
  if (m == "cb") return 1;
  if (m == "gr") return 2;
  return 3;
}

struct JournalRow {
  LossReport loss;
  double wall_ms = 0.0;
  std::string status;  // ok | failed:<reason>
};

inline void write_journal_header(std::ostream& out) {
  csv::Writer(out).row("scenario_id", "rep", "model", "method", "rmse",
                       "isel", "mselp", "mse_p90", "I", "wall_ms", "status");
}

inline void write_journal_row(std::ostream& out, const JournalRow& r) {
  csv::Writer(out).row(r.loss.scenario_id, r.loss.rep, r.loss.model,
                       r.loss.method, r.loss.rmse, r.loss.isel, r.loss.mselp,
                       r.loss.mse_p90, r.loss.informativeness, r.wall_ms,
                       r.status);
}

// Journal recovery: a unit counts as done when it has 9 ok rows or any
// failed row; torn trailing lines are simply dropped.
struct JournalState {
  std::vector<JournalRow> rows;
  std::set<std::pair<std::string, int>> done;
  std::set<std::pair<std::string, int>> failed;
};

inline JournalState read_journal(const std::string& path) {
  JournalState st;
  std::ifstream in(path);
  if (!in) return st;
  std::string line;
  bool header = true;
  std::map<std::pair<std::string, int>, std::vector<JournalRow>> per_unit;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto f = csv::split_line(line);
    if (f.size() != 11) continue;  // torn write
    JournalRow r;
    try {
      r.loss.scenario_id = f[0];
      r.loss.rep = csv::to_int(f[1]);
      r.loss.model = f[2];
      r.loss.method = f[3];
      r.loss.rmse = csv::to_double(f[4]);
      r.loss.isel = csv::to_double(f[5]);
      r.loss.mselp = csv::to_double(f[6]);
      r.loss.mse_p90 = csv::to_double(f[7]);
      r.loss.informativeness = csv::to_double(f[8]);
      r.wall_ms = csv::to_double(f[9]);
      r.status = f[10];
    } catch (const InputError&) {
      continue;  // torn write
    }
    per_unit[{r.loss.scenario_id, static_cast<int>(r.loss.rep)}].push_back(r);
  }
  for (auto& [key, rows] : per_unit) {
    bool failure = false;
    std::size_t ok = 0;
    for (const auto& r : rows) {
      if (r.status == "ok")
        ++ok;
      else
        failure = true;
    }
    if (failure || ok == 9) {
      st.done.insert(key);
      if (failure) st.failed.insert(key);
      for (auto& r : rows) st.rows.push_back(std::move(r));
    }
  }
  return st;
}

}  // namespace detail

inline int effective_threads(int requested) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int n = requested > 0 ? requested : hw;
  if (const char* env = std::getenv("MST_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

// Runs every (scenario, rep) unit that the journal does not already
// cover: generate once, fit the three models, apply the three summary
// methods, score against the generated truth. Results are checkpointed
// per unit; the final results CSV is rebuilt from the journal and sorted,
// so thread scheduling never changes the artifact.
inline CampaignOutcome run_campaign(const Campaign& c) {
  const CampaignSpec& spec = c.spec;
  if (spec.scenarios.empty()) throw InputError("campaign has no scenarios");
  {
    std::set<std::string> ids;
    for (const auto& sc : spec.scenarios)
      if (!ids.insert(sc.canonical_id()).second)
        throw InputError("duplicate scenario id: " + sc.canonical_id());
  }
  namespace fs = std::filesystem;
  fs::create_directories(c.output_dir);
  CampaignOutcome out;
  out.journal_path = (fs::path(c.output_dir) / "runs.csv").string();
  out.results_path = (fs::path(c.output_dir) / "results.csv").string();
  if (spec.keep_draws) fs::create_directories(fs::path(c.output_dir) / "draws");

  auto journal = detail::read_journal(out.journal_path);
  out.skipped_units = journal.done.size();

  std::vector<detail::UnitKey> pending;
  for (std::size_t s = 0; s < spec.scenarios.size(); ++s) {
    const std::string id = spec.scenarios[s].canonical_id();
    for (int rep = 0; rep < spec.reps; ++rep) {
      if (!journal.done.count({id, rep})) pending.push_back({s, rep});
    }
  }

  // DP-inform calibrations, one per distinct J with pending work,
  // computed up front so workers never race on them.
  std::map<int, GammaHyper> inform;
  for (const auto& key : pending) {
    const Scenario& sc = spec.scenarios[key.scenario_index];
    if (inform.count(sc.J)) continue;
    double df = spec.dp_inform_df
                    ? *spec.dp_inform_df
                    : std::max(1.0, static_cast<double>(sc.J) / 10.0);
    auto cal = calibrate_inform(sc.J, df);
    inform[sc.J] = {cal.a, cal.b};
  }

  std::ofstream jout;
  {
    bool fresh = !fs::exists(out.journal_path) || journal.rows.empty();
    jout.open(out.journal_path, fresh ? std::ios::out : std::ios::app);
    if (!jout) throw InputError("cannot write journal: " + out.journal_path);
    if (fresh) detail::write_journal_header(jout);
    jout.flush();
  }

  std::mutex sink_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> completed{0};
  std::atomic<std::size_t> failed{0};
  const std::size_t unit_budget =
      c.max_units ? static_cast<std::size_t>(*c.max_units) : pending.size();

  auto run_unit = [&](const detail::UnitKey& key) {
    const Scenario& sc = spec.scenarios[key.scenario_index];
    const std::string id = sc.canonical_id();
    std::vector<detail::JournalRow> rows;
    auto t0 = std::chrono::steady_clock::now();
    try {
      Rng gen_rng(seed_for(spec.master_seed, id, key.rep, RngStage::Datagen));
      GeneratedDataset g = generate(sc, gen_rng);
      double realized_i =
          informativeness(g.data, sc.sigma * sc.sigma).value;

      std::vector<DrawMatrix> fits;
      {
        McmcConfig mc = spec.mcmc;
        mc.seed = seed_for(spec.master_seed, id, key.rep, RngStage::FitGaussian);
        fits.push_back(fit_gaussian(g.data, mc));
      }
      {
        DpConfig dc;
        auto h = diffuse_hyper(sc.J);
        dc.a = h.a;
        dc.b = h.b;
        dc.label = ModelKind::DpDiffuse;
        dc.mcmc = spec.mcmc;
        dc.mcmc.seed =
            seed_for(spec.master_seed, id, key.rep, RngStage::FitDpDiffuse);
        fits.push_back(fit_dp(g.data, dc));
      }
      {
        DpConfig dc;
        auto h = inform.at(sc.J);
        dc.a = h.a;
        dc.b = h.b;
        dc.label = ModelKind::DpInform;
        dc.mcmc = spec.mcmc;
        dc.mcmc.seed =
            seed_for(spec.master_seed, id, key.rep, RngStage::FitDpInform);
        fits.push_back(fit_dp(g.data, dc));
      }

      for (const auto& fit : fits) {
        if (spec.keep_draws) {
          auto p = std::filesystem::path(c.output_dir) / "draws" /
                   (id + "_r" + std::to_string(key.rep) + "_" +
                    to_string(fit.model) + ".bin");
          write_draws_file(p.string(), fit);
        }
        for (Method m : {Method::PM, Method::CB, Method::GR}) {
          auto est = summarize(fit, m);
          detail::JournalRow r;
          r.loss = evaluate_losses(est.estimates, g.tau_true);
          r.loss.scenario_id = id;
          r.loss.rep = key.rep;
          r.loss.model = to_string(fit.model);
          r.loss.method = to_string(m);
          r.loss.informativeness = realized_i;
          r.status = "ok";
          rows.push_back(std::move(r));
        }
      }
    } catch (const std::exception& e) {
      rows.clear();
      detail::JournalRow r;
      r.loss.scenario_id = id;
      r.loss.rep = key.rep;
      r.loss.model = "-";
      r.loss.method = "-";
      r.status = std::string("failed:") + e.what();
      rows.push_back(std::move(r));
      failed.fetch_add(1);
    }
    auto t1 = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    for (auto& r : rows) r.wall_ms = ms;

    std::lock_guard<std::mutex> lock(sink_mutex);
    for (const auto& r : rows) {
      detail::write_journal_row(jout, r);
      journal.rows.push_back(r);
    }
    jout.flush();
  };

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      if (completed.load() >= unit_budget) return;
      run_unit(pending[i]);
      completed.fetch_add(1);
    }
  };

  int nthreads = effective_threads(c.threads);
  if (nthreads <= 1 || pending.empty()) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  out.completed_units = completed.load();
  out.stopped_early = completed.load() >= unit_budget &&
                      out.completed_units + out.skipped_units <
                          spec.scenarios.size() * static_cast<std::size_t>(spec.reps);

  // canonical results: ok rows only, sorted on the full key
  std::vector<const detail::JournalRow*> ok;
  for (const auto& r : journal.rows)
    if (r.status == "ok") ok.push_back(&r);
  std::sort(ok.begin(), ok.end(), [](const auto* a, const auto* b) {
    if (a->loss.scenario_id != b->loss.scenario_id)
      return a->loss.scenario_id < b->loss.scenario_id;
    if (a->loss.rep != b->loss.rep) return a->loss.rep < b->loss.rep;
    int ma = detail::model_order(a->loss.model);
    int mb = detail::model_order(b->loss.model);
    if (ma != mb) return ma < mb;
    return detail::method_order(a->loss.method) <
           detail::method_order(b->loss.method);
  });
  std::ofstream rout(out.results_path);
  if (!rout) throw InputError("cannot write results: " + out.results_path);
  write_losses_header(rout);
  for (const auto* r : ok) write_losses_row(rout, r->loss);
  rout.close();

  for (const auto& r : journal.rows)
    if (r.status != "ok") ++out.failed_units;
  out.failed_units = std::max(out.failed_units, failed.load());
  return out;
}

}  // namespace mst
