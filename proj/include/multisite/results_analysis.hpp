#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "multisite/dp_calibration.hpp"
#include "multisite/errors.hpp"
#include "multisite/losses.hpp"
#include "multisite/metamodel.hpp"
#include "multisite/summaries.hpp"

namespace mst {

// Design factors recovered from a canonical scenario id
// ("J100_n160_cv0.5_sg0.25_gaussian-mixture").
struct ScenarioFactors {
  std::string j, n_bar, cv, sigma, g_shape;
};

inline ScenarioFactors parse_scenario_factors(const std::string& id) {
  static const std::regex re(
      R"(^J([0-9.eE+\-]+)_n([0-9.eE+\-]+)_cv([0-9.eE+\-]+)_sg([0-9.eE+\-]+)_(.+)$)");
  std::smatch m;
  if (!std::regex_match(id, m, re))
    throw InputError(
        "scenario id '" + id +
        "' is not canonical (J<j>_n<n>_cv<cv>_sg<sigma>_<shape>); "
        "meta-model and plot-data commands need canonical ids");
  return {m[1], m[2], m[3], m[4], m[5]};
}

enum class MetaOutcome { LogRmse, LogIsel, LogMselp };

inline std::string to_string(MetaOutcome o) {
  switch (o) {
    case MetaOutcome::LogRmse: return "log_rmse";
    case MetaOutcome::LogIsel: return "log_isel";
    case MetaOutcome::LogMselp: return "log_mselp";
  }
  return "?";
}

inline MetaOutcome parse_outcome(const std::string& s) {
  if (s == "log_rmse" || s == "rmse") return MetaOutcome::LogRmse;
  if (s == "log_isel" || s == "isel") return MetaOutcome::LogIsel;
  if (s == "log_mselp" || s == "mselp") return MetaOutcome::LogMselp;
  throw InputError("unknown meta-model outcome: " + s);
}

inline const std::vector<std::string>& meta_factor_names() {
  static const std::vector<std::string> names{"J",  "n_bar", "cv",
                                              "sigma", "model", "method"};
  return names;
}

inline const std::map<std::string, std::string>& meta_reference_levels() {
  static const std::map<std::string, std::string> ref{
      {"J", "25"},      {"n_bar", "10"},      {"cv", "0"},
      {"sigma", "0.05"}, {"model", "gaussian"}, {"method", "pm"}};
  return ref;
}

// Long-format losses -> meta-model rows. One G shape at a time (the
// analysis is run separately per true distribution); pass the shape to
// keep when the results mix several.
inline std::vector<MetaRow> meta_rows_from_losses(
    const std::vector<LossReport>& losses, MetaOutcome outcome,
    const std::string& g_shape_filter = "") {
  std::set<std::string> shapes;
  std::vector<MetaRow> rows;
  for (const auto& r : losses) {
    auto f = parse_scenario_factors(r.scenario_id);
    if (!g_shape_filter.empty() && f.g_shape != g_shape_filter) continue;
    shapes.insert(f.g_shape);
    double value = 0.0;
    switch (outcome) {
      case MetaOutcome::LogRmse: value = r.rmse; break;
      case MetaOutcome::LogIsel: value = r.isel; break;
      case MetaOutcome::LogMselp: value = r.mselp; break;
    }
    if (!(value > 0.0)) continue;  // log undefined; exact-zero losses drop out
    MetaRow row;
    row.levels = {f.j, f.n_bar, f.cv, f.sigma, r.model, r.method};
    row.y = std::log(value);
    row.cluster_id = r.scenario_id + "#" + std::to_string(r.rep);
    rows.push_back(std::move(row));
  }
  if (shapes.size() > 1)
    throw InputError(
        "results mix several true G shapes; pass a g_shape filter");
  if (rows.empty()) throw InputError("no usable meta-model rows");
  return rows;
}

inline MetaFit fit_metamodel(const std::vector<LossReport>& losses,
                             MetaOutcome outcome,
                             const std::string& g_shape_filter = "") {
  auto rows = meta_rows_from_losses(losses, outcome, g_shape_filter);
  auto factors =
      infer_factors(meta_factor_names(), rows, meta_reference_levels());
  return fit_ols_crse(build_design(factors, rows));
}

// ---- SVG ---------------------------------------------------------------

// Minimal standalone bar chart; enough to eyeball a pmf or histogram.
inline void write_svg_bars(std::ostream& out, const std::string& title,
                           const std::vector<double>& heights,
                           const std::vector<std::string>& labels) {
  const double w = 640.0, h = 400.0, ml = 50.0, mb = 40.0, mt = 36.0,
               mr = 12.0;
  double hmax = 0.0;
  for (double v : heights) hmax = std::max(hmax, v);
  if (hmax <= 0.0) hmax = 1.0;
  double plot_w = w - ml - mr, plot_h = h - mt - mb;
  double bw = plot_w / static_cast<double>(heights.size());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h
      << "\">\n";
  out << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
      << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < heights.size(); ++i) {
    double bh = plot_h * heights[i] / hmax;
    out << "<rect x=\"" << ml + bw * static_cast<double>(i) + 1 << "\" y=\""
        << h - mb - bh << "\" width=\"" << std::max(1.0, bw - 2)
        << "\" height=\"" << bh << "\" fill=\"#4878a8\"/>\n";
  }
  std::size_t stride = std::max<std::size_t>(1, heights.size() / 10);
  for (std::size_t i = 0; i < labels.size(); i += stride) {
    out << "<text x=\"" << ml + bw * (static_cast<double>(i) + 0.5)
        << "\" y=\"" << h - mb + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << labels[i] << "</text>\n";
  }
  out << "<text x=\"" << ml - 8 << "\" y=\"" << mt + 10
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"10\">"
      << csv::fmt(hmax) << "</text>\n";
  out << "</svg>\n";
}

// ---- plot-data emitters --------------------------------------------------

// Per-factor-level multiplicative changes (relative to the all-reference
// design cell with the same model/method), one meta-model per outcome.
inline void emit_factor_effects(const std::vector<LossReport>& losses,
                                const std::string& out_dir,
                                const std::string& g_shape_filter = "") {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "factor_effects.csv");
  csv::Writer w(out);
  w.row("outcome", "factor", "level", "model", "method", "mult_change",
        "lo", "hi");
  for (MetaOutcome oc :
       {MetaOutcome::LogRmse, MetaOutcome::LogIsel, MetaOutcome::LogMselp}) {
    MetaFit fit = fit_metamodel(losses, oc, g_shape_filter);
    const auto& factors = fit.factors;
    auto level_of = [&](const std::string& name) -> const FactorSpec& {
      for (const auto& f : factors)
        if (f.name == name) return f;
      throw InputError("missing factor " + name);
    };
    const auto& models = level_of("model");
    const auto& methods = level_of("method");
    for (std::size_t fi = 0; fi < 4; ++fi) {  // design factors only
      const auto& fac = factors[fi];
      for (std::size_t li = 1; li < fac.levels.size(); ++li) {
        for (const auto& model : models.levels) {
          for (const auto& method : methods.levels) {
            std::vector<std::string> base(6), shifted(6);
            for (std::size_t k = 0; k < 4; ++k)
              base[k] = factors[k].levels[0];
            base[4] = model;
            base[5] = method;
            shifted = base;
            shifted[fi] = fac.levels[li];
            Eigen::RowVectorXd x1 =
                detail::encode_row(fit.factors, shifted, nullptr);
            Eigen::RowVectorXd x0 =
                detail::encode_row(fit.factors, base, nullptr);
            Eigen::RowVectorXd dx = x1 - x0;
            double delta = dx * fit.beta;
            double var = dx * fit.vcov * dx.transpose();
            double half = 1.96 * std::sqrt(std::max(0.0, var));
            w.row(to_string(oc), fac.name, fac.levels[li], model, method,
                  std::exp(delta), std::exp(delta - half),
                  std::exp(delta + half));
          }
        }
      }
    }
  }
}

// Winning (model, method) per design cell and outcome, with the cell's
// average realized informativeness.
inline void emit_best_combo(const std::vector<LossReport>& losses,
                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  struct CellStats {
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> sums;
    double i_sum = 0.0;
    int i_n = 0;
  };
  std::map<std::string, std::array<CellStats, 3>> cells;
  for (const auto& r : losses) {
    auto& c = cells[r.scenario_id];
    double vals[3] = {r.rmse, r.isel, r.mselp};
    for (int k = 0; k < 3; ++k) {
      auto& s = c[k].sums[{r.model, r.method}];
      s.first += vals[k];
      s.second += 1;
    }
    c[0].i_sum += r.informativeness;
    c[0].i_n += 1;
  }
  std::ofstream out(fs::path(out_dir) / "best_combo.csv");
  csv::Writer w(out);
  w.row("outcome", "scenario_id", "J", "n_bar", "cv", "sigma", "g_shape",
        "best_model", "best_method", "mean_loss", "mean_I");
  const char* names[3] = {"rmse", "isel", "mselp"};
  for (const auto& [id, stats] : cells) {
    auto f = parse_scenario_factors(id);
    double mean_i =
        stats[0].i_n > 0 ? stats[0].i_sum / stats[0].i_n : 0.0;
    for (int k = 0; k < 3; ++k) {
      std::string bm, bmeth;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [combo, s] : stats[k].sums) {
        double mean = s.first / s.second;
        if (mean < best) {
          best = mean;
          bm = combo.first;
          bmeth = combo.second;
        }
      }
      w.row(names[k], id, f.j, f.n_bar, f.cv, f.sigma, f.g_shape, bm, bmeth,
            best, mean_i);
    }
  }
}

// Histograms of site estimates per (model, method) group, as tidy CSV
// plus one standalone SVG per group.
inline void emit_edf_hist(const std::vector<SiteEstimates>& groups,
                          const std::vector<double>& truth,
                          const std::string& out_dir, int bins = 20) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : groups)
    for (double v : g.estimates) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  for (double v : truth) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  double width = (hi - lo) / bins;
  std::ofstream out(fs::path(out_dir) / "edf_hist.csv");
  csv::Writer w(out);
  w.row("model", "method", "bin_lo", "bin_hi", "count");
  auto histogram = [&](const std::vector<double>& values) {
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
      int b = static_cast<int>((v - lo) / width);
      b = std::clamp(b, 0, bins - 1);
      counts[static_cast<std::size_t>(b)] += 1.0;
    }
    return counts;
  };
  auto emit_group = [&](const std::string& model, const std::string& method,
                        const std::vector<double>& values) {
    auto counts = histogram(values);
    std::vector<std::string> labels;
    for (int b = 0; b < bins; ++b) {
      w.row(model, method, lo + width * b, lo + width * (b + 1),
            counts[static_cast<std::size_t>(b)]);
      labels.push_back(csv::fmt(std::round((lo + width * (b + 0.5)) * 100) /
                                100));
    }
    std::ofstream svg(fs::path(out_dir) /
                      ("edf_hist_" + model + "_" + method + ".svg"));
    write_svg_bars(svg, model + " / " + method, counts, labels);
  };
  for (const auto& g : groups)
    emit_group(to_string(g.model), to_string(g.method), g.estimates);
  if (!truth.empty()) emit_group("truth", "truth", truth);
}

// Induced cluster-count priors for a set of Gamma(a, b) choices.
inline void emit_cluster_prior(int J,
                               const std::vector<GammaHyper>& hypers,
                               const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "cluster_prior.csv");
  csv::Writer w(out);
  w.row("J", "a", "b", "K", "prob");
  for (const auto& h : hypers) {
    auto p = cluster_prior(J, h.a, h.b);
    std::vector<std::string> labels;
    for (int k = 1; k <= J; ++k) {
      w.row(static_cast<long long>(J), h.a, h.b, static_cast<long long>(k),
            p.pmf[static_cast<std::size_t>(k - 1)]);
      labels.push_back(std::to_string(k));
    }
    std::ofstream svg(fs::path(out_dir) /
                      ("cluster_prior_a" + csv::fmt(h.a) + "_b" +
                       csv::fmt(h.b) + ".svg"));
    write_svg_bars(svg,
                   "Pr(K | J=" + std::to_string(J) + ", a=" + csv::fmt(h.a) +
                       ", b=" + csv::fmt(h.b) + ")",
                   p.pmf, labels);
  }
}

}  // namespace mst
