//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

// Experiment recipes shared by the command-line tool and the acceptance
// runner, so both emit the same artifacts.

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "otfwi/inversion.hpp"
#include "otfwi/io.hpp"
#include "otfwi/sensitivity.hpp"
#include "otfwi/transport.hpp"

namespace otfwi::recipes {

namespace fs = std::filesystem;
using io::json;

// ---------------------------------------------------------------------------
// Shift sensitivity

struct SensitivitySummary {
  std::string misfit;
  std::size_t points = 0;
  std::size_t local_minima = 0;
  bool convex = false;
  double argmin_shift = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
};

inline json to_json(const SensitivitySummary &s) {
  return {{"misfit", s.misfit},
          {"points", s.points},
          {"local_minima", s.local_minima},
          {"convex_flag", s.convex},
          {"argmin_shift", s.argmin_shift},
          {"min_value", s.min_value},
          {"max_value", s.max_value}};
}

inline SensitivitySummary summarize(const std::string &name,
                                    const std::vector<CurvePoint> &c) {
  SensitivitySummary s{name, c.size(), count_local_minima(c), is_convex(c),
                       0.0, 0.0, 0.0};
  if (c.empty())
    return s;
  std::size_t k = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].value < c[k].value)
      k = i;
    s.max_value = std::max(s.max_value, c[i].value);
  }
  s.argmin_shift = c[k].shift;
  s.min_value = c[k].value;
  return s;
}

/// Two-Ricker curve for a named misfit, written as curve CSV + summary JSON.
inline SensitivitySummary two_ricker_sensitivity(const std::string &misfit,
                                                 double lo, double hi,
                                                 std::size_t steps,
                                                 const fs::path &curve_csv,
                                                 const fs::path &summary_json,
                                                 const TwoRickerSpec &base = {}) {
  const MisfitSpec spec = parse_misfit(misfit);
  const auto curve = two_ricker_curve(base, shift_grid(lo, hi, steps), spec);
  std::vector<double> sh, val;
  for (const auto &p : curve) {
    sh.push_back(p.shift);
    val.push_back(p.value);
  }
  io::write_curve(curve_csv, sh, val);
  const SensitivitySummary s = summarize(misfit, curve);
  io::write_json(summary_json, to_json(s));
  return s;
}

// ---------------------------------------------------------------------------
// Signed-W1 pathology

inline json to_json(const SignedW1Result &r) {
  return {{"value", r.value},
          {"f_plus_mass", r.f_plus_mass},
          {"f_plus_to_g_plus", r.f_plus_to_g_plus},
          {"f_plus_to_f_minus", r.f_plus_to_f_minus},
          {"self_cancelling", r.f_plus_to_f_minus > 0.5}};
}

inline SignedW1Result demo_w1(const fs::path &dir, const W1Demo &demo) {
  fs::create_directories(dir);
  std::vector<double> t(demo.f.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = demo.f.axis.time(i);
  io::write_columns(dir / "signals.csv", {"time", "f", "g"},
                    {t, demo.f.samples, demo.g.samples});
  const SignedW1Result r = w1_signed_diagnostic(demo.f, demo.g);
  io::write_json(dir / "coupling.json", to_json(r));
  return r;
}

// ---------------------------------------------------------------------------
// Inversion run artifacts

/// Writes model_iter_k.bin snapshots, gradient_iter_1.bin, history.csv and
/// summary.json for one inversion run.
class RunRecorder {
public:
  RunRecorder(fs::path dir, std::optional<VelocityModel> truth = {},
              std::size_t snapshot_every = 1)
      : dir_(std::move(dir)), truth_(std::move(truth)),
        every_(std::max<std::size_t>(snapshot_every, 1)) {
    fs::create_directories(dir_);
  }

  void observe(const InversionState &st) {
    if (st.records.size() <= rows_.size())
      return; // stagnated step already recorded
    const IterationRecord &r = st.records.back();
    const double rmse = truth_ ? velocity_rmse(*truth_, st.model)
                               : std::numeric_limits<double>::quiet_NaN();
    rows_.push_back({static_cast<double>(r.iteration), r.misfit, rmse,
                     r.step_length});
    if (st.iteration == 0)
      io::write_grid_file(dir_ / "gradient_iter_1.bin", st.model.grid(),
                          st.gradient.values);
    if (st.iteration % every_ == 0)
      write_snapshot(st.model, st.iteration);
    // Rewritten every iteration so a run that dies keeps its history.
    write_history();
  }

  json finish(const InversionState &st, json extra = json::object()) {
    extra["final_misfit"] = st.misfit;
    extra["initial_misfit"] = st.misfit_history.front();
    extra["converged"] = st.converged;
    extra["stagnated"] = st.stagnated;
    return finish(st.model, st.iteration, std::move(extra));
  }

  /// Final snapshot, history.csv and summary.json (extra keys merged in).
  json finish(const VelocityModel &model, std::size_t iteration, json extra) {
    if (iteration % every_ != 0)
      write_snapshot(model, iteration);
    write_history();
    json s = std::move(extra);
    s["iterations"] = iteration;
    if (truth_)
      s["final_rmse"] = velocity_rmse(*truth_, model);
    io::write_json(dir_ / "summary.json", s);
    return s;
  }

  const std::vector<std::array<double, 4>> &rows() const { return rows_; }

private:
  void write_history() const {
    std::vector<std::vector<double>> cols(4);
    for (const auto &row : rows_)
      for (std::size_t c = 0; c < 4; ++c)
        cols[c].push_back(row[c]);
    io::write_columns(dir_ / "history.csv",
                      {"iteration", "misfit", "rmse", "step_length"}, cols);
  }

  void write_snapshot(const VelocityModel &model, std::size_t iteration) {
    io::write_model(dir_ / ("model_iter_" + std::to_string(iteration) + ".bin"),
                    model);
  }

  fs::path dir_;
  std::optional<VelocityModel> truth_;
  std::size_t every_;
  std::vector<std::array<double, 4>> rows_;
};

// ---------------------------------------------------------------------------
// Camembert

struct CamembertOutcome {
  CamembertReport report;
  /// Correlation of the first gradients of the first two runs inside the
  /// disk (NaN with fewer than two runs).
  double first_gradient_correlation = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> final_rmse;
};

inline CamembertOutcome camembert(const CamembertSpec &spec,
                                  const std::vector<NamedSpec> &misfits,
                                  const fs::path &dir, std::size_t threads = 1,
                                  std::size_t snapshot_every = 1) {
  fs::create_directories(dir);
  const VelocityModel truth = spec.true_model();
  io::write_model(dir / "true_model.bin", truth);
  io::write_model(dir / "initial_model.bin", spec.initial_model());

  std::vector<RunRecorder> recorders;
  for (const auto &m : misfits)
    recorders.emplace_back(dir / m.name, truth, snapshot_every);
  std::size_t current = 0;
  CamembertOutcome out{run_camembert(
      spec, misfits, threads,
      [&](const std::string &name, const InversionState &st) {
        while (misfits[current].name != name)
          ++current;
        recorders[current].observe(st);
      }),
                       std::numeric_limits<double>::quiet_NaN(), {}};

  const auto disk = spec.disk_mask();
  json summary;
  summary["initial_rmse"] = out.report.initial_rmse;
  summary["runs"] = json::array();
  for (std::size_t k = 0; k < out.report.runs.size(); ++k) {
    const CamembertRun &run = out.report.runs[k];
    json extra{{"misfit", run.name},
               {"initial_misfit", run.records.front().misfit},
               {"final_misfit", run.records.back().misfit},
               {"converged", run.converged},
               {"stagnated", run.stagnated}};
    json s = recorders[k].finish(run.final_model, run.records.back().iteration,
                                 std::move(extra));
    out.final_rmse.push_back(s["final_rmse"].get<double>());
    summary["runs"].push_back(s);
  }
  if (out.report.runs.size() >= 2) {
    out.first_gradient_correlation = spatial_correlation(
        out.report.runs[0].first_gradient.values,
        out.report.runs[1].first_gradient.values, disk);
    summary["first_gradient_correlation"] = out.first_gradient_correlation;
    summary["correlation_pair"] = {out.report.runs[0].name,
                                   out.report.runs[1].name};
  }
  io::write_json(dir / "summary.json", summary);
  return out;
}

} // namespace otfwi::recipes
