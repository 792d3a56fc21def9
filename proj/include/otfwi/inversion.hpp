//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otfwi/core.hpp"
#include "otfwi/lbfgs.hpp"
#include "otfwi/log.hpp"
#include "otfwi/misfit.hpp"
#include "otfwi/parallel.hpp"
#include "otfwi/wave_solver.hpp"
#include "otfwi/wavelet.hpp"

namespace otfwi {

/// One source firing: wavelet, source position and receiver spread.
struct Shot {
  Position source;
  std::vector<Position> receivers;
  Trace wavelet;
};

struct AssemblyOptions {
  Boundaries boundaries;
  /// Nonzero entries may be updated; empty means no mask.
  std::vector<unsigned char> update_mask;
  std::size_t threads = 1;
  /// 0 keeps the full forward field; k > 0 recomputes it from restart
  /// pairs stored every k steps.
  std::size_t checkpoint_stride = 0;
};

struct GradientResult {
  double value = 0.0;
  GradientField gradient;
  std::vector<double> per_shot_values;
  std::size_t degenerate_traces = 0;
};

namespace detail {

  [[noreturn]] inline void rethrow_for_shot(std::exception_ptr ep,
                                            std::size_t shot) {
    const std::string tag = "shot " + std::to_string(shot) + ": ";
    try {
      std::rethrow_exception(ep);
    } catch (const StabilityError &e) {
      throw StabilityError(tag + e.what(), e.max_dt());
    } catch (const DivergenceError &e) {
      throw DivergenceError(tag + e.what(), e.step());
    } catch (const DegenerateError &e) {
      throw DegenerateError(tag + e.what());
    } catch (const NumericalError &e) {
      throw NumericalError(tag + e.what());
    } catch (const AxisMismatchError &e) {
      throw AxisMismatchError(tag + e.what());
    } catch (const GeometryError &e) {
      throw GeometryError(tag + e.what());
    } catch (const ValidationError &e) {
      throw ConfigError(tag + e.what());
    }
  }

  struct ShotGradient {
    double value = 0.0;
    std::size_t degenerate = 0;
    std::optional<GradientField> gradient;
  };

  inline ShotGradient shot_gradient(const VelocityModel &model,
                                    const Shot &shot,
                                    const ShotGather &observed,
                                    const MisfitSpec &misfit,
                                    const AssemblyOptions &opts) {
    SolverOptions so;
    so.boundaries = opts.boundaries;
    so.keep_wavefield = opts.checkpoint_stride == 0;
    so.checkpoint_stride = opts.checkpoint_stride;
    ForwardResult fwd = forward_solve(model, shot.wavelet, shot.source,
                                      shot.receivers, so);
    MisfitReport rep = evaluate_misfit(fwd.gather, observed, misfit);
    ShotGradient out;
    out.value = rep.value;
    out.degenerate = rep.degenerate_traces;
    AdjointSource adj{shot.receivers, shot.wavelet.axis,
                      std::move(rep.adjoint_sources)};
    if (fwd.wavefield) {
      const Wavefield v = adjoint_solve(model, adj, opts.boundaries);
      out.gradient = imaging_gradient(*fwd.wavefield, v, model, opts.boundaries);
    } else {
      out.gradient = checkpointed_gradient(model, shot.wavelet, shot.source,
                                           *fwd.checkpoints, adj,
                                           opts.boundaries);
    }
    return out;
  }

} // namespace detail

/// Misfit value and dJ/dm summed over shots. Shots are evaluated in
/// parallel; the sum is always taken in shot order.
inline GradientResult assemble_gradient(const VelocityModel &model,
                                        const std::vector<Shot> &shots,
                                        const std::vector<ShotGather> &observed,
                                        const MisfitSpec &misfit,
                                        const AssemblyOptions &opts = {}) {
  misfit.validate();
  if (observed.size() != shots.size())
    throw GeometryError("assemble_gradient: one observed gather per shot");
  const Grid2D &grid = model.grid();
  if (!opts.update_mask.empty() && opts.update_mask.size() != grid.size())
    throw ConfigError("assemble_gradient: update mask does not match grid");
  for (std::size_t s = 0; s < shots.size(); ++s) {
    if (observed[s].receivers != shots[s].receivers)
      throw GeometryError("assemble_gradient: shot " + std::to_string(s)
                          + " observed gather does not match its receivers");
    resample_guard(observed[s].axis, shots[s].wavelet.axis);
  }

  std::vector<detail::ShotGradient> parts(shots.size());
  std::vector<std::exception_ptr> errors(shots.size());
  parallel_for(shots.size(), opts.threads, [&](std::size_t s) {
    try {
      parts[s] = detail::shot_gradient(model, shots[s], observed[s], misfit,
                                       opts);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  });
  for (std::size_t s = 0; s < shots.size(); ++s)
    if (errors[s])
      detail::rethrow_for_shot(errors[s], s);

  GradientResult out{0.0, GradientField(grid), {}, 0};
  for (const auto &p : parts) {
    out.value += p.value;
    out.per_shot_values.push_back(p.value);
    out.degenerate_traces += p.degenerate;
    out.gradient += *p.gradient;
  }
  if (!opts.update_mask.empty())
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!opts.update_mask[i])
        out.gradient.values[i] = 0.0;
  return out;
}

/// Synthetic data for every shot.
inline std::vector<ShotGather> synthesize(const VelocityModel &model,
                                          const std::vector<Shot> &shots,
                                          const Boundaries &bc = {},
                                          std::size_t threads = 1) {
  std::vector<std::optional<ShotGather>> out(shots.size());
  SolverOptions so;
  so.boundaries = bc;
  so.keep_wavefield = false;
  parallel_for(shots.size(), threads, [&](std::size_t s) {
    out[s] = forward_solve(model, shots[s].wavelet, shots[s].source,
                           shots[s].receivers, so)
                 .gather;
  });
  std::vector<ShotGather> gathers;
  gathers.reserve(shots.size());
  for (auto &g : out)
    gathers.push_back(std::move(*g));
  return gathers;
}

struct InversionConfig {
  MisfitSpec misfit;
  std::size_t max_iterations = 50;
  std::size_t lbfgs_memory = 5;
  double vmin = 1400.0;
  double vmax = 2860.0;
  std::vector<unsigned char> update_mask;
  /// Stop when the relative misfit decrease of an accepted step falls
  /// below this.
  double convergence_tol = 1e-8;
  /// First step (empty history) moves max |dm| by this fraction of max m.
  double first_step_fraction = 0.03;
  Boundaries boundaries;
  std::size_t threads = 1;
  std::size_t checkpoint_stride = 0;
  LineSearchOptions line_search;

  void validate() const {
    misfit.validate();
    if (max_iterations > 100000)
      throw ConfigError("max_iterations is unreasonably large");
    if (lbfgs_memory == 0)
      throw ConfigError("lbfgs_memory must be at least 1");
    if (!(vmin > 0.0) || !(vmin < vmax))
      throw ConfigError("velocity bounds must satisfy 0 < vmin < vmax");
    if (!(convergence_tol >= 0.0))
      throw ConfigError("convergence_tol must be nonnegative");
    if (!(first_step_fraction > 0.0))
      throw ConfigError("first_step_fraction must be positive");
  }

  AssemblyOptions assembly() const {
    return {boundaries, update_mask, threads, checkpoint_stride};
  }

  Box box(std::size_t n) const {
    return {std::vector<double>(n, 1.0 / (vmax * vmax)),
            std::vector<double>(n, 1.0 / (vmin * vmin))};
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  double misfit = 0.0;
  double step_length = 0.0;
  std::size_t evaluations = 0;
};

struct InversionState {
  VelocityModel model;
  GradientField gradient;
  double misfit = 0.0;
  std::vector<double> misfit_history;
  LbfgsHistory lbfgs_pairs;
  std::vector<IterationRecord> records;
  std::size_t iteration = 0;
  bool converged = false;
  bool stagnated = false;
};

/// Objective over models: misfit value and gradient.
using ModelObjective = std::function<GradientResult(const VelocityModel &)>;

inline ModelObjective make_objective(const std::vector<Shot> &shots,
                                     const std::vector<ShotGather> &observed,
                                     const InversionConfig &config) {
  return [&shots, &observed, &config](const VelocityModel &m) {
    return assemble_gradient(m, shots, observed, config.misfit,
                             config.assembly());
  };
}

inline InversionState initial_state(VelocityModel model,
                                    const InversionConfig &config,
                                    const ModelObjective &objective) {
  config.validate();
  auto m = std::vector<double>(model.slowness_sq().begin(),
                               model.slowness_sq().end());
  config.box(m.size()).project(m);
  VelocityModel start(model.grid(), std::move(m));
  GradientResult g = objective(start);
  InversionState st{start,     std::move(g.gradient),
                    g.value,   {g.value},
                    LbfgsHistory(config.lbfgs_memory), {}, 0, false, false};
  st.records.push_back({0, g.value, 0.0, 1});
  if (g.value == 0.0)
    st.converged = true;
  return st;
}

/// One projected l-BFGS iteration on the squared slowness.
inline InversionState lbfgs_step(InversionState state,
                                 const InversionConfig &config,
                                 const ModelObjective &objective) {
  const Grid2D grid = state.model.grid();
  const std::size_t n = grid.size();
  const Box box = config.box(n);
  const std::span<const double> x = state.model.slowness_sq();

  const auto pg = projected_gradient(x, state.gradient.values, box);
  double pgmax = 0.0;
  for (double v : pg)
    pgmax = std::max(pgmax, std::abs(v));
  if (pgmax == 0.0) {
    state.converged = true;
    return state;
  }

  std::optional<GradientResult> last;
  auto eval = [&](std::span<const double> trial) {
    VelocityModel m(grid, std::vector<double>(trial.begin(), trial.end()));
    GradientResult r = objective(m);
    Evaluation e{r.value, r.gradient.values};
    last = std::move(r);
    return e;
  };
  const Evaluation here{state.misfit, state.gradient.values};
  // Bound-pinned cells are frozen; the quasi-Newton step moves the rest.
  auto search = [&]() {
    std::vector<double> d = state.lbfgs_pairs.direction(pg);
    for (std::size_t i = 0; i < n; ++i)
      if (pg[i] == 0.0 && state.gradient.values[i] != 0.0)
        d[i] = 0.0;
    if (detail::dot_product(d, pg) >= 0.0) {
      state.lbfgs_pairs.clear();
      d = state.lbfgs_pairs.direction(pg);
    }
    double alpha0 = 1.0;
    if (state.lbfgs_pairs.size() == 0) {
      double dmax = 0.0;
      for (double v : d)
        dmax = std::max(dmax, std::abs(v));
      const double mmax = *std::max_element(x.begin(), x.end());
      alpha0 = config.first_step_fraction * mmax / dmax;
    }
    return projected_backtracking(eval, x, here, d, alpha0, box,
                                  config.line_search);
  };
  LineSearchResult ls = search();
  if (!ls.accepted && state.lbfgs_pairs.size() > 0) {
    const std::size_t spent = ls.evaluations;
    log::info("line search failed on the quasi-Newton direction; retrying "
              "along the projected gradient");
    state.lbfgs_pairs.clear();
    ls = search();
    ls.evaluations += spent;
  }
  ++state.iteration;
  if (!ls.accepted) {
    state.stagnated = true;
    log::info("iteration " + std::to_string(state.iteration)
              + ": line search stagnated");
    state.records.push_back({state.iteration, state.misfit, 0.0,
                             ls.evaluations});
    return state;
  }
  // The accepted trial was the last evaluation.
  std::vector<double> s(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = ls.x[i] - x[i];
    y[i] = ls.eval.gradient[i] - state.gradient.values[i];
  }
  state.lbfgs_pairs.push(std::move(s), std::move(y));
  const double previous = state.misfit;
  state.model = VelocityModel(grid, std::move(ls.x));
  state.gradient = std::move(last->gradient);
  state.misfit = ls.eval.value;
  state.misfit_history.push_back(state.misfit);
  state.records.push_back({state.iteration, state.misfit, ls.alpha,
                           ls.evaluations});
  if (state.misfit == 0.0
      || (previous - state.misfit) <= config.convergence_tol * previous)
    state.converged = true;
  return state;
}

using IterationObserver = std::function<void(const InversionState &)>;

/// Runs l-BFGS until the iteration budget, convergence or stagnation.
/// The observer sees the initial state and every later state.
inline InversionState invert(const VelocityModel &initial,
                             const ModelObjective &objective,
                             const InversionConfig &config,
                             const IterationObserver &observer = {}) {
  InversionState st = initial_state(initial, config, objective);
  if (observer)
    observer(st);
  while (st.iteration < config.max_iterations && !st.converged
         && !st.stagnated) {
    st = lbfgs_step(std::move(st), config, objective);
    log::info("iteration " + std::to_string(st.iteration) + " misfit "
              + std::to_string(st.misfit));
    if (observer)
      observer(st);
  }
  return st;
}

inline InversionState invert(const VelocityModel &initial,
                             const std::vector<Shot> &shots,
                             const std::vector<ShotGather> &observed,
                             const InversionConfig &config,
                             const IterationObserver &observer = {}) {
  return invert(initial, make_objective(shots, observed, config), config,
                observer);
}

/// Root-mean-square velocity difference over cells with nonzero `where`
/// (all cells when empty).
inline double velocity_rmse(const VelocityModel &a, const VelocityModel &b,
                            std::span<const unsigned char> where = {}) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.grid().size(); ++i) {
    if (!where.empty() && !where[i])
      continue;
    const double d = a.velocity(i) - b.velocity(i);
    acc += d * d;
    ++count;
  }
  return count == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(count));
}

/// Pearson correlation of two fields over cells with nonzero `where`.
inline double spatial_correlation(std::span<const double> a,
                                  std::span<const double> b,
                                  std::span<const unsigned char> where = {}) {
  double ma = 0.0, mb = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!where.empty() && !where[i])
      continue;
    ma += a[i];
    mb += b[i];
    ++count;
  }
  if (count == 0)
    return 0.0;
  ma /= static_cast<double>(count);
  mb /= static_cast<double>(count);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!where.empty() && !where[i])
      continue;
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0)
    return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Camembert experiment

struct CamembertSpec {
  Grid2D grid{100, 100, 10.0, 10.0};
  double background_velocity = 2000.0;
  double anomaly_velocity = 2200.0;
  Position center{495.0, 495.0};
  double radius = 250.0;

  std::size_t sources = 8;
  std::size_t receivers = 96;
  /// Acquisition depth as a node row.
  std::size_t acquisition_row = 2;
  double peak_frequency = 10.0;
  TimeAxis axis{501, 0.002};

  /// Rows at the top that are never updated (acquisition footprint).
  std::size_t masked_rows = 5;
  double vmin = 1400.0;
  double vmax = 2860.0;
  std::size_t iterations = 50;
  std::size_t lbfgs_memory = 5;
  Boundaries boundaries;

  void validate() const {
    const double ex = grid.dx() * static_cast<double>(grid.nx() - 1);
    const double ez = grid.dz() * static_cast<double>(grid.nz() - 1);
    if (!(radius > 0.0) || !(radius < 0.5 * std::min(ex, ez)))
      throw ConfigError("camembert: radius must be below half the smaller "
                        "domain extent");
    if (grid.nx() > 120 || grid.nz() > 120)
      throw ConfigError("camembert: grid must be at most 120 x 120");
    if (!(background_velocity > 0.0) || !(anomaly_velocity > 0.0))
      throw ConfigError("camembert: velocities must be positive");
    if (sources == 0 || receivers == 0)
      throw ConfigError("camembert: need at least one source and receiver");
    if (acquisition_row >= grid.nz())
      throw ConfigError("camembert: acquisition row outside the grid");
    if (masked_rows >= grid.nz())
      throw ConfigError("camembert: mask covers the whole grid");
  }

  std::vector<unsigned char> disk_mask() const {
    std::vector<unsigned char> out(grid.size(), 0);
    for (std::size_t iz = 0; iz < grid.nz(); ++iz)
      for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
        const Position p = grid.position(ix, iz);
        const double r = std::hypot(p.x - center.x, p.z - center.z);
        out[grid.index(ix, iz)] = r <= radius ? 1 : 0;
      }
    return out;
  }

  std::vector<unsigned char> update_mask() const {
    std::vector<unsigned char> out(grid.size(), 1);
    for (std::size_t iz = 0; iz < masked_rows; ++iz)
      for (std::size_t ix = 0; ix < grid.nx(); ++ix)
        out[grid.index(ix, iz)] = 0;
    return out;
  }

  VelocityModel true_model() const {
    const auto disk = disk_mask();
    std::vector<double> v(grid.size(), background_velocity);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (disk[i])
        v[i] = anomaly_velocity;
    return VelocityModel::from_velocity(grid, v);
  }

  VelocityModel initial_model() const {
    return VelocityModel::homogeneous(grid, background_velocity);
  }

  std::vector<Shot> shots() const {
    const Trace w = ricker(RickerSpec{peak_frequency, std::nullopt, 1.0}, axis);
    const double z = grid.origin().z
                     + grid.dz() * static_cast<double>(acquisition_row);
    const double width = grid.dx() * static_cast<double>(grid.nx() - 1);
    std::vector<Position> rcv;
    for (std::size_t r = 0; r < receivers; ++r) {
      const double frac = receivers == 1 ? 0.5
                                         : static_cast<double>(r)
                                               / static_cast<double>(receivers - 1);
      rcv.push_back({grid.origin().x + frac * width, z});
    }
    std::vector<Shot> out;
    for (std::size_t s = 0; s < sources; ++s) {
      const double frac = (static_cast<double>(s) + 0.5)
                          / static_cast<double>(sources);
      out.push_back({{grid.origin().x + frac * width, z}, rcv, w});
    }
    return out;
  }
};

struct CamembertRun {
  std::string name;
  MisfitSpec misfit;
  GradientField first_gradient;
  VelocityModel final_model;
  std::vector<IterationRecord> records;
  std::vector<double> rmse_history;
  bool stagnated = false;
  bool converged = false;
};

struct CamembertReport {
  VelocityModel true_model;
  VelocityModel initial_model;
  double initial_rmse = 0.0;
  std::vector<CamembertRun> runs;
};

struct NamedSpec {
  std::string name;
  MisfitSpec spec;
};

using SnapshotSink =
    std::function<void(const std::string &run, const InversionState &)>;

inline CamembertReport run_camembert(const CamembertSpec &spec,
                                     const std::vector<NamedSpec> &misfits,
                                     std::size_t threads = 1,
                                     const SnapshotSink &sink = {}) {
  spec.validate();
  const VelocityModel truth = spec.true_model();
  const VelocityModel start = spec.initial_model();
  const auto shots = spec.shots();
  const auto observed = synthesize(truth, shots, spec.boundaries, threads);

  CamembertReport rep{truth, start, velocity_rmse(truth, start), {}};
  for (const auto &m : misfits) {
    InversionConfig cfg;
    cfg.misfit = m.spec;
    cfg.max_iterations = spec.iterations;
    cfg.lbfgs_memory = spec.lbfgs_memory;
    cfg.vmin = spec.vmin;
    cfg.vmax = spec.vmax;
    cfg.update_mask = spec.update_mask();
    cfg.boundaries = spec.boundaries;
    cfg.threads = threads;

    std::optional<GradientField> first;
    std::vector<double> rmse;
    const auto objective = make_objective(shots, observed, cfg);
    const InversionState fin = invert(
        start, objective, cfg, [&](const InversionState &st) {
          if (!first)
            first = st.gradient;
          if (rmse.size() < st.records.size())
            rmse.push_back(velocity_rmse(truth, st.model));
          if (sink)
            sink(m.name, st);
        });
    rep.runs.push_back({m.name, m.spec, *first, fin.model, fin.records,
                        std::move(rmse), fin.stagnated, fin.converged});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Layered stand-in for the Marmousi acquisition

struct MarmousiLite {
  VelocityModel model;
  VelocityModel initial;
  std::vector<Shot> shots;
};

/// 60 x 180 layered model at 20 m spacing with gently dipping interfaces,
/// 11 sources and a full top receiver spread, 15 Hz Ricker high-passed at
/// 2 Hz. The initial model is a linear-in-depth gradient.
inline MarmousiLite marmousi_lite(TimeAxis axis = {1501, 0.0015}) {
  const Grid2D grid(180, 60, 20.0, 20.0);
  const std::vector<double> layer_v{1500.0, 1700.0, 1900.0, 2300.0,
                                    2100.0, 2700.0, 3200.0};
  const std::vector<double> layer_z{60.0, 260.0, 420.0, 560.0, 700.0, 900.0};
  std::vector<double> v(grid.size()), v0(grid.size());
  const double zmax = grid.dz() * static_cast<double>(grid.nz() - 1);
  for (std::size_t iz = 0; iz < grid.nz(); ++iz)
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      const Position p = grid.position(ix, iz);
      std::size_t layer = 0;
      for (std::size_t k = 0; k < layer_z.size(); ++k) {
        const double dip = (k == 0) ? 0.0
                                    : 60.0 * std::sin(2.0 * std::numbers::pi
                                                      * p.x / 2400.0
                                                      + static_cast<double>(k));
        if (p.z >= layer_z[k] + dip)
          layer = k + 1;
      }
      v[grid.index(ix, iz)] = layer_v[layer];
      v0[grid.index(ix, iz)] = p.z < layer_z[0]
                                   ? layer_v[0]
                                   : 1700.0 + 1300.0 * p.z / zmax;
    }
  Trace w = ricker(RickerSpec{15.0, std::nullopt, 1.0}, axis);
  w = highpass(w, 2.0);
  const double z = grid.dz();
  std::vector<Position> rcv;
  for (std::size_t ix = 0; ix < grid.nx(); ++ix)
    rcv.push_back({grid.dx() * static_cast<double>(ix), z});
  std::vector<Shot> shots;
  const double width = grid.dx() * static_cast<double>(grid.nx() - 1);
  for (std::size_t s = 0; s < 11; ++s)
    shots.push_back({{width * (static_cast<double>(s) + 0.5) / 11.0, z}, rcv, w});
  return {VelocityModel::from_velocity(grid, v),
          VelocityModel::from_velocity(grid, v0), std::move(shots)};
}

} // namespace otfwi
