//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "otfwi/otfwi.hpp"

using namespace otfwi;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Globals {
  std::optional<std::size_t> threads;
  std::uint64_t seed = 0;
  int verbose = 0;
  std::size_t resolved = 1;

  std::size_t thread_count() const { return resolved; }
};

// Config helpers --------------------------------------------------------------

template <class T>
T get_or(const json &j, const char *key, T fallback) {
  if (!j.contains(key))
    return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json &j, const char *key) {
  if (!j.contains(key))
    throw ConfigError(std::string("config is missing '") + key + "'");
  return get_or<T>(j, key, T{});
}

Boundary parse_boundary(const std::string &s) {
  if (s == "absorbing")
    return Boundary::absorbing;
  if (s == "reflecting")
    return Boundary::reflecting;
  if (s == "free-surface" || s == "free_surface")
    return Boundary::free_surface;
  throw ConfigError("unknown boundary '" + s
                    + "'; valid: absorbing, reflecting, free-surface");
}

Boundaries parse_boundaries(const json &j) {
  Boundaries b;
  if (!j.contains("boundaries"))
    return b;
  const json &o = j.at("boundaries");
  if (o.is_string())
    return Boundaries::all(parse_boundary(o.get<std::string>()));
  b.top = parse_boundary(get_or<std::string>(o, "top", "absorbing"));
  b.bottom = parse_boundary(get_or<std::string>(o, "bottom", "absorbing"));
  b.left = parse_boundary(get_or<std::string>(o, "left", "absorbing"));
  b.right = parse_boundary(get_or<std::string>(o, "right", "absorbing"));
  return b;
}

std::vector<Position> parse_positions(const json &j, const char *key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw ConfigError(std::string("config needs an array '") + key + "'");
  std::vector<Position> out;
  for (const auto &p : j.at(key)) {
    try {
      out.push_back(io::parse_position(p));
    } catch (const json::exception &e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
  }
  return out;
}

Trace parse_wavelet(const json &j, const TimeAxis &axis) {
  if (!j.contains("wavelet"))
    throw ConfigError("config is missing 'wavelet'");
  const json &w = j.at("wavelet");
  RickerSpec spec{require<double>(w, "peak_frequency"), std::nullopt,
                  get_or<double>(w, "amplitude", 1.0)};
  if (w.contains("delay"))
    spec.delay = w.at("delay").get<double>();
  Trace t = ricker(spec, axis);
  if (w.contains("highpass"))
    t = highpass(t, w.at("highpass").get<double>());
  return t;
}

MisfitSpec parse_misfit_block(const json &j) {
  MisfitSpec spec = parse_misfit(get_or<std::string>(j, "misfit", "w2-mixed"));
  if (j.contains("c"))
    spec.normalization.c = j.at("c").get<double>();
  if (j.contains("epsilon"))
    spec.normalization.epsilon = j.at("epsilon").get<double>();
  spec.validate();
  return spec;
}

fs::path relative_to(const fs::path &config, const std::string &p) {
  const fs::path q(p);
  return q.is_absolute() ? q : config.parent_path() / q;
}

void ensure_dir(const fs::path &p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec)
    throw io::IoError("cannot create '" + p.string() + "': " + ec.message());
}

// Subcommands ------------------------------------------------------------------

struct WaveletArgs {
  double peak = 10.0;
  std::optional<double> delay;
  double amplitude = 1.0;
  std::size_t nt = 1000;
  double dt = 0.001;
  std::optional<double> highpass_hz;
  std::string out = "trace.csv";
};

int cmd_wavelet(const WaveletArgs &a) {
  const TimeAxis axis(a.nt, a.dt);
  Trace t = ricker({a.peak, a.delay, a.amplitude}, axis);
  if (a.highpass_hz)
    t = highpass(t, *a.highpass_hz);
  io::write_trace(a.out, t);
  return 0;
}

struct NormalizeArgs {
  std::string kind = "mixed";
  std::optional<double> c;
  double epsilon = 1e-8;
  std::string in, out = "density.csv";
};

int cmd_normalize(const NormalizeArgs &a) {
  const NormalizationKind kind = parse_normalization_kind(a.kind);
  const Trace f = io::read_trace(a.in);
  const double c = a.c.value_or(default_scale(f.max_abs()));
  NormalizationSpec{kind, c, a.epsilon}.validate();
  const double shift = kind == NormalizationKind::linear
                           ? linear_shift(f, f, a.epsilon)
                           : 0.0;
  const Normalized n = normalize_single(kind, f, c, a.epsilon, shift);
  io::write_trace(a.out, Trace(f.axis, n.density.values), "density");
  return 0;
}

struct MisfitArgs {
  std::string kind = "w2-mixed";
  std::optional<double> c;
  std::string syn, obs, out = "report.json";
  std::string adjoint_dir;
};

int cmd_misfit(const MisfitArgs &a) {
  MisfitSpec spec = parse_misfit(a.kind);
  if (a.c)
    spec.normalization.c = *a.c;
  spec.validate();
  const auto syn = io::read_gathers(a.syn);
  const auto obs = io::read_gathers(a.obs);
  if (syn.size() != obs.size())
    throw GeometryError("misfit: " + std::to_string(syn.size())
                        + " synthetic vs " + std::to_string(obs.size())
                        + " observed gathers");
  json report;
  report["misfit"] = a.kind;
  report["shots"] = json::array();
  double total = 0.0;
  std::size_t degenerate = 0;
  if (!a.adjoint_dir.empty())
    ensure_dir(a.adjoint_dir);
  for (std::size_t s = 0; s < syn.size(); ++s) {
    const MisfitReport rep = evaluate_misfit(syn[s], obs[s], spec);
    total += rep.value;
    degenerate += rep.degenerate_traces;
    report["shots"].push_back({{"value", rep.value},
                               {"per_trace_values", rep.per_trace_values},
                               {"degenerate_traces", rep.degenerate_traces}});
    if (!a.adjoint_dir.empty()) {
      std::vector<Trace> traces;
      for (const auto &adj : rep.adjoint_sources)
        traces.emplace_back(syn[s].axis, adj);
      io::write_gather(a.adjoint_dir, s,
                       syn[s].receivers.empty()
                           ? ShotGather(syn[s].source, {}, syn[s].axis)
                           : ShotGather(syn[s].source, syn[s].receivers,
                                        std::move(traces)));
    }
  }
  report["value"] = total;
  report["degenerate_traces"] = degenerate;
  io::write_json(a.out, report);
  return 0;
}

struct ForwardArgs {
  std::string model, config, out;
};

int cmd_forward(const ForwardArgs &a, const Globals &g) {
  const json cfg = io::read_json(a.config);
  const TimeAxis axis(require<std::size_t>(cfg, "nt"), require<double>(cfg, "dt"));
  const auto sources = parse_positions(cfg, "sources");
  const auto receivers = parse_positions(cfg, "receivers");
  const Trace w = parse_wavelet(cfg, axis);
  const Boundaries bc = parse_boundaries(cfg);
  const VelocityModel model = io::read_model(a.model);
  check_stability(model, axis);
  for (const auto &p : sources)
    model.grid().snap(p);
  for (const auto &p : receivers)
    model.grid().snap(p);

  std::vector<Shot> shots;
  for (const auto &s : sources)
    shots.push_back({s, receivers, w});
  const auto gathers = synthesize(model, shots, bc, g.thread_count());
  ensure_dir(a.out);
  for (std::size_t s = 0; s < gathers.size(); ++s)
    io::write_gather(a.out, s, gathers[s]);
  io::write_trace(fs::path(a.out) / "wavelet.csv", w);
  return 0;
}

struct InvertArgs {
  std::string config, obs, out;
};

int cmd_invert(const InvertArgs &a, const Globals &g) {
  const fs::path cfg_path(a.config);
  const json cfg = io::read_json(cfg_path);

  // Validate every block before any compute.
  const auto observed = io::read_gathers(a.obs);
  const TimeAxis axis = observed.front().axis;
  const Trace w = parse_wavelet(cfg, axis);
  const VelocityModel initial = io::read_model(
      relative_to(cfg_path, require<std::string>(cfg, "initial_model")));
  std::optional<VelocityModel> truth;
  if (cfg.contains("true_model"))
    truth = io::read_model(
        relative_to(cfg_path, cfg.at("true_model").get<std::string>()));
  if (truth && !(truth->grid() == initial.grid()))
    throw GeometryError("invert: true and initial models differ in grid");

  InversionConfig ic;
  ic.misfit = parse_misfit_block(cfg);
  ic.max_iterations = get_or<std::size_t>(cfg, "max_iterations", 50);
  ic.lbfgs_memory = get_or<std::size_t>(cfg, "lbfgs_memory", 5);
  ic.vmin = get_or<double>(cfg, "vmin", 1400.0);
  ic.vmax = get_or<double>(cfg, "vmax", 2860.0);
  ic.convergence_tol = get_or<double>(cfg, "convergence_tol", 1e-8);
  ic.first_step_fraction = get_or<double>(cfg, "first_step_fraction", 0.03);
  ic.checkpoint_stride = get_or<std::size_t>(cfg, "checkpoint_stride", 0);
  ic.boundaries = parse_boundaries(cfg);
  ic.threads = g.thread_count();
  const std::size_t masked = get_or<std::size_t>(cfg, "masked_rows", 0);
  const Grid2D &grid = initial.grid();
  if (masked >= grid.nz())
    throw ConfigError("invert: masked_rows covers the whole grid");
  if (masked > 0) {
    ic.update_mask.assign(grid.size(), 1);
    for (std::size_t i = 0; i < masked * grid.nx(); ++i)
      ic.update_mask[i] = 0;
  }
  ic.validate();
  check_stability(VelocityModel::homogeneous(grid, ic.vmax), axis);

  std::vector<Shot> shots;
  for (const auto &o : observed) {
    grid.snap(o.source);
    for (const auto &r : o.receivers)
      grid.snap(r);
    shots.push_back({o.source, o.receivers, w});
  }

  recipes::RunRecorder rec(a.out, truth,
                           get_or<std::size_t>(cfg, "snapshot_every", 1));
  const InversionState fin =
      invert(initial, shots, observed, ic,
             [&](const InversionState &st) { rec.observe(st); });
  rec.finish(fin, {{"misfit", get_or<std::string>(cfg, "misfit", "w2-mixed")},
                   {"seed", g.seed}});
  return 0;
}

struct SensitivityArgs {
  std::string misfit = "w2-mixed";
  std::string base = "two-ricker";
  double lo = -0.6, hi = 0.6;
  std::size_t steps = 121;
  std::string out = "curve.csv";
  std::string summary;
};

int cmd_sensitivity(const SensitivityArgs &a) {
  if (a.base != "two-ricker")
    throw ConfigError("unknown base '" + a.base + "'; valid: two-ricker");
  parse_misfit(a.misfit);
  const fs::path summary = a.summary.empty()
                               ? fs::path(a.out).replace_extension(".json")
                               : fs::path(a.summary);
  const auto s = recipes::two_ricker_sensitivity(a.misfit, a.lo, a.hi, a.steps,
                                                 a.out, summary);
  std::cout << recipes::to_json(s).dump() << '\n';
  return 0;
}

struct DemoW1Args {
  std::string out = "demo_w1";
  double width = 0.05;
  double separation = 1.0;
};

int cmd_demo_w1(const DemoW1Args &a) {
  const auto r = recipes::demo_w1(a.out, w1_demo_signals(a.width, a.separation));
  std::cout << recipes::to_json(r).dump() << '\n';
  return 0;
}

struct CamembertArgs {
  std::string out = "camembert";
  std::size_t iterations = 50;
  std::string misfits = "w2-linear,w2-square,l2";
  std::size_t snapshot_every = 1;
};

int cmd_camembert(const CamembertArgs &a, const Globals &g) {
  std::vector<NamedSpec> specs;
  std::stringstream ss(a.misfits);
  for (std::string name; std::getline(ss, name, ',');)
    specs.push_back({name, parse_misfit(name)});
  if (specs.empty())
    throw ConfigError("camembert: no misfits given");
  CamembertSpec spec;
  spec.iterations = a.iterations;
  const auto out = recipes::camembert(spec, specs, a.out, g.thread_count(),
                                      a.snapshot_every);
  std::cout << io::read_json(fs::path(a.out) / "summary.json").dump() << '\n';
  (void)out;
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"otfwi: optimal-transport full waveform inversion toolkit"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads for shot loops")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed recorded with run artifacts");
  app.add_flag("-v,--verbose", g.verbose, "More log output (repeatable)");

  WaveletArgs wa;
  auto *wav = app.add_subcommand("wavelet", "Write a Ricker source trace");
  wav->add_option("--peak-freq", wa.peak, "Peak frequency [Hz]");
  wav->add_option("--delay", wa.delay, "Center time [s] (default 1.2/f)");
  wav->add_option("--amplitude", wa.amplitude);
  wav->add_option("--nt", wa.nt);
  wav->add_option("--dt", wa.dt);
  wav->add_option("--highpass", wa.highpass_hz, "High-pass cutoff [Hz]");
  wav->add_option("--out", wa.out);

  NormalizeArgs na;
  auto *nor = app.add_subcommand("normalize", "Normalize a trace to a density");
  nor->add_option("--kind", na.kind,
                  "linear, separate-positive, separate-negative, absolute, "
                  "square, exponential, mixed");
  nor->add_option("--c", na.c, "Scale for exponential and mixed kinds");
  nor->add_option("--epsilon", na.epsilon);
  nor->add_option("--in", na.in)->required();
  nor->add_option("--out", na.out);

  MisfitArgs ma;
  auto *mis = app.add_subcommand("misfit", "Misfit between two gather directories");
  mis->add_option("--kind", ma.kind, misfit_names());
  mis->add_option("--c", ma.c);
  mis->add_option("--syn", ma.syn)->required();
  mis->add_option("--obs", ma.obs)->required();
  mis->add_option("--out", ma.out);
  mis->add_option("--adjoint-dir", ma.adjoint_dir,
                  "Also write adjoint sources as gathers here");

  ForwardArgs fa;
  auto *fwd = app.add_subcommand("forward", "Synthesize shot gathers");
  fwd->add_option("--model", fa.model)->required();
  fwd->add_option("--config", fa.config)->required();
  fwd->add_option("--out", fa.out)->required();

  InvertArgs ia;
  auto *inv = app.add_subcommand("invert", "Run l-BFGS inversion");
  inv->add_option("--config", ia.config)->required();
  inv->add_option("--obs", ia.obs)->required();
  inv->add_option("--out", ia.out)->required();

  SensitivityArgs sa;
  auto *sen = app.add_subcommand("sensitivity", "Misfit versus signal shift");
  sen->add_option("--misfit", sa.misfit, misfit_names());
  sen->add_option("--base", sa.base);
  sen->add_option("--shift-min", sa.lo);
  sen->add_option("--shift-max", sa.hi);
  sen->add_option("--steps", sa.steps);
  sen->add_option("--out", sa.out);
  sen->add_option("--summary", sa.summary, "Summary JSON (default: <out>.json)");

  DemoW1Args da;
  auto *dw = app.add_subcommand("demo-w1", "Signed-W1 self-cancellation demo");
  dw->add_option("--out", da.out);
  dw->add_option("--width", da.width);
  dw->add_option("--separation", da.separation);

  CamembertArgs ca;
  auto *cam = app.add_subcommand("camembert", "Circular-anomaly experiment");
  cam->add_option("--out", ca.out);
  cam->add_option("--iterations", ca.iterations);
  cam->add_option("--misfits", ca.misfits, "Comma-separated misfit names");
  cam->add_option("--snapshot-every", ca.snapshot_every);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  log::set_level(g.verbose >= 2   ? log::Level::debug
                 : g.verbose == 1 ? log::Level::info
                                  : log::Level::warn);
  try {
    g.resolved = resolve_threads(g.threads);
    if (*wav)
      return cmd_wavelet(wa);
    if (*nor)
      return cmd_normalize(na);
    if (*mis)
      return cmd_misfit(ma);
    if (*fwd)
      return cmd_forward(fa, g);
    if (*inv)
      return cmd_invert(ia, g);
    if (*sen)
      return cmd_sensitivity(sa);
    if (*dw)
      return cmd_demo_w1(da);
    if (*cam)
      return cmd_camembert(ca, g);
  } catch (const ValidationError &e) {
    std::cerr << "otfwi: error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError &e) {
    std::cerr << "otfwi: numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error &e) {
    std::cerr << "otfwi: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
