//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

// Acceptance runner: evaluates criteria 1-8 into an artifact directory,
// repeats the run into a second directory and compares the bytes (9).
// Prints one PASS/FAIL line per criterion; exit status 0 iff all pass.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>

#include "../oracles.hpp"
#include "../reference_misfit.hpp"
#include "camembert_fixture.hpp"
#include "otfwi/otfwi.hpp"

using namespace otfwi;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) { return io::format_double(v); }

// 1 -------------------------------------------------------------------------

Outcome transport_oracle(const fs::path &dir) {
  auto g = oracle::rng(1001);
  const TimeAxis a(12, 1.0 / 11.0);
  double worst = 0.0;
  std::vector<double> idx, got, want;
  for (int k = 0; k < 200; ++k) {
    auto f = oracle::uniform_vector(g, 12, 0.0, 1.0);
    auto h = oracle::uniform_vector(g, 12, 0.0, 1.0);
    for (auto *v : {&f, &h}) {
      const double m = oracle::trapezoid(*v, a.dt());
      for (auto &x : *v)
        x /= m;
    }
    const double w = w2_1d({a, f}, {a, h}).distance_sq;
    const double o = oracle::cell_wp_pow(f, h, a.dt());
    worst = std::max(worst, std::abs(w - o));
    idx.push_back(k);
    got.push_back(w);
    want.push_back(o);
  }
  io::write_columns(dir / "c1_transport_oracle.csv", {"pair", "w2_sq", "oracle"},
                    {idx, got, want});
  return {worst <= 1e-8, "max |w2 - oracle| = " + fmt(worst)};
}

// 2 -------------------------------------------------------------------------

Outcome translation_law(const fs::path &dir) {
  const TimeAxis a(2001, 0.001);
  const double width = 0.01, center = 1.0;
  auto bump = [&](double s) {
    Trace t(a);
    for (std::size_t i = 0; i < a.nt(); ++i)
      t[i] = std::exp(-0.5 * std::pow((a.time(i) - center - s) / width, 2));
    return t;
  };
  const double smax = 0.2 * a.duration();
  const auto curve = sensitivity_curve(bump, bump(0.0), shift_grid(-smax, smax, 81),
                                       MisfitSpec::w2(NormalizationKind::linear));
  double worst = 0.0;
  std::vector<double> sh, val;
  for (const auto &p : curve) {
    sh.push_back(p.shift);
    val.push_back(p.value);
    if (p.shift != 0.0)
      worst = std::max(worst, std::abs(p.value - p.shift * p.shift) / (p.shift * p.shift));
  }
  io::write_curve(dir / "c2_translation.csv", sh, val);
  const bool convex = is_convex(curve, 1e-6);
  return {worst <= 0.02 && convex,
          "max rel err vs s^2 = " + fmt(worst) + ", convex = " + (convex ? "yes" : "no")};
}

// 3 -------------------------------------------------------------------------

Outcome landscape(const fs::path &dir) {
  const auto l2 = recipes::two_ricker_sensitivity(
      "l2", -0.6, 0.6, 121, dir / "c3_l2_curve.csv", dir / "c3_l2_summary.json");
  const auto w2 = recipes::two_ricker_sensitivity(
      "w2-mixed", -0.6, 0.6, 121, dir / "c3_w2_mixed_curve.csv",
      dir / "c3_w2_mixed_summary.json");
  const bool ok = l2.local_minima >= 3 && w2.local_minima == 1
                  && std::abs(w2.argmin_shift) < 1e-12;
  return {ok, "L2 minima = " + std::to_string(l2.local_minima)
                  + ", W2-mixed minima = " + std::to_string(w2.local_minima)
                  + " at s = " + fmt(w2.argmin_shift)};
}

// 4 -------------------------------------------------------------------------

Outcome normalization_suite(const fs::path &dir) {
  auto g = oracle::rng(1004);
  const TimeAxis a(300, 0.004);
  bool ok = true;
  std::string why;
  auto fail = [&](const std::string &msg) {
    if (ok)
      why = msg;
    ok = false;
  };

  // Unit mass and nonnegativity for every kind.
  double worst_mass = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Trace f(a, oracle::normal_vector(g, a.nt()));
    const Trace h(a, oracle::normal_vector(g, a.nt()));
    const double c = default_scale(f.max_abs());
    for (auto kind : {NormalizationKind::linear, NormalizationKind::separate_positive,
                      NormalizationKind::separate_negative, NormalizationKind::absolute,
                      NormalizationKind::square, NormalizationKind::exponential,
                      NormalizationKind::mixed}) {
      const double shift = linear_shift(f, h, 1e-8);
      const Normalized n = normalize_single(kind, f, c, 1e-8, shift);
      for (double v : n.density.values)
        if (v < 0.0)
          fail(std::string(to_string(kind)) + " produced a negative value");
      worst_mass = std::max(worst_mass,
                            std::abs(trapezoid_integral(a, n.density.values) - 1.0));
    }
  }
  if (worst_mass > 1e-12)
    fail("mass error " + fmt(worst_mass));

  // C1 at zero: both branches agree in value and slope at f = 0.
  for (double c : {0.1, 1.0, 37.0}) {
    const double below = std::nextafter(0.0, -1.0);
    if (mixed_map(0.0, c) != 1.0 / c || mixed_map(below, c) != 1.0 / c)
      fail("mixed value not continuous at 0 for c = " + fmt(c));
    if (mixed_map_derivative(0.0, c) != 1.0 || mixed_map_derivative(below, c) != 1.0)
      fail("mixed slope not continuous at 0 for c = " + fmt(c));
    double prev = mixed_map(-50.0 / c, c);
    for (int k = -4999; k <= 5000; ++k) {
      const double x = 0.01 * k / c;
      const double y = mixed_map(x, c);
      if (!(y > prev))
        fail("mixed map not strictly increasing near " + fmt(x));
      prev = y;
    }
  }

  // Small-c rate: halving c twice divides the gap to linear by about 4.
  const Trace f(a, oracle::normal_vector(g, a.nt()));
  std::vector<double> cs, gap_mixed, gap_exp;
  for (double c : {0.02, 0.01, 0.005}) {
    const auto lin = normalize_shifted(f, 1.0 / c).density.values;
    const auto mix = mixed_part(f, c).density.values;
    const auto ex = exponential_part(f, c).density.values;
    double em = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < lin.size(); ++i) {
      em = std::max(em, std::abs(mix[i] - lin[i]));
      ee = std::max(ee, std::abs(ex[i] - lin[i]));
    }
    cs.push_back(c);
    gap_mixed.push_back(em);
    gap_exp.push_back(ee);
  }
  io::write_columns(dir / "c4_small_c.csv", {"c", "gap_mixed", "gap_exponential"},
                    {cs, gap_mixed, gap_exp});
  for (std::size_t k = 0; k + 1 < cs.size(); ++k)
    for (const auto *gaps : {&gap_mixed, &gap_exp}) {
      const double ratio = (*gaps)[k] / (*gaps)[k + 1];
      if (ratio < 3.5 || ratio > 4.5)
        fail("small-c ratio " + fmt(ratio) + " not near 4");
    }

  // Square is bitwise sign-blind.
  for (int rep = 0; rep < 20; ++rep) {
    const Trace p(a, oracle::normal_vector(g, a.nt()));
    Trace m(a);
    for (std::size_t i = 0; i < a.nt(); ++i)
      m[i] = -p[i];
    if (normalize_square(p).values != normalize_square(m).values)
      fail("square normalization depends on sign");
  }
  return {ok, ok ? "mass err " + fmt(worst_mass) + ", small-c ratios "
                       + fmt(gap_mixed[0] / gap_mixed[1]) + ", "
                       + fmt(gap_mixed[1] / gap_mixed[2])
                 : why};
}

// 5 -------------------------------------------------------------------------

struct ChainBed {
  Grid2D grid{30, 30, 10.0, 10.0};
  TimeAxis axis{400, 0.001};
  std::vector<Shot> shots;
  VelocityModel truth, start;

  ChainBed()
      : truth(VelocityModel::homogeneous(grid, 2000.0)),
        start(VelocityModel::homogeneous(grid, 2000.0)) {
    std::vector<double> v(grid.size());
    for (std::size_t iz = 0; iz < grid.nz(); ++iz)
      for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
        const Position p = grid.position(ix, iz);
        const double r2 = (p.x - 150.0) * (p.x - 150.0) + (p.z - 170.0) * (p.z - 170.0);
        v[grid.index(ix, iz)] = 2000.0 + 150.0 * std::exp(-r2 / 5000.0);
      }
    truth = VelocityModel::from_velocity(grid, v);
    const Trace w = ricker({25.0, std::nullopt, 1.0}, axis);
    std::vector<Position> rcv;
    for (std::size_t ix = 1; ix < 29; ix += 3)
      rcv.push_back({10.0 * static_cast<double>(ix), 20.0});
    shots.push_back({{80.0, 20.0}, rcv, w});
    shots.push_back({{210.0, 20.0}, rcv, w});
  }
};

Outcome derivative_chain(const fs::path &dir) {
  // Trace level: the adjoint source against central differences of the
  // misfit value, taken in 50-digit arithmetic so the comparison is not
  // limited by rounding in the double-precision value.
  const TimeAxis a(32, 0.01);
  double worst_trace = 0.0;
  for (const auto &m : misfit_catalog()) {
    if (!m.spec.differentiable())
      continue;
    const std::string name(m.name);
    auto g = oracle::rng(1005);
    for (int rep = 0; rep < 20; ++rep) {
      const Trace f(a, oracle::normal_vector(g, a.nt()));
      const Trace h(a, oracle::normal_vector(g, a.nt()));
      const double c = resolve_scale(m.spec, h.max_abs());
      const auto tm = m.spec.kind == MisfitKind::l2 ? trace_misfit_l2(f, h)
                                                    : trace_misfit_w2(f, h, m.spec, c);
      const auto fd = reference::fd_gradient(name, f.samples, h.samples, a.dt(), c,
                                             m.spec.normalization.epsilon);
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < fd.size(); ++j) {
        num += (fd[j] - tm.adjoint[j]) * (fd[j] - tm.adjoint[j]);
        den += tm.adjoint[j] * tm.adjoint[j];
      }
      worst_trace = std::max(worst_trace, std::sqrt(num / std::max(den, 1e-300)));
    }
  }

  // PDE chain.
  const ChainBed b;
  const auto obs = synthesize(b.truth, b.shots);
  const std::vector<std::pair<std::size_t, std::size_t>> probes{
      {15, 17}, {10, 12}, {20, 8}, {6, 22}, {24, 15}};
  double worst_pde = 0.0;
  std::vector<double> col_spec, col_cell, col_adj, col_fd;
  int spec_id = 0;
  for (const auto &spec : {MisfitSpec::l2(), MisfitSpec::w2_mixed()}) {
    const auto gr = assemble_gradient(b.start, b.shots, obs, spec);
    const double h = 1e-4 * b.start.slowness_sq(0);
    for (const auto &[ix, iz] : probes) {
      const std::size_t cell = b.grid.index(ix, iz);
      auto value = [&](double delta) {
        std::vector<double> m(b.start.slowness_sq().begin(), b.start.slowness_sq().end());
        m[cell] += delta;
        return assemble_gradient(VelocityModel(b.grid, m), b.shots, obs, spec).value;
      };
      const double fd = (value(h) - value(-h)) / (2.0 * h);
      worst_pde = std::max(worst_pde, oracle::rel_err(gr.gradient.values[cell], fd));
      col_spec.push_back(spec_id);
      col_cell.push_back(static_cast<double>(cell));
      col_adj.push_back(gr.gradient.values[cell]);
      col_fd.push_back(fd);
    }
    ++spec_id;
  }
  io::write_columns(dir / "c5_pde_chain.csv", {"spec", "cell", "adjoint", "fd"},
                    {col_spec, col_cell, col_adj, col_fd});
  return {worst_trace <= 1e-6 && worst_pde <= 1e-3,
          "trace-level max rel err " + fmt(worst_trace) + ", PDE max rel err "
              + fmt(worst_pde)};
}

// 6 -------------------------------------------------------------------------

Outcome dot_test(const fs::path &dir) {
  const Grid2D grid(40, 36, 10.0, 10.0);
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 1800.0 + 400.0 * static_cast<double>(i % 7) / 6.0;
  const auto model = VelocityModel::from_velocity(grid, v);
  const TimeAxis a(300, 0.0015);
  Boundaries bc;
  bc.top = Boundary::free_surface;
  double worst = 0.0;
  std::vector<double> seeds, lhs_c, rhs_c;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto g = oracle::rng(seed);
    const Trace s(a, oracle::normal_vector(g, a.nt()));
    const Position src = grid.position(11, 5);
    std::vector<Position> rcv;
    for (std::size_t ix = 2; ix < 38; ix += 3)
      rcv.push_back(grid.position(ix, 3));
    SolverOptions o;
    o.boundaries = bc;
    o.keep_wavefield = false;
    const auto fwd = forward_solve(model, s, src, rcv, o).gather;
    AdjointSource q{rcv, a, {}};
    double lhs = 0.0;
    for (std::size_t r = 0; r < rcv.size(); ++r) {
      q.traces.push_back(oracle::normal_vector(g, a.nt()));
      lhs += oracle::dot(fwd.traces[r].samples, q.traces.back());
    }
    const Wavefield adj = adjoint_solve(model, q, bc);
    const double rhs = oracle::dot(s.samples, source_adjoint(adj, src).samples);
    worst = std::max(worst, oracle::rel_err(lhs, rhs));
    seeds.push_back(static_cast<double>(seed));
    lhs_c.push_back(lhs);
    rhs_c.push_back(rhs);
  }
  io::write_columns(dir / "c6_dot_test.csv", {"seed", "lhs", "rhs"},
                    {seeds, lhs_c, rhs_c});
  return {worst <= 1e-10, "max rel mismatch " + fmt(worst)};
}

// 7 -------------------------------------------------------------------------

Outcome camembert(const fs::path &dir, std::size_t threads) {
  const CamembertSpec spec;
  const auto out = recipes::camembert(
      spec, {{"w2-linear", parse_misfit("w2-linear")},
             {"w2-square", parse_misfit("w2-square")}},
      dir / "c7_camembert", threads);
  const double corr = out.first_gradient_correlation;
  const double start = out.report.initial_rmse;
  const double lin = out.final_rmse[0];
  const double sq = out.final_rmse[1];
  const bool ok = corr < fixture::kCorrelationCeiling
                  && lin < start * fixture::kLinearVsStartRatio
                  && lin < sq * fixture::kLinearVsSquareRatio;
  return {ok, "gradient correlation " + fmt(corr) + ", RMSE start " + fmt(start)
                  + " / W2-linear " + fmt(lin) + " / W2-square " + fmt(sq)};
}

// 8 -------------------------------------------------------------------------

Outcome w1_demo(const fs::path &dir) {
  const auto r = recipes::demo_w1(dir / "c8_demo_w1", w1_demo_signals());
  return {r.f_plus_to_f_minus > 0.5,
          "fraction of f+ mass sent to f- = " + fmt(r.f_plus_to_f_minus)};
}

// 9 -------------------------------------------------------------------------

std::set<fs::path> list_files(const fs::path &root) {
  std::set<fs::path> out;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out.insert(fs::relative(e.path(), root));
  return out;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Outcome compare_trees(const fs::path &a, const fs::path &b) {
  const auto fa = list_files(a), fb = list_files(b);
  if (fa != fb)
    return {false, "file sets differ (" + std::to_string(fa.size()) + " vs "
                       + std::to_string(fb.size()) + ")"};
  for (const auto &rel : fa)
    if (slurp(a / rel) != slurp(b / rel))
      return {false, "bytes differ in " + rel.string()};
  return {true, std::to_string(fa.size()) + " artifact files bit-identical"};
}

// Driver --------------------------------------------------------------------

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome(const fs::path &)> run;
};

std::vector<Outcome> run_pass(const std::vector<Criterion> &list,
                              const fs::path &dir, bool report) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<Outcome> out;
  for (const auto &c : list) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(dir);
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    if (report) {
      std::printf("[%s] criterion %d: %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL",
                  c.id, c.title.c_str(), o.detail.c_str(), secs);
      std::fflush(stdout);
    }
    out.push_back(o);
  }
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"otfwi acceptance criteria 1-9"};
  std::string artifacts = "acceptance_artifacts";
  std::set<int> only;
  std::optional<std::size_t> threads_opt;
  app.add_option("--artifacts", artifacts, "Artifact root directory");
  app.add_option("--only", only, "Run only these criteria (9 needs a rerun)");
  app.add_option("--threads", threads_opt)->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::size_t threads = resolve_threads(threads_opt);
  // The rerun uses a different worker count to expose any scheduling
  // dependence in the artifacts.
  const std::size_t rerun_threads = threads == 1 ? 2 : 1;

  auto criteria_for = [](std::size_t th) {
    return std::vector<Criterion>{
        {1, "transport oracle equivalence", transport_oracle},
        {2, "translation law and convexity", translation_law},
        {3, "landscape contrast", landscape},
        {4, "normalization suite", normalization_suite},
        {5, "derivative chain", derivative_chain},
        {6, "adjoint dot test", dot_test},
        {7, "camembert outcome", [th](const fs::path &d) { return camembert(d, th); }},
        {8, "signed-W1 pathology", w1_demo},
    };
  };
  auto select = [&](std::vector<Criterion> all) {
    if (only.empty())
      return all;
    std::vector<Criterion> out;
    for (auto &c : all)
      if (only.count(c.id))
        out.push_back(std::move(c));
    return out;
  };

  const fs::path root(artifacts);
  bool all_pass = true;
  const auto first = run_pass(select(criteria_for(threads)), root / "run1", true);
  for (const auto &o : first)
    all_pass = all_pass && o.pass;

  if (only.empty() || only.count(9)) {
    run_pass(select(criteria_for(rerun_threads)), root / "run2", false);
    const Outcome det = compare_trees(root / "run1", root / "run2");
    std::printf("[%s] criterion 9: determinism: %s\n", det.pass ? "PASS" : "FAIL",
                det.detail.c_str());
    all_pass = all_pass && det.pass;
  }
  std::printf("acceptance: %s\n", all_pass ? "ALL PASS" : "FAILURES");
  return all_pass ? 0 : 1;
}
