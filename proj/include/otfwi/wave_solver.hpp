//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "otfwi/core.hpp"

namespace otfwi {

enum class Boundary { absorbing, reflecting, free_surface };

/// Per-side boundary treatment. Absorbing sides use a first-order
/// Clayton-Engquist damping on the outermost node row; free-surface sides
/// pin the pressure to zero; reflecting sides are plain Neumann closures.
struct Boundaries {
  Boundary top = Boundary::absorbing;
  Boundary bottom = Boundary::absorbing;
  Boundary left = Boundary::absorbing;
  Boundary right = Boundary::absorbing;

  static Boundaries all(Boundary b) { return {b, b, b, b}; }
};

struct SolverOptions {
  Boundaries boundaries;
  /// Keep every time snapshot of the forward field.
  bool keep_wavefield = true;
  /// When nonzero and snapshots are not kept, store (u^{n-1}, u^n) restart
  /// pairs every `checkpoint_stride` steps for gradient recomputation.
  std::size_t checkpoint_stride = 0;
  std::size_t nan_check_interval = 50;
};

/// Pressure snapshots u^0 .. u^{nt-1}.
struct Wavefield {
  Grid2D grid;
  TimeAxis axis;
  std::vector<double> data;

  Wavefield(Grid2D g, TimeAxis a)
      : grid(g), axis(a), data(g.size() * a.nt(), 0.0) {}

  std::span<double> at(std::size_t n) {
    return {data.data() + n * grid.size(), grid.size()};
  }
  std::span<const double> at(std::size_t n) const {
    return {data.data() + n * grid.size(), grid.size()};
  }
};

struct GradientField {
  Grid2D grid;
  std::vector<double> values;

  explicit GradientField(Grid2D g) : grid(g), values(g.size(), 0.0) {}

  GradientField &operator+=(const GradientField &o) {
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] += o.values[i];
    return *this;
  }
};

/// Adjoint source: dJ/df per receiver sample, i.e. R^T dJ/df before
/// injection.
struct AdjointSource {
  std::vector<Position> receivers;
  TimeAxis axis;
  std::vector<std::vector<double>> traces;
};

/// Restart pairs for recomputing the forward field segment by segment.
struct Checkpoints {
  std::size_t stride = 0;
  /// pairs[j] = (u^{j*stride - 1}, u^{j*stride}); u^{-1} = 0.
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
};

struct ForwardResult {
  ShotGather gather;
  std::optional<Wavefield> wavefield;
  std::optional<Checkpoints> checkpoints;
};

/// Largest stable dt for the leapfrog / 4th-order scheme. Gershgorin on
/// M^{-1}K gives lambda_max <= c_max^2 (16/3)(1/dx^2 + 1/dz^2) and
/// leapfrog needs dt^2 lambda_max <= 4.
inline double max_stable_dt(const Grid2D &grid, double max_velocity) {
  const double lam = max_velocity * max_velocity * (16.0 / 3.0)
                     * (1.0 / (grid.dx() * grid.dx())
                        + 1.0 / (grid.dz() * grid.dz()));
  return 2.0 / std::sqrt(lam);
}

inline void check_stability(const VelocityModel &model, const TimeAxis &axis) {
  const double limit = max_stable_dt(model.grid(), model.max_velocity());
  if (axis.dt() > limit) {
    std::ostringstream os;
    os << "time step " << axis.dt() << " s violates the stability bound; "
       << "maximum admissible dt is " << limit << " s";
    throw StabilityError(os.str(), limit);
  }
}

/// Leapfrog propagator for
///   M (u^{n+1} - 2u^n + u^{n-1})/dt^2 + C (u^{n+1} - u^{n-1})/(2dt)
///     + K u^n = s^n
/// with M = diag(m), C = diag(boundary damping) and K the negative of a
/// 4th-order graph Laplacian whose edges leaving the grid are dropped.
/// K is symmetric, so the discrete adjoint is the same recursion run
/// backward in time.
class Propagator {
public:
  Propagator(const VelocityModel &model, const TimeAxis &axis,
             const Boundaries &bc)
      : grid_(model.grid()), dt_(axis.dt()), inv_a_(grid_.size()),
        b_(grid_.size()), c_(grid_.size()), damping_(grid_.size(), 0.0),
        damping_dm_(grid_.size(), 0.0), pinned_(grid_.size(), 0) {
    const std::size_t nx = grid_.nx();
    const std::size_t nz = grid_.nz();
    wx1_ = kA1 / (grid_.dx() * grid_.dx());
    wx2_ = kA2 / (grid_.dx() * grid_.dx());
    wz1_ = kA1 / (grid_.dz() * grid_.dz());
    wz2_ = kA2 / (grid_.dz() * grid_.dz());

    auto side = [&](Boundary b, std::size_t ix, std::size_t iz, double h) {
      const std::size_t i = grid_.index(ix, iz);
      if (b == Boundary::free_surface) {
        pinned_[i] = 1;
      } else if (b == Boundary::absorbing) {
        const double sm = std::sqrt(model.slowness_sq(i));
        damping_[i] += sm / h;
        damping_dm_[i] += 0.5 / (sm * h);
      }
    };
    for (std::size_t ix = 0; ix < nx; ++ix) {
      side(bc.top, ix, 0, grid_.dz());
      side(bc.bottom, ix, nz - 1, grid_.dz());
    }
    for (std::size_t iz = 0; iz < nz; ++iz) {
      side(bc.left, 0, iz, grid_.dx());
      side(bc.right, nx - 1, iz, grid_.dx());
    }

    const double idt2 = 1.0 / (dt_ * dt_);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const double m = model.slowness_sq(i);
      const double g = 0.5 * damping_[i] / dt_;
      inv_a_[i] = 1.0 / (m * idt2 + g);
      b_[i] = 2.0 * m * idt2;
      c_[i] = m * idt2 - g;
    }
  }

  const Grid2D &grid() const noexcept { return grid_; }
  bool pinned(std::size_t i) const noexcept { return pinned_[i] != 0; }
  /// d(damping)/dm per node; nonzero only on absorbing boundary rows.
  std::span<const double> damping_derivative() const noexcept {
    return damping_dm_;
  }

  /// (L u)_i: the Laplacian action (= -(K u)_i).
  void laplacian(std::span<const double> u, std::span<double> out) const {
    const std::size_t nx = grid_.nx();
    const std::size_t nz = grid_.nz();
    for (std::size_t iz = 0; iz < nz; ++iz) {
      const bool z_inner = iz >= 2 && iz + 2 < nz;
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const std::size_t i = iz * nx + ix;
        if (z_inner && ix >= 2 && ix + 2 < nx) {
          const double ui = u[i];
          out[i] = wx1_ * (u[i - 1] + u[i + 1] - 2.0 * ui)
                   + wx2_ * (u[i - 2] + u[i + 2] - 2.0 * ui)
                   + wz1_ * (u[i - nx] + u[i + nx] - 2.0 * ui)
                   + wz2_ * (u[i - 2 * nx] + u[i + 2 * nx] - 2.0 * ui);
        } else {
          out[i] = edge_laplacian(u, ix, iz);
        }
      }
    }
  }

  /// One leapfrog step. `source` holds the node-level right-hand side s^n
  /// and may be empty.
  void step(std::span<const double> prev, std::span<const double> cur,
            std::span<const double> source, std::span<double> next,
            std::span<double> scratch) const {
    laplacian(cur, scratch);
    const std::size_t n = grid_.size();
    if (source.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        next[i] = inv_a_[i] * (scratch[i] + b_[i] * cur[i] - c_[i] * prev[i]);
    } else {
      for (std::size_t i = 0; i < n; ++i)
        next[i] = inv_a_[i]
                  * (source[i] + scratch[i] + b_[i] * cur[i] - c_[i] * prev[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (pinned_[i])
        next[i] = 0.0;
  }

  /// Discrete energy of the lossless scheme between levels n and n+1:
  /// 1/2 |(u^{n+1}-u^n)/dt|_M^2 + 1/2 <K u^{n+1}, u^n>.
  double energy(const VelocityModel &model, std::span<const double> cur,
                std::span<const double> next) const {
    std::vector<double> lap(grid_.size());
    laplacian(next, lap);
    double kin = 0.0;
    double pot = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const double du = (next[i] - cur[i]) / dt_;
      kin += model.slowness_sq(i) * du * du;
      pot -= lap[i] * cur[i];
    }
    return 0.5 * (kin + pot);
  }

private:
  static constexpr double kA1 = 16.0 / 12.0;
  static constexpr double kA2 = -1.0 / 12.0;

  double edge_laplacian(std::span<const double> u, std::size_t ix,
                        std::size_t iz) const {
    const std::size_t nx = grid_.nx();
    const std::size_t nz = grid_.nz();
    const std::size_t i = iz * nx + ix;
    const double ui = u[i];
    double acc = 0.0;
    if (ix >= 1)
      acc += wx1_ * (u[i - 1] - ui);
    if (ix + 1 < nx)
      acc += wx1_ * (u[i + 1] - ui);
    if (ix >= 2)
      acc += wx2_ * (u[i - 2] - ui);
    if (ix + 2 < nx)
      acc += wx2_ * (u[i + 2] - ui);
    if (iz >= 1)
      acc += wz1_ * (u[i - nx] - ui);
    if (iz + 1 < nz)
      acc += wz1_ * (u[i + nx] - ui);
    if (iz >= 2)
      acc += wz2_ * (u[i - 2 * nx] - ui);
    if (iz + 2 < nz)
      acc += wz2_ * (u[i + 2 * nx] - ui);
    return acc;
  }

  Grid2D grid_;
  double dt_;
  double wx1_ = 0, wx2_ = 0, wz1_ = 0, wz2_ = 0;
  std::vector<double> inv_a_, b_, c_;
  std::vector<double> damping_, damping_dm_;
  std::vector<unsigned char> pinned_;
};

namespace detail {

  inline void check_finite(std::span<const double> u, std::size_t step,
                           const char *what) {
    for (double v : u) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << what << " diverged: non-finite value at time step " << step;
        throw DivergenceError(os.str(), step);
      }
    }
  }

  inline std::vector<std::size_t> snap_all(const Grid2D &grid,
                                           std::span<const Position> ps) {
    std::vector<std::size_t> out;
    out.reserve(ps.size());
    for (const auto &p : ps)
      out.push_back(grid.index(grid.snap(p)));
    return out;
  }

} // namespace detail

/// Forward modeling of m u_tt - Laplace(u) = s with zero initial state.
/// The point source sits on the nearest node, scaled by 1/(dx dz).
inline ForwardResult forward_solve(const VelocityModel &model,
                                   const Trace &source, Position source_pos,
                                   const std::vector<Position> &receivers,
                                   const SolverOptions &opts = {}) {
  const Grid2D &grid = model.grid();
  const TimeAxis axis = source.axis;
  if (!source.finite())
    throw ConfigError("forward_solve: source wavelet has non-finite samples");
  check_stability(model, axis);

  const std::size_t src = grid.index(grid.snap(source_pos));
  const auto rcv = detail::snap_all(grid, receivers);
  const Propagator prop(model, axis, opts.boundaries);
  const std::size_t n = grid.size();
  const std::size_t nt = axis.nt();
  const double scale = 1.0 / (grid.dx() * grid.dz());

  ForwardResult res{ShotGather(source_pos, receivers, axis), std::nullopt,
                    std::nullopt};
  if (opts.keep_wavefield)
    res.wavefield.emplace(grid, axis);
  const std::size_t stride = opts.keep_wavefield ? 0 : opts.checkpoint_stride;
  if (stride > 0)
    res.checkpoints.emplace(Checkpoints{stride, {}});

  std::vector<double> prev(n, 0.0), cur(n, 0.0), next(n, 0.0), scratch(n);
  std::vector<double> rhs(n, 0.0);
  for (std::size_t it = 0; it + 1 < nt; ++it) {
    if (stride > 0 && it % stride == 0)
      res.checkpoints->pairs.emplace_back(prev, cur);
    rhs[src] = source[it] * scale;
    prop.step(prev, cur, rhs, next, scratch);
    rhs[src] = 0.0;
    if (opts.nan_check_interval > 0
        && ((it + 1) % opts.nan_check_interval == 0 || it + 2 == nt))
      detail::check_finite(next, it + 1, "forward_solve");
    for (std::size_t r = 0; r < rcv.size(); ++r)
      res.gather.traces[r][it + 1] = next[rcv[r]];
    if (res.wavefield)
      std::copy(next.begin(), next.end(), res.wavefield->at(it + 1).begin());
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return res;
}

/// Backward-in-time adjoint solve with terminal conditions v(T) = v_t(T) = 0.
/// Each receiver injects dJ/df / dt, which makes the result the exact
/// discrete adjoint of forward_solve's sampling.
inline Wavefield adjoint_solve(const VelocityModel &model,
                               const AdjointSource &adj,
                               const Boundaries &bc = {}) {
  const Grid2D &grid = model.grid();
  const TimeAxis axis = adj.axis;
  if (adj.traces.size() != adj.receivers.size())
    throw GeometryError("adjoint_solve: one trace per receiver required");
  for (const auto &t : adj.traces)
    if (t.size() != axis.nt())
      throw AxisMismatchError("adjoint_solve: trace length != nt");
  check_stability(model, axis);

  const auto rcv = detail::snap_all(grid, adj.receivers);
  const Propagator prop(model, axis, bc);
  const std::size_t n = grid.size();
  const std::size_t nt = axis.nt();
  const double inv_dt = 1.0 / axis.dt();

  Wavefield v(grid, axis);
  std::vector<double> prev(n, 0.0), cur(n, 0.0), next(n, 0.0), scratch(n);
  std::vector<double> rhs(n, 0.0);
  // w^j = v^{nt-1-j}; the step centred on level k uses the source at k.
  for (std::size_t j = 0; j + 1 < nt; ++j) {
    const std::size_t k = nt - 1 - j;
    for (std::size_t r = 0; r < rcv.size(); ++r)
      rhs[rcv[r]] += adj.traces[r][k] * inv_dt;
    prop.step(prev, cur, rhs, next, scratch);
    for (std::size_t r = 0; r < rcv.size(); ++r)
      rhs[rcv[r]] = 0.0;
    if ((j + 1) % 50 == 0 || j + 2 == nt)
      detail::check_finite(next, k - 1, "adjoint_solve");
    std::copy(next.begin(), next.end(), v.at(k - 1).begin());
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return v;
}

/// Adjoint of the source-injection map: the derivative of <f, q> with
/// respect to the source time function, given the adjoint field of q.
inline Trace source_adjoint(const Wavefield &v, Position source_pos) {
  const std::size_t src = v.grid.index(v.grid.snap(source_pos));
  const double scale = v.axis.dt() / (v.grid.dx() * v.grid.dz());
  Trace out(v.axis);
  for (std::size_t it = 0; it < v.axis.nt(); ++it)
    out[it] = scale * v.at(it)[src];
  return out;
}

namespace detail {

  inline void check_pair(const Wavefield &u, const Wavefield &v) {
    if (!(u.grid == v.grid))
      throw GeometryError("imaging_gradient: wavefields live on different grids");
    resample_guard(u.axis, v.axis);
  }

} // namespace detail

/// Imaging condition dJ/dm = -sum_t u_tt v dt with centered second
/// differences; u^{-1} = 0 from the initial condition and a one-sided
/// stencil at the last sample (where v vanishes anyway).
inline GradientField imaging_gradient(const Wavefield &u, const Wavefield &v) {
  detail::check_pair(u, v);
  const std::size_t n = u.grid.size();
  const std::size_t nt = u.axis.nt();
  const double dt = u.axis.dt();
  const double s = -1.0 / dt; // dt * (1/dt^2)
  GradientField g(u.grid);
  for (std::size_t it = 0; it < nt; ++it) {
    const auto vn = v.at(it);
    const auto un = u.at(it);
    if (it + 1 < nt) {
      const auto up = u.at(it + 1);
      if (it == 0) {
        for (std::size_t i = 0; i < n; ++i)
          g.values[i] += s * (up[i] - 2.0 * un[i]) * vn[i];
      } else {
        const auto um = u.at(it - 1);
        for (std::size_t i = 0; i < n; ++i)
          g.values[i] += s * (up[i] - 2.0 * un[i] + um[i]) * vn[i];
      }
    } else if (nt >= 3) {
      const auto um = u.at(it - 1);
      const auto umm = u.at(it - 2);
      for (std::size_t i = 0; i < n; ++i)
        g.values[i] += s * (un[i] - 2.0 * um[i] + umm[i]) * vn[i];
    }
  }
  return g;
}

/// Imaging condition plus the absorbing-boundary term: the boundary damping
/// depends on m through sqrt(m)/h, contributing
/// -sum_t dt v (d damping/dm) u_t on the outermost rows.
inline GradientField imaging_gradient(const Wavefield &u, const Wavefield &v,
                                      const VelocityModel &model,
                                      const Boundaries &bc) {
  GradientField g = imaging_gradient(u, v);
  const Propagator prop(model, u.axis, bc);
  const auto ddm = prop.damping_derivative();
  const std::size_t nt = u.axis.nt();
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (ddm[i] == 0.0)
      continue;
    double acc = 0.0;
    for (std::size_t it = 0; it + 1 < nt; ++it) {
      const double um = it == 0 ? 0.0 : u.at(it - 1)[i];
      acc += v.at(it)[i] * 0.5 * (u.at(it + 1)[i] - um);
    }
    g.values[i] -= ddm[i] * acc;
  }
  return g;
}

/// Same result as imaging_gradient(u, adjoint_solve(...), model, bc) without
/// holding either field in memory: the adjoint sweep runs backward while
/// forward segments are recomputed from checkpoints.
inline GradientField checkpointed_gradient(const VelocityModel &model,
                                           const Trace &source,
                                           Position source_pos,
                                           const Checkpoints &ckpt,
                                           const AdjointSource &adj,
                                           const Boundaries &bc = {}) {
  const Grid2D &grid = model.grid();
  const TimeAxis axis = source.axis;
  resample_guard(axis, adj.axis);
  if (ckpt.stride == 0 || ckpt.pairs.empty())
    throw ConfigError("checkpointed_gradient: no checkpoints");
  check_stability(model, axis);

  const std::size_t n = grid.size();
  const std::size_t nt = axis.nt();
  const std::size_t k = ckpt.stride;
  const double dt = axis.dt();
  const double scale = 1.0 / (grid.dx() * grid.dz());
  const std::size_t src = grid.index(grid.snap(source_pos));
  const auto rcv = detail::snap_all(grid, adj.receivers);
  const Propagator prop(model, axis, bc);
  const auto ddm = prop.damping_derivative();

  // seg[j] holds u^{base-1+j} for j = 0..k+1.
  std::vector<std::vector<double>> seg(k + 2, std::vector<double>(n, 0.0));
  std::size_t base = static_cast<std::size_t>(-1);
  std::vector<double> scratch(n), rhs(n, 0.0);
  auto load_segment = [&](std::size_t b) {
    const auto &pair = ckpt.pairs.at(b / k);
    seg[0] = pair.first;
    seg[1] = pair.second;
    for (std::size_t j = 1; j <= k && b + j < nt; ++j) {
      const std::size_t it = b + j - 1;
      rhs[src] = source[it] * scale;
      prop.step(seg[j - 1], seg[j], rhs, seg[j + 1], scratch);
      rhs[src] = 0.0;
    }
    base = b;
  };
  auto u_at = [&](std::size_t it) -> const std::vector<double> & {
    return seg[it + 1 - base];
  };

  GradientField g(grid);
  std::vector<double> prev(n, 0.0), cur(n, 0.0), next(n, 0.0);
  const double inv_dt = 1.0 / dt;
  // cur holds v^{it} at the top of each iteration; v^{nt-1} = 0.
  for (std::size_t it = nt - 1;; --it) {
    if (it + 1 < nt) {
      const std::size_t b = (it / k) * k;
      if (b != base)
        load_segment(b);
      const auto &up = u_at(it + 1);
      const auto &un = u_at(it);
      const auto &um = u_at(it == 0 ? 0 : it - 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double umi = it == 0 ? 0.0 : um[i];
        g.values[i] -= (up[i] - 2.0 * un[i] + umi) * cur[i] / dt;
        if (ddm[i] != 0.0)
          g.values[i] -= ddm[i] * cur[i] * 0.5 * (up[i] - umi);
      }
    }
    if (it == 0)
      break;
    // Advance the adjoint from v^{it} to v^{it-1} with the source at it.
    for (std::size_t r = 0; r < rcv.size(); ++r)
      rhs[rcv[r]] += adj.traces[r][it] * inv_dt;
    prop.step(prev, cur, rhs, next, scratch);
    for (std::size_t r = 0; r < rcv.size(); ++r)
      rhs[rcv[r]] = 0.0;
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return g;
}

} // namespace otfwi
