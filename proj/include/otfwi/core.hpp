//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "otfwi/error.hpp"

namespace otfwi {

struct Position {
  double x = 0.0;
  double z = 0.0;

  friend bool operator==(const Position &, const Position &) = default;
};

/// Grid node index, row-major with z as the slow axis.
struct NodeIndex {
  std::size_t ix = 0;
  std::size_t iz = 0;

  friend bool operator==(const NodeIndex &, const NodeIndex &) = default;
};

/// Rectangular node grid. Node (ix, iz) sits at (x0 + ix*dx, z0 + iz*dz).
class Grid2D {
public:
  Grid2D(std::size_t nx, std::size_t nz, double dx, double dz,
         Position origin = {})
      : nx_(nx), nz_(nz), dx_(dx), dz_(dz), origin_(origin) {
    if (nx < 3 || nz < 3)
      throw ConfigError("Grid2D: need nx >= 3 and nz >= 3");
    if (!(dx > 0.0) || !(dz > 0.0) || !std::isfinite(dx) || !std::isfinite(dz))
      throw ConfigError("Grid2D: spacing must be positive and finite");
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t nz() const noexcept { return nz_; }
  std::size_t size() const noexcept { return nx_ * nz_; }
  double dx() const noexcept { return dx_; }
  double dz() const noexcept { return dz_; }
  Position origin() const noexcept { return origin_; }

  std::size_t index(std::size_t ix, std::size_t iz) const noexcept {
    return iz * nx_ + ix;
  }
  std::size_t index(NodeIndex n) const noexcept { return index(n.ix, n.iz); }

  Position position(std::size_t ix, std::size_t iz) const noexcept {
    return {origin_.x + static_cast<double>(ix) * dx_,
            origin_.z + static_cast<double>(iz) * dz_};
  }

  /// Nearest grid node; positions outside the grid (by more than half a
  /// cell) are rejected.
  NodeIndex snap(Position p) const {
    const double fx = (p.x - origin_.x) / dx_;
    const double fz = (p.z - origin_.z) / dz_;
    const double ix = std::round(fx);
    const double iz = std::round(fz);
    if (!std::isfinite(fx) || !std::isfinite(fz) || ix < 0.0 || iz < 0.0
        || ix > static_cast<double>(nx_ - 1)
        || iz > static_cast<double>(nz_ - 1)) {
      std::ostringstream os;
      os << "position (" << p.x << ", " << p.z << ") lies outside the grid";
      throw GeometryError(os.str());
    }
    return {static_cast<std::size_t>(ix), static_cast<std::size_t>(iz)};
  }

  friend bool operator==(const Grid2D &, const Grid2D &) = default;

private:
  std::size_t nx_, nz_;
  double dx_, dz_;
  Position origin_;
};

/// Squared-slowness model m = 1/c^2 on a grid.
class VelocityModel {
public:
  VelocityModel(Grid2D grid, std::vector<double> slowness_sq)
      : grid_(grid), m_(std::move(slowness_sq)) {
    if (m_.size() != grid_.size())
      throw ConfigError("VelocityModel: value count does not match grid");
    for (double v : m_)
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(
            "VelocityModel: squared slowness must be finite and positive");
  }

  static VelocityModel from_velocity(Grid2D grid,
                                     std::span<const double> velocity) {
    std::vector<double> m(velocity.size());
    for (std::size_t i = 0; i < m.size(); ++i)
      m[i] = 1.0 / (velocity[i] * velocity[i]);
    return VelocityModel(grid, std::move(m));
  }

  static VelocityModel homogeneous(Grid2D grid, double velocity) {
    return VelocityModel(grid, std::vector<double>(
                                   grid.size(), 1.0 / (velocity * velocity)));
  }

  const Grid2D &grid() const noexcept { return grid_; }
  std::span<const double> slowness_sq() const noexcept { return m_; }
  double slowness_sq(std::size_t i) const noexcept { return m_[i]; }
  double velocity(std::size_t i) const noexcept { return 1.0 / std::sqrt(m_[i]); }

  std::vector<double> velocities() const {
    std::vector<double> v(m_.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = velocity(i);
    return v;
  }

  double max_velocity() const noexcept {
    return 1.0 / std::sqrt(*std::min_element(m_.begin(), m_.end()));
  }
  double min_velocity() const noexcept {
    return 1.0 / std::sqrt(*std::max_element(m_.begin(), m_.end()));
  }

private:
  Grid2D grid_;
  std::vector<double> m_;
};

/// Uniform sampling t_i = i*dt, i = 0..nt-1.
class TimeAxis {
public:
  TimeAxis(std::size_t nt, double dt) : nt_(nt), dt_(dt) {
    if (nt < 2)
      throw ConfigError("TimeAxis: need nt >= 2");
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw ConfigError("TimeAxis: dt must be positive and finite");
  }

  std::size_t nt() const noexcept { return nt_; }
  double dt() const noexcept { return dt_; }
  double time(std::size_t i) const noexcept { return static_cast<double>(i) * dt_; }
  /// Length of the sampled interval, (nt-1)*dt.
  double duration() const noexcept { return static_cast<double>(nt_ - 1) * dt_; }

  friend bool operator==(const TimeAxis &, const TimeAxis &) = default;

private:
  std::size_t nt_;
  double dt_;
};

inline std::string describe(const TimeAxis &a) {
  std::ostringstream os;
  os << "TimeAxis{nt=" << a.nt() << ", dt=" << a.dt() << "}";
  return os.str();
}

/// Fails when two axes differ, i.e. when observed and synthetic data were
/// recorded on different clocks.
inline void resample_guard(const TimeAxis &a, const TimeAxis &b) {
  if (!(a == b))
    throw AxisMismatchError("time axes differ: " + describe(a) + " vs "
                            + describe(b));
}

/// Trapezoidal quadrature weights: dt/2 at both ends, dt inside.
inline std::vector<double> trapezoid_weights(const TimeAxis &axis) {
  std::vector<double> w(axis.nt(), axis.dt());
  w.front() = 0.5 * axis.dt();
  w.back() = 0.5 * axis.dt();
  return w;
}

inline double trapezoid_integral(const TimeAxis &axis,
                                 std::span<const double> values) {
  if (values.size() != axis.nt())
    throw AxisMismatchError("trapezoid_integral: sample count != nt");
  double interior = 0.0;
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    interior += values[i];
  return axis.dt() * (interior + 0.5 * (values.front() + values.back()));
}

struct Trace {
  TimeAxis axis;
  std::vector<double> samples;

  Trace(TimeAxis a, std::vector<double> s) : axis(a), samples(std::move(s)) {
    if (samples.size() != axis.nt())
      throw ConfigError("Trace: sample count does not match axis");
  }
  explicit Trace(TimeAxis a) : axis(a), samples(a.nt(), 0.0) {}

  std::size_t size() const noexcept { return samples.size(); }
  double operator[](std::size_t i) const noexcept { return samples[i]; }
  double &operator[](std::size_t i) noexcept { return samples[i]; }

  bool finite() const noexcept {
    return std::all_of(samples.begin(), samples.end(),
                       [](double v) { return std::isfinite(v); });
  }
  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : samples)
      m = std::max(m, std::abs(v));
    return m;
  }
};

inline double trapezoid_integral(const Trace &t) {
  return trapezoid_integral(t.axis, t.samples);
}

struct ShotGather {
  Position source;
  std::vector<Position> receivers;
  TimeAxis axis;
  std::vector<Trace> traces;

  ShotGather(Position src, std::vector<Position> rcv, TimeAxis a)
      : source(src), receivers(std::move(rcv)), axis(a) {
    traces.reserve(receivers.size());
    for (std::size_t r = 0; r < receivers.size(); ++r)
      traces.emplace_back(axis);
  }

  ShotGather(Position src, std::vector<Position> rcv, std::vector<Trace> tr)
      : source(src), receivers(std::move(rcv)),
        axis(tr.empty() ? TimeAxis(2, 1.0) : tr.front().axis),
        traces(std::move(tr)) {
    validate();
  }

  void validate() const {
    if (traces.size() != receivers.size())
      throw GeometryError("ShotGather: one trace per receiver required");
    for (const auto &t : traces)
      resample_guard(axis, t.axis);
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (const auto &t : traces)
      m = std::max(m, t.max_abs());
    return m;
  }
};

/// Fails unless both gathers share receivers, source and time axis.
inline void check_same_geometry(const ShotGather &f, const ShotGather &g) {
  resample_guard(f.axis, g.axis);
  if (f.traces.size() != g.traces.size() || f.receivers != g.receivers)
    throw GeometryError("gathers have different receiver geometry");
}

/// Nonnegative unit-mass density on a time axis.
struct Density {
  TimeAxis axis;
  std::vector<double> values;

  double mass() const { return trapezoid_integral(axis, values); }

  /// Checks nonnegativity and unit trapezoidal mass within `tol`.
  bool valid(double tol = 1e-12) const {
    for (double v : values)
      if (!(v >= 0.0) || !std::isfinite(v))
        return false;
    return std::abs(mass() - 1.0) <= tol;
  }

  static Density uniform(const TimeAxis &axis) {
    return {axis, std::vector<double>(axis.nt(), 1.0 / axis.duration())};
  }
};

} // namespace otfwi
