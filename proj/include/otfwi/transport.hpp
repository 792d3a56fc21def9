//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "otfwi/core.hpp"

// One-dimensional optimal transport between sampled densities.
//
// A Density is read as piecewise constant on the cells [t_k, t_{k+1}], each
// cell carrying its trapezoidal mass (d_k + d_{k+1}) dt / 2. Its CDF is then
// piecewise linear through the nodal values F_k and the quantile function
// F^{-1} is piecewise linear on the breakpoints {F_k}. Every distance below
// integrates exactly over the merged breakpoints of both quantile
// functions, so results are exact for that piecewise model.
//
// Global (multi-trace) transport through the Monge-Ampere equation is not
// provided; misfits compare gathers trace by trace.

namespace otfwi {

struct CdfProfile {
  TimeAxis axis;
  std::vector<double> F;
  /// Total mass before rescaling to 1.
  double raw_mass = 0.0;
};

/// Cumulative trapezoidal integral, clamped monotone and rescaled so that
/// F[nt-1] is exactly 1.
inline CdfProfile cdf(const Density &d) {
  const std::size_t n = d.values.size();
  if (n != d.axis.nt())
    throw AxisMismatchError("cdf: sample count != nt");
  CdfProfile out{d.axis, std::vector<double>(n, 0.0), 0.0};
  const double half_dt = 0.5 * d.axis.dt();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    acc += std::max(0.0, half_dt * (d.values[k] + d.values[k + 1]));
    out.F[k + 1] = acc;
  }
  if (!(acc > 0.0))
    throw DomainError("cdf: density has no mass");
  out.raw_mass = acc;
  for (auto &v : out.F)
    v /= acc;
  out.F.back() = 1.0;
  return out;
}

/// Left-continuous pseudo-inverse: the smallest t with F(t) >= y, linear
/// inside cells. y = 0 maps to the left end of the support.
inline double inverse_cdf(const CdfProfile &F, double y) {
  if (!(y >= 0.0 && y <= 1.0))
    throw DomainError("inverse_cdf: y must lie in [0, 1]");
  const auto &v = F.F;
  const double dt = F.axis.dt();
  if (y <= 0.0) {
    std::size_t j = 0;
    while (j + 1 < v.size() && v[j + 1] <= 0.0)
      ++j;
    return F.axis.time(j);
  }
  const auto it = std::lower_bound(v.begin(), v.end(), y);
  const std::size_t j = static_cast<std::size_t>(it - v.begin());
  if (j == 0)
    return F.axis.time(0);
  if (j >= v.size())
    return F.axis.time(v.size() - 1);
  return F.axis.time(j - 1) + dt * (y - v[j - 1]) / (v[j] - v[j - 1]);
}

namespace detail {

  struct NoJump {
    void operator()(double, std::size_t, std::size_t) const {}
  };

  /// Walks the merged breakpoints of two piecewise-linear quantile
  /// functions. For every sub-interval [ya, yb] of positive length the
  /// visitor receives (ya, yb, k, l): the cell indices of the active
  /// segments of X = F^{-1} and Y = G^{-1}. Cells of zero width (mass
  /// below the resolution of the CDF) are reported to jump_f(y, k, l) or
  /// jump_g(y, k, l) instead; F's jumps at y come before G's.
  template <class Visitor, class JumpF = NoJump, class JumpG = NoJump>
  void merge_quantiles(std::span<const double> F, std::span<const double> G,
                       Visitor &&visit, JumpF &&jump_f = {},
                       JumpG &&jump_g = {}) {
    const std::size_t cells = F.size() - 1;
    std::size_t k = 0;
    std::size_t l = 0;
    double y = 0.0;
    while (true) {
      while (k < cells && F[k + 1] <= y) {
        if (F[k + 1] <= F[k])
          jump_f(y, k, l);
        ++k;
      }
      while (l < cells && G[l + 1] <= y) {
        if (G[l + 1] <= G[l])
          jump_g(y, k, l);
        ++l;
      }
      if (k >= cells || l >= cells)
        break;
      const double ynext = std::min(F[k + 1], G[l + 1]);
      if (ynext > y)
        visit(y, ynext, k, l);
      y = ynext;
    }
  }

  inline double segment_value(std::span<const double> F, double dt,
                              std::size_t k, double y) {
    return (static_cast<double>(k) + (y - F[k]) / (F[k + 1] - F[k])) * dt;
  }

  /// Mean of |a + (b - a) u|^p over u in [0, 1].
  inline double mean_abs_pow(double a, double b, double p) {
    if (p == 2.0)
      return (a * a + a * b + b * b) / 3.0;
    if (p == 1.0 && (a >= 0.0) == (b >= 0.0))
      return std::abs(0.5 * (a + b));
    const double aa = std::abs(a);
    const double ab = std::abs(b);
    if ((a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0))
      return (std::pow(aa, p + 1.0) + std::pow(ab, p + 1.0))
             / ((p + 1.0) * (aa + ab));
    const double hi = std::max(aa, ab);
    const double lo = std::min(aa, ab);
    if (hi == 0.0)
      return 0.0;
    if (hi - lo > 1e-4 * hi)
      return (std::pow(hi, p + 1.0) - std::pow(lo, p + 1.0))
             / ((p + 1.0) * (hi - lo));
    // Nearly constant magnitude: 4-point Gauss-Legendre is exact to
    // rounding here.
    static constexpr double x[4] = {-0.8611363115940526, -0.3399810435848563,
                                    0.3399810435848563, 0.8611363115940526};
    static constexpr double w[4] = {0.3478548451374538, 0.6521451548625461,
                                    0.6521451548625461, 0.3478548451374538};
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double u = 0.5 * (x[i] + 1.0);
      acc += w[i] * std::pow(std::abs(a + (b - a) * u), p);
    }
    return 0.5 * acc;
  }

  /// d W / d d_i from d W / d F_j for F_j = P_j / S, P_j = sum_{k<j} mu_k,
  /// mu_k = (d_k + d_{k+1}) dt / 2.
  inline std::vector<double> cdf_chain(std::span<const double> dF,
                                       std::span<const double> F,
                                       double raw_mass, double dt) {
    const std::size_t n = F.size();
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      dot += dF[j] * F[j];
    // d W / d mu_k = (sum_{j>k} dF_j - dot) / S
    std::vector<double> dmu(n - 1);
    double suffix = 0.0;
    for (std::size_t k = n - 1; k-- > 0;) {
      suffix += dF[k + 1];
      dmu[k] = (suffix - dot) / raw_mass;
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      out[k] += 0.5 * dt * dmu[k];
      out[k + 1] += 0.5 * dt * dmu[k];
    }
    return out;
  }

  inline void check_pair(const Density &f, const Density &g) {
    resample_guard(f.axis, g.axis);
    if (f.values.size() != f.axis.nt() || g.values.size() != g.axis.nt())
      throw AxisMismatchError("density sample count != nt");
  }

} // namespace detail

struct TransportResult {
  /// W2^2 = int |t - T(t)|^2 f(t) dt, in time^2.
  double distance_sq = 0.0;
  /// T(t_i) = G^{-1}(F(t_i)).
  std::vector<double> map;
  /// Exact derivatives of distance_sq with respect to the nodal values of
  /// f and g.
  std::vector<double> grad_f;
  std::vector<double> grad_g;
};

/// Quadratic Wasserstein distance between two densities on a shared axis,
/// evaluated in map form, with the exact gradient of the discrete value.
inline TransportResult w2_1d(const Density &f, const Density &g) {
  detail::check_pair(f, g);
  const CdfProfile cf = cdf(f);
  const CdfProfile cg = cdf(g);
  const std::span<const double> F = cf.F;
  const std::span<const double> G = cg.F;
  const double dt = f.axis.dt();
  const std::size_t n = F.size();

  TransportResult out;
  out.map.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.map[i] = inverse_cdf(cg, F[i]);

  std::vector<double> dF(n, 0.0), dG(n, 0.0);
  double dist = 0.0;
  detail::merge_quantiles(
      F, G, [&](double ya, double yb, std::size_t k, std::size_t l) {
        // Map form: t runs over [ta, tb] inside cell k of f, where the
        // density is (F_{k+1} - F_k) / dt and e(t) = t - T(t) is linear.
        const double ta = detail::segment_value(F, dt, k, ya);
        const double tb = detail::segment_value(F, dt, k, yb);
        const double ea = ta - detail::segment_value(G, dt, l, ya);
        const double eb = tb - detail::segment_value(G, dt, l, yb);
        const double rho = (F[k + 1] - F[k]) / dt;
        dist += rho * (tb - ta) * (ea * ea + ea * eb + eb * eb) / 3.0;

        // Moving breakpoint F_j shifts X by -X'(y) hat_j(y); same for G.
        // Integrands are quadratic in y, so Simpson's rule is exact.
        const double L = yb - ya;
        const double ym = 0.5 * (ya + yb);
        const double em = 0.5 * (ea + eb);
        const double fk = F[k + 1] - F[k];
        const double gl = G[l + 1] - G[l];
        const double sx = dt / fk;
        const double sy = dt / gl;
        auto simpson = [&](auto h) {
          return L / 6.0 * (h(ya, ea) + 4.0 * h(ym, em) + h(yb, eb));
        };
        dF[k] += simpson([&](double y, double e) {
          return -2.0 * e * sx * (F[k + 1] - y) / fk;
        });
        dF[k + 1] += simpson([&](double y, double e) {
          return -2.0 * e * sx * (y - F[k]) / fk;
        });
        dG[l] += simpson([&](double y, double e) {
          return 2.0 * e * sy * (G[l + 1] - y) / gl;
        });
        dG[l + 1] += simpson([&](double y, double e) {
          return 2.0 * e * sy * (y - G[l]) / gl;
        });
      },
      // A cell of vanishing mass adds nothing to the value, but moving its
      // breakpoints still moves X (or Y) across the whole cell. These are
      // the limits of the interval terms above as the width goes to zero.
      // The other quantile is read off its CDF: both may jump at y (runs of
      // empty cells at either end of the support).
      [&](double y, std::size_t k, std::size_t) {
        const double yc = inverse_cdf(cg, y);
        const double ea = static_cast<double>(k) * dt - yc;
        const double eb = ea + dt;
        dF[k] -= dt * (2.0 * ea + eb) / 3.0;
        dF[k + 1] -= dt * (ea + 2.0 * eb) / 3.0;
      },
      [&](double y, std::size_t, std::size_t l) {
        const double xc = inverse_cdf(cf, y);
        const double ea = xc - static_cast<double>(l) * dt;
        const double eb = ea - dt;
        dG[l] += dt * (2.0 * ea + eb) / 3.0;
        dG[l + 1] += dt * (ea + 2.0 * eb) / 3.0;
      });
  out.distance_sq = dist;
  out.grad_f = detail::cdf_chain(dF, F, cf.raw_mass, dt);
  out.grad_g = detail::cdf_chain(dG, G, cg.raw_mass, dt);
  return out;
}

/// W_p in quantile form, (int_0^1 |F^{-1}(y) - G^{-1}(y)|^p dy)^{1/p},
/// integrated exactly over the merged quantile breakpoints.
inline double wp_1d(const Density &f, const Density &g, double p) {
  if (!(p >= 1.0) || !std::isfinite(p))
    throw DomainError("wp_1d: p must be >= 1");
  detail::check_pair(f, g);
  const CdfProfile cf = cdf(f);
  const CdfProfile cg = cdf(g);
  const std::span<const double> F = cf.F;
  const std::span<const double> G = cg.F;
  const double dt = f.axis.dt();
  double acc = 0.0;
  detail::merge_quantiles(
      F, G, [&](double ya, double yb, std::size_t k, std::size_t l) {
        const double ea = detail::segment_value(F, dt, k, ya)
                          - detail::segment_value(G, dt, l, ya);
        const double eb = detail::segment_value(F, dt, k, yb)
                          - detail::segment_value(G, dt, l, yb);
        acc += (yb - ya) * detail::mean_abs_pow(ea, eb, p);
      });
  return std::pow(acc, 1.0 / p);
}

struct SignedW1Result {
  double value = 0.0;
  /// Fractions of the f+ mass sent to g+ and to f- under the monotone
  /// (optimal) coupling of rho1 = f+ + g- onto rho2 = f- + g+.
  double f_plus_to_g_plus = 0.0;
  double f_plus_to_f_minus = 0.0;
  double f_plus_mass = 0.0;
};

/// Signed-measure W1 built from rho1 = f+ + g- and rho2 = f- + g+. Requires
/// <f> = <g> (so rho1 and rho2 carry equal mass) within `tol` relative.
inline SignedW1Result w1_signed_diagnostic(const Trace &f, const Trace &g,
                                           double tol = 1e-6) {
  resample_guard(f.axis, g.axis);
  const std::size_t n = f.size();
  const double dt = f.axis.dt();
  std::vector<double> fp(n), fm(n), gp(n), gm(n);
  for (std::size_t i = 0; i < n; ++i) {
    fp[i] = std::max(f[i], 0.0);
    fm[i] = std::max(-f[i], 0.0);
    gp[i] = std::max(g[i], 0.0);
    gm[i] = std::max(-g[i], 0.0);
  }
  const double scale = trapezoid_integral(f.axis, fp)
                       + trapezoid_integral(f.axis, fm)
                       + trapezoid_integral(g.axis, gp)
                       + trapezoid_integral(g.axis, gm);
  const double mf = trapezoid_integral(f);
  const double mg = trapezoid_integral(g);
  if (std::abs(mf - mg) > tol * std::max(scale, 1e-300))
    throw DomainError("w1_signed_diagnostic: <f> and <g> differ, so f+ + g- "
                      "and f- + g+ carry unequal mass");

  SignedW1Result out;
  if (scale == 0.0)
    return out;

  // Cell masses of each component (piecewise-constant reading).
  const std::size_t cells = n - 1;
  auto cell_mass = [&](const std::vector<double> &v) {
    std::vector<double> m(cells);
    for (std::size_t k = 0; k < cells; ++k)
      m[k] = 0.5 * dt * (v[k] + v[k + 1]);
    return m;
  };
  const auto mfp = cell_mass(fp), mfm = cell_mass(fm);
  const auto mgp = cell_mass(gp), mgm = cell_mass(gm);
  std::vector<double> r1(cells), r2(cells);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    r1[k] = mfp[k] + mgm[k];
    r2[k] = mfm[k] + mgp[k];
    s1 += r1[k];
    s2 += r2[k];
  }
  // Remove the (tolerated) mass imbalance by rescaling both to the mean.
  const double target = 0.5 * (s1 + s2);
  const double k1 = target / s1;
  const double k2 = target / s2;

  // W1 = int |R1(t) - R2(t)| dt with piecewise-linear cumulative masses.
  double c1 = 0.0, c2 = 0.0, w1 = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    const double a = c1 - c2;
    c1 += k1 * r1[k];
    c2 += k2 * r2[k];
    const double b = c1 - c2;
    w1 += dt * detail::mean_abs_pow(a, b, 1.0);
  }
  out.value = w1;

  // Monotone coupling between cells (north-west corner on sorted cells).
  // Within a cell, mass is split between components in proportion.
  out.f_plus_mass = std::accumulate(mfp.begin(), mfp.end(), 0.0);
  std::size_t i = 0, j = 0;
  double left1 = k1 * r1[0], left2 = k2 * r2[0];
  double to_gp = 0.0, to_fm = 0.0;
  while (i < cells && j < cells) {
    if (left1 <= 0.0) {
      if (++i < cells)
        left1 = k1 * r1[i];
      continue;
    }
    if (left2 <= 0.0) {
      if (++j < cells)
        left2 = k2 * r2[j];
      continue;
    }
    const double moved = std::min(left1, left2);
    const double share_fp = mfp[i] / r1[i];
    to_gp += moved * share_fp * (mgp[j] / r2[j]);
    to_fm += moved * share_fp * (mfm[j] / r2[j]);
    left1 -= moved;
    left2 -= moved;
  }
  if (out.f_plus_mass > 0.0) {
    out.f_plus_to_g_plus = to_gp / (k1 * out.f_plus_mass);
    out.f_plus_to_f_minus = to_fm / (k1 * out.f_plus_mass);
  }
  return out;
}

/// Self-cancellation geometry: f is a derivative-of-Gaussian doublet
/// (positive lobe first) and g the same doublet moved far later, so each
/// signal's positive and negative lobes sit closer to each other than to
/// anything in the other signal.
struct W1Demo {
  Trace f;
  Trace g;
};

inline W1Demo w1_demo_signals(double width = 0.05, double separation = 1.0,
                              TimeAxis axis = {1001, 0.002}) {
  const double t0 = 0.25 * axis.duration();
  if (!(width > 0.0) || !(separation > 0.0)
      || t0 + separation + 6.0 * width > axis.duration())
    throw ConfigError("w1 demo: doublets must fit on the time axis");
  auto doublet = [&](double center) {
    Trace t(axis);
    for (std::size_t i = 0; i < axis.nt(); ++i) {
      const double u = (axis.time(i) - center) / width;
      t[i] = -u * std::exp(-0.5 * u * u);
    }
    return t;
  };
  return {doublet(t0), doublet(t0 + separation)};
}

} // namespace otfwi
