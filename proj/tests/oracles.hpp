//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations used by the tests. Nothing here calls
// into the library's numerics.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

/// Seeded generator shared by the property tests.
inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline std::vector<double> uniform_vector(std::mt19937_64 &g, std::size_t n,
                                          double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto &x : v)
    x = d(g);
  return v;
}

inline std::vector<double> normal_vector(std::mt19937_64 &g, std::size_t n,
                                         double sigma = 1.0) {
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> v(n);
  for (auto &x : v)
    x = d(g);
  return v;
}

/// Trapezoid rule by direct summation of panel areas.
inline double trapezoid(const std::vector<double> &v, double dt) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    s += 0.5 * dt * (v[i] + v[i + 1]);
  return s;
}

/// Discrete OT between two atom lists (positions sorted ascending) by the
/// north-west corner rule, exact for convex costs in 1D.
inline double nw_corner_cost(const std::vector<double> &xa,
                             const std::vector<double> &ma,
                             const std::vector<double> &xb,
                             const std::vector<double> &mb, double p = 2.0) {
  std::size_t i = 0, j = 0;
  double la = ma.empty() ? 0.0 : ma[0], lb = mb.empty() ? 0.0 : mb[0];
  double cost = 0.0;
  while (i < xa.size() && j < xb.size()) {
    const double t = std::min(la, lb);
    cost += t * std::pow(std::abs(xa[i] - xb[j]), p);
    la -= t;
    lb -= t;
    if (la <= 0.0 && ++i < xa.size())
      la = ma[i];
    if (lb <= 0.0 && ++j < xb.size())
      lb = mb[j];
  }
  return cost;
}

/// Atoms for a nodal density read as uniform mass on each cell, the cell
/// mass being the trapezoid panel. Each cell is split into k midpoint atoms.
inline void cell_atoms(const std::vector<double> &d, double dt, std::size_t k,
                       std::vector<double> &x, std::vector<double> &m) {
  double total = trapezoid(d, dt);
  x.clear();
  m.clear();
  for (std::size_t c = 0; c + 1 < d.size(); ++c) {
    const double mass = 0.5 * dt * (d[c] + d[c + 1]) / total;
    for (std::size_t j = 0; j < k; ++j) {
      x.push_back(dt * (static_cast<double>(c)
                        + (static_cast<double>(j) + 0.5) / static_cast<double>(k)));
      m.push_back(mass / static_cast<double>(k));
    }
  }
}

/// W_p^p between cellwise-uniform densities: brute-force coupling of
/// refined atoms with Richardson extrapolation in the refinement (the
/// atom quantization error is O(1/k^2)).
inline double cell_wp_pow(const std::vector<double> &f,
                          const std::vector<double> &g, double dt,
                          double p = 2.0, std::size_t k = 2000) {
  std::vector<double> xa, ma, xb, mb;
  cell_atoms(f, dt, k, xa, ma);
  cell_atoms(g, dt, k, xb, mb);
  const double coarse = nw_corner_cost(xa, ma, xb, mb, p);
  cell_atoms(f, dt, 2 * k, xa, ma);
  cell_atoms(g, dt, 2 * k, xb, mb);
  const double fine = nw_corner_cost(xa, ma, xb, mb, p);
  return (4.0 * fine - coarse) / 3.0;
}

/// Naive DFT magnitude at bin k.
inline double dft_magnitude(const std::vector<double> &x, std::size_t k) {
  std::complex<double> acc = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi
                                      * static_cast<double>(k * i) / n);
  return std::abs(acc);
}

/// Central finite difference of a scalar function along direction d.
inline double directional_fd(const std::function<double(const std::vector<double> &)> &f,
                             const std::vector<double> &x,
                             const std::vector<double> &d, double h) {
  std::vector<double> xp = x, xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] += h * d[i];
    xm[i] -= h * d[i];
  }
  return (f(xp) - f(xm)) / (2.0 * h);
}

inline double dot(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

} // namespace oracle
