//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <mutex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "otfwi/core.hpp"
#include "otfwi/misfit.hpp"
#include "otfwi/wavelet.hpp"

namespace otfwi {

struct CurvePoint {
  double shift = 0.0;
  double value = 0.0;
};

/// n evenly spaced shifts from lo to hi; a single step yields {lo}.
inline std::vector<double> shift_grid(double lo, double hi, std::size_t steps) {
  if (steps == 0)
    throw ConfigError("shift grid needs at least one step");
  if (!(lo <= hi))
    throw ConfigError("shift grid needs shift-min <= shift-max");
  std::vector<double> out(steps);
  for (std::size_t i = 0; i < steps; ++i)
    out[i] = steps == 1 ? lo
                        : lo + (hi - lo) * static_cast<double>(i)
                                   / static_cast<double>(steps - 1);
  return out;
}

/// Band-limited delay t -> x(t - s) by a Fourier phase ramp on a
/// zero-padded copy, so content leaving the axis does not wrap around.
inline Trace fourier_shift(const Trace &x, double s) {
  const std::size_t nt = x.size();
  const double dt = x.axis.dt();
  if (!(std::abs(s) < x.axis.duration()))
    throw DomainError("shift exceeds the time axis");
  std::size_t n = 1;
  while (n < 2 * nt)
    n <<= 1;
  const std::size_t nc = n / 2 + 1;

  std::vector<double> buf(n, 0.0);
  std::vector<std::complex<double>> spec(nc);
  auto *cspec = reinterpret_cast<fftw_complex *>(spec.data());
  std::copy(x.samples.begin(), x.samples.end(), buf.begin());

  static std::mutex planner;
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(planner);
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(), cspec,
                               FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), cspec, buf.data(),
                               FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  for (std::size_t k = 0; k < nc; ++k) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) * s
                         / (static_cast<double>(n) * dt);
    spec[k] *= std::polar(1.0, phase);
  }
  if (n % 2 == 0) // the Nyquist bin of a real signal must stay real
    spec[nc - 1] = std::real(spec[nc - 1]);
  fftw_execute(inv);
  {
    std::lock_guard lock(planner);
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  Trace out(x.axis);
  for (std::size_t i = 0; i < nt; ++i)
    out[i] = buf[i] / static_cast<double>(n);
  return out;
}

/// Misfit between a shifted signal and the reference, per shift. The
/// generator returns the signal delayed by s.
inline std::vector<CurvePoint>
sensitivity_curve(const std::function<Trace(double)> &shifted,
                  const Trace &reference, const std::vector<double> &shifts,
                  const MisfitSpec &spec) {
  spec.validate();
  std::vector<CurvePoint> out;
  out.reserve(shifts.size());
  for (double s : shifts)
    out.push_back({s, trace_misfit(shifted(s), reference, spec).value});
  return out;
}

/// Same with shifts realized by Fourier delay of `base`.
inline std::vector<CurvePoint> sensitivity_curve(const Trace &base,
                                                 const std::vector<double> &shifts,
                                                 const MisfitSpec &spec) {
  for (double s : shifts)
    if (!(std::abs(s) < base.axis.duration()))
      throw DomainError("sensitivity_curve: shift exceeds the time axis");
  return sensitivity_curve([&](double s) { return fourier_shift(base, s); },
                           base, shifts, spec);
}

struct TwoRickerSpec {
  double peak_frequency = 10.0;
  double t1 = 1.2;
  double t2 = 1.7;
  double a1 = 1.0;
  double a2 = 0.7;
  TimeAxis axis{1501, 0.002};

  Trace signal(double shift = 0.0) const {
    return two_ricker_signal(peak_frequency, t1 + shift, t2 + shift, a1, a2,
                             axis);
  }
};

/// Curve for the two-Ricker signal with exact (analytic) shifts.
inline std::vector<CurvePoint> two_ricker_curve(const TwoRickerSpec &base,
                                                const std::vector<double> &shifts,
                                                const MisfitSpec &spec) {
  return sensitivity_curve([&](double s) { return base.signal(s); },
                           base.signal(), shifts, spec);
}

/// Interior local minima. Runs of values equal within tol * max|value| are
/// one point; a run is a minimum when both neighbours exceed it.
inline std::size_t count_local_minima(const std::vector<CurvePoint> &curve,
                                      double rel_tol = 1e-9) {
  double vmax = 0.0;
  for (const auto &p : curve)
    vmax = std::max(vmax, std::abs(p.value));
  const double tol = rel_tol * vmax;
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < curve.size()) {
    std::size_t j = i;
    while (j + 1 < curve.size()
           && std::abs(curve[j + 1].value - curve[i].value) <= tol)
      ++j;
    if (i > 0 && j + 1 < curve.size()
        && curve[i - 1].value > curve[i].value + tol
        && curve[j + 1].value > curve[i].value + tol)
      ++count;
    i = j + 1;
  }
  return count;
}

/// All second differences >= -rel_tol * max|value|.
inline bool is_convex(const std::vector<CurvePoint> &curve,
                      double rel_tol = 1e-6) {
  double vmax = 0.0;
  for (const auto &p : curve)
    vmax = std::max(vmax, std::abs(p.value));
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double d2 = curve[i - 1].value - 2.0 * curve[i].value
                      + curve[i + 1].value;
    if (d2 < -rel_tol * vmax)
      return false;
  }
  return true;
}

} // namespace otfwi
