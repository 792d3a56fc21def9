//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "otfwi/core.hpp"

namespace otfwi {

struct RickerSpec {
  double peak_frequency = 10.0; // Hz
  /// Center time t0 in seconds. Unset means 1.2 / peak_frequency, where
  /// the wavelet has decayed to ~1e-6 of its peak at t = 0.
  std::optional<double> delay;
  double amplitude = 1.0;

  double center() const { return delay.value_or(1.2 / peak_frequency); }
};

/// r(t) = A (1 - 2 pi^2 f^2 (t-t0)^2) exp(-pi^2 f^2 (t-t0)^2)
inline double ricker_value(double peak_frequency, double center,
                           double amplitude, double t) {
  const double a = std::numbers::pi * peak_frequency * (t - center);
  const double a2 = a * a;
  return amplitude * (1.0 - 2.0 * a2) * std::exp(-a2);
}

inline Trace ricker(const RickerSpec &spec, const TimeAxis &axis) {
  if (!(spec.peak_frequency > 0.0) || !std::isfinite(spec.peak_frequency))
    throw ConfigError("ricker: peak frequency must be positive");
  const double t0 = spec.center();
  if (!(t0 >= 0.0))
    throw ConfigError("ricker: delay must be nonnegative");
  if (!(t0 < static_cast<double>(axis.nt()) * axis.dt()))
    throw ConfigError("ricker: delay lies beyond the end of the time axis");
  Trace out(axis);
  for (std::size_t i = 0; i < axis.nt(); ++i)
    out[i] = ricker_value(spec.peak_frequency, t0, spec.amplitude, axis.time(i));
  return out;
}

/// Two superposed Ricker wavelets of a common peak frequency.
inline Trace two_ricker_signal(double peak_frequency, double t1, double t2,
                               double a1, double a2, const TimeAxis &axis) {
  const double end = axis.duration();
  if (t1 < 0.0 || t1 > end || t2 < 0.0 || t2 > end)
    throw ConfigError("two_ricker_signal: event times must lie on the axis");
  Trace out(axis);
  for (std::size_t i = 0; i < axis.nt(); ++i) {
    const double t = axis.time(i);
    out[i] = ricker_value(peak_frequency, t1, a1, t)
             + ricker_value(peak_frequency, t2, a2, t);
  }
  return out;
}

namespace detail {

  /// Normalized biquad in transposed direct form II.
  struct Biquad {
    double b0, b1, b2, a1, a2;

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
  };

  /// 4th-order Butterworth high-pass as two bilinear-transformed biquads
  /// with Q = 1 / (2 cos(k pi / 8)), k = 1, 3.
  inline std::array<Biquad, 2> butterworth4_highpass(double cutoff,
                                                     double dt) {
    const double w0 = 2.0 * std::numbers::pi * cutoff * dt;
    const double cw = std::cos(w0);
    const double sw = std::sin(w0);
    std::array<Biquad, 2> out{};
    const std::array<double, 2> angles{std::numbers::pi / 8.0,
                                       3.0 * std::numbers::pi / 8.0};
    for (std::size_t k = 0; k < 2; ++k) {
      const double q = 1.0 / (2.0 * std::cos(angles[k]));
      const double alpha = sw / (2.0 * q);
      const double a0 = 1.0 + alpha;
      out[k] = {0.5 * (1.0 + cw) / a0, -(1.0 + cw) / a0, 0.5 * (1.0 + cw) / a0,
                -2.0 * cw / a0, (1.0 - alpha) / a0};
    }
    return out;
  }

  /// Filters in place, starting every section in the steady state it would
  /// have reached under a constant input equal to x[0].
  inline void sosfilt_steady(const std::array<Biquad, 2> &sos,
                             std::vector<double> &x) {
    if (x.empty())
      return;
    double level = x.front();
    for (const auto &s : sos) {
      const double gain = s.dc_gain();
      double z2 = (s.b2 - s.a2 * gain) * level;
      double z1 = (s.b1 - s.a1 * gain) * level + z2;
      for (double &v : x) {
        const double in = v;
        const double y = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * y + z2;
        z2 = s.b2 * in - s.a2 * y;
        v = y;
      }
      level *= gain;
    }
  }

} // namespace detail

/// Zero-phase 4th-order Butterworth high-pass (applied forward then
/// backward, so the magnitude response is squared). Edges are handled with
/// odd reflection padding and steady-state section initialization.
inline Trace highpass(const Trace &in, double cutoff) {
  const double dt = in.axis.dt();
  const double nyquist = 0.5 / dt;
  if (!(cutoff > 0.0) || !(cutoff < nyquist))
    throw ConfigError("highpass: cutoff must lie in (0, Nyquist)");

  const auto sos = detail::butterworth4_highpass(cutoff, dt);
  const std::size_t n = in.size();
  const std::size_t pad = std::min<std::size_t>(
      n - 1, std::max<std::size_t>(15, static_cast<std::size_t>(
                                           std::ceil(1.0 / (cutoff * dt)))));

  std::vector<double> ext(n + 2 * pad);
  const double first = in[0];
  const double last = in[n - 1];
  for (std::size_t k = 0; k < pad; ++k) {
    ext[k] = 2.0 * first - in[pad - k];
    ext[pad + n + k] = 2.0 * last - in[n - 2 - k];
  }
  std::copy(in.samples.begin(), in.samples.end(),
            ext.begin() + static_cast<std::ptrdiff_t>(pad));

  detail::sosfilt_steady(sos, ext);
  std::reverse(ext.begin(), ext.end());
  detail::sosfilt_steady(sos, ext);
  std::reverse(ext.begin(), ext.end());

  Trace out(in.axis);
  std::copy_n(ext.begin() + static_cast<std::ptrdiff_t>(pad), n,
              out.samples.begin());
  return out;
}

} // namespace otfwi
