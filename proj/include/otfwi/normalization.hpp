//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otfwi/core.hpp"

namespace otfwi {

enum class NormalizationKind {
  linear,
  separate_positive,
  separate_negative,
  absolute,
  square,
  exponential,
  mixed,
};

inline std::string_view to_string(NormalizationKind k) {
  switch (k) {
  case NormalizationKind::linear: return "linear";
  case NormalizationKind::separate_positive: return "separate-positive";
  case NormalizationKind::separate_negative: return "separate-negative";
  case NormalizationKind::absolute: return "absolute";
  case NormalizationKind::square: return "square";
  case NormalizationKind::exponential: return "exponential";
  case NormalizationKind::mixed: return "mixed";
  }
  return "?";
}

inline NormalizationKind parse_normalization_kind(std::string_view s) {
  for (auto k : {NormalizationKind::linear, NormalizationKind::separate_positive,
                 NormalizationKind::separate_negative,
                 NormalizationKind::absolute, NormalizationKind::square,
                 NormalizationKind::exponential, NormalizationKind::mixed})
    if (to_string(k) == s)
      return k;
  throw ConfigError("unknown normalization kind '" + std::string(s)
                    + "' (expected linear, separate-positive, "
                      "separate-negative, absolute, square, exponential, "
                      "mixed)");
}

struct NormalizationSpec {
  NormalizationKind kind = NormalizationKind::mixed;
  /// Scale for exponential / mixed. Unset means data-driven:
  /// c = 1 / (0.05 max|g|), putting the mixed map's crossover at 5% of peak.
  /// At 10% the two-Ricker shift curve of the mixed sum loses convexity.
  std::optional<double> c;
  /// Relative mass floor; the absolute floor is epsilon * max(|f|, |g|, 1).
  double epsilon = 1e-8;

  void validate() const {
    if (c && !(*c > 0.0 && std::isfinite(*c)))
      throw ConfigError("normalization scale c must be positive");
    if (!(epsilon >= 0.0))
      throw ConfigError("normalization epsilon must be nonnegative");
  }
};

/// Data-driven scale for the exponential and mixed maps.
inline double default_scale(double reference_max_abs) {
  return reference_max_abs > 0.0 ? 1.0 / (0.05 * reference_max_abs) : 1.0;
}

/// Pointwise map phi applied to a trace, before and after dividing by its
/// trapezoidal mass b = <phi(f)>.
struct Normalized {
  Density density;
  std::vector<double> pre;  // phi(f_i)
  std::vector<double> diag; // phi'(f_i), the diagonal Jacobian
  double mass = 0.0;
  /// Samples where phi is not differentiable (subgradient 0 used).
  std::vector<std::size_t> kinks;
};

/// Output of the linear map, which shares its shift between f and g.
struct NormalizedPair {
  Density f_tilde;
  Density g_tilde;
  std::vector<double> jacobian_diag_f;
  double mass_f = 0.0;
  double mass_g = 0.0;
  double shift = 0.0;
};

namespace detail {

  inline Normalized finish(const TimeAxis &axis, std::vector<double> pre,
                           std::vector<double> diag, double floor,
                           const char *what) {
    const double mass = trapezoid_integral(axis, pre);
    if (!(mass > floor) || !std::isfinite(mass))
      throw DegenerateError(std::string(what)
                            + ": selected part has no mass to normalize");
    Normalized out{Density{axis, std::vector<double>(pre.size())},
                   std::move(pre), std::move(diag), mass, {}};
    const double inv = 1.0 / mass;
    for (std::size_t i = 0; i < out.pre.size(); ++i)
      out.density.values[i] = out.pre[i] * inv;
    return out;
  }

  inline double degenerate_floor(const Trace &f, double epsilon) {
    return epsilon * std::max(f.max_abs(), 1.0) * f.axis.duration();
  }

} // namespace detail

/// f -> (f + shift) / <f + shift> with an explicit, caller-chosen shift.
inline Normalized normalize_shifted(const Trace &f, double shift) {
  std::vector<double> pre(f.size());
  for (std::size_t i = 0; i < pre.size(); ++i)
    pre[i] = f[i] + shift;
  for (double v : pre)
    if (v < 0.0)
      throw DomainError("normalize_shifted: shift leaves negative values");
  return detail::finish(f.axis, std::move(pre),
                        std::vector<double>(f.size(), 1.0), 0.0,
                        "normalize_shifted");
}

/// Shift shared by f and g for the linear map:
/// max(0, -min_t min(f, g)) + epsilon * max(|f|, |g|, 1).
inline double linear_shift(const Trace &f, const Trace &g, double epsilon) {
  double lo = 0.0;
  for (double v : f.samples)
    lo = std::min(lo, v);
  for (double v : g.samples)
    lo = std::min(lo, v);
  return -lo + epsilon * std::max({f.max_abs(), g.max_abs(), 1.0});
}

inline NormalizedPair normalize_linear(const Trace &f, const Trace &g,
                                       const NormalizationSpec &spec = {
                                           NormalizationKind::linear,
                                           std::nullopt, 1e-8}) {
  resample_guard(f.axis, g.axis);
  spec.validate();
  const double shift = linear_shift(f, g, spec.epsilon);
  Normalized nf = normalize_shifted(f, shift);
  Normalized ng = normalize_shifted(g, shift);
  return {std::move(nf.density), std::move(ng.density), std::move(nf.diag),
          nf.mass, ng.mass, shift};
}

enum class Sign { positive, negative };

inline Normalized separate_part(const Trace &f, Sign sign,
                                double epsilon = 1e-8) {
  std::vector<double> pre(f.size()), diag(f.size());
  std::vector<std::size_t> kinks;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double v = sign == Sign::positive ? f[i] : -f[i];
    pre[i] = v > 0.0 ? v : 0.0;
    diag[i] = v > 0.0 ? (sign == Sign::positive ? 1.0 : -1.0) : 0.0;
    if (f[i] == 0.0)
      kinks.push_back(i);
  }
  auto out = detail::finish(f.axis, std::move(pre), std::move(diag),
                            detail::degenerate_floor(f, epsilon),
                            "normalize_separate");
  out.kinks = std::move(kinks);
  return out;
}

/// f+ / <f+> or f- / <f->. Throws DegenerateError when the selected part is
/// (numerically) empty.
inline Density normalize_separate(const Trace &f, Sign sign,
                                  double epsilon = 1e-8) {
  return separate_part(f, sign, epsilon).density;
}

/// As normalize_separate, but an empty part maps to the uniform density.
inline Density normalize_separate_or_uniform(const Trace &f, Sign sign,
                                             double epsilon = 1e-8) {
  try {
    return normalize_separate(f, sign, epsilon);
  } catch (const DegenerateError &) {
    return Density::uniform(f.axis);
  }
}

inline Normalized absolute_part(const Trace &f, double epsilon = 1e-8) {
  std::vector<double> pre(f.size()), diag(f.size());
  std::vector<std::size_t> kinks;
  for (std::size_t i = 0; i < f.size(); ++i) {
    pre[i] = std::abs(f[i]);
    diag[i] = f[i] > 0.0 ? 1.0 : (f[i] < 0.0 ? -1.0 : 0.0);
    if (f[i] == 0.0)
      kinks.push_back(i);
  }
  auto out = detail::finish(f.axis, std::move(pre), std::move(diag),
                            detail::degenerate_floor(f, epsilon),
                            "normalize_absolute");
  out.kinks = std::move(kinks);
  return out;
}

inline Density normalize_absolute(const Trace &f, double epsilon = 1e-8) {
  return absolute_part(f, epsilon).density;
}

inline Normalized square_part(const Trace &f, double epsilon = 1e-8) {
  std::vector<double> pre(f.size()), diag(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    pre[i] = f[i] * f[i];
    diag[i] = 2.0 * f[i];
  }
  const double scale = std::max(f.max_abs(), 1.0);
  return detail::finish(f.axis, std::move(pre), std::move(diag),
                        epsilon * scale * scale * f.axis.duration()
                            * epsilon,
                        "normalize_square");
}

/// f^2 / <f^2>. Blind to the sign of f.
inline Density normalize_square(const Trace &f, double epsilon = 1e-8) {
  return square_part(f, epsilon).density;
}

inline Normalized exponential_part(const Trace &f, double c) {
  if (!(c > 0.0))
    throw ConfigError("normalize_exponential: c must be positive");
  if (c * f.max_abs() > 700.0)
    throw ConfigError("normalize_exponential: c * max|f| exceeds 700 and "
                      "would overflow; choose a smaller c");
  std::vector<double> pre(f.size()), diag(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    pre[i] = std::exp(c * f[i]);
    diag[i] = c * pre[i];
  }
  return detail::finish(f.axis, std::move(pre), std::move(diag), 0.0,
                        "normalize_exponential");
}

/// exp(c f) / <exp(c f)>.
inline Density normalize_exponential(const Trace &f, double c) {
  return exponential_part(f, c).density;
}

/// Pre-normalization sign-sensitive map: f + 1/c for f >= 0 and
/// exp(c f) / c for f < 0. Continuous with matching slope 1 at f = 0.
inline double mixed_map(double f, double c) {
  return f >= 0.0 ? f + 1.0 / c : std::exp(c * f) / c;
}

inline double mixed_map_derivative(double f, double c) {
  return f >= 0.0 ? 1.0 : std::exp(c * f);
}

inline Normalized mixed_part(const Trace &f, double c) {
  if (!(c > 0.0) || !std::isfinite(c))
    throw ConfigError("normalize_mixed: c must be positive");
  std::vector<double> pre(f.size()), diag(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    pre[i] = mixed_map(f[i], c);
    diag[i] = mixed_map_derivative(f[i], c);
  }
  return detail::finish(f.axis, std::move(pre), std::move(diag), 0.0,
                        "normalize_mixed");
}

/// Sign-sensitive normalization of one trace; the returned diag is the
/// pre-normalization Jacobian (1 where f >= 0, exp(c f) where f < 0).
inline Normalized normalize_mixed(const Trace &f, double c) {
  return mixed_part(f, c);
}

/// Single-trace normalization by kind. The linear kind uses the shift that
/// the caller computed from both traces; `c` must be resolved already.
inline Normalized normalize_single(NormalizationKind kind, const Trace &f,
                                   double c, double epsilon,
                                   double linear_shift_value = 0.0) {
  switch (kind) {
  case NormalizationKind::linear:
    return normalize_shifted(f, linear_shift_value);
  case NormalizationKind::separate_positive:
    return separate_part(f, Sign::positive, epsilon);
  case NormalizationKind::separate_negative:
    return separate_part(f, Sign::negative, epsilon);
  case NormalizationKind::absolute:
    return absolute_part(f, epsilon);
  case NormalizationKind::square:
    return square_part(f, epsilon);
  case NormalizationKind::exponential:
    return exponential_part(f, c);
  case NormalizationKind::mixed:
    return mixed_part(f, c);
  }
  throw ConfigError("unknown normalization kind");
}

/// Matrix-free Jacobian of f -> phi(f) / <phi(f)>:
///   d ftilde_i / d f_j = [D_ij b - pre_i D_jj w_j] / b^2.
class NormalizationJacobian {
public:
  NormalizationJacobian(const Normalized &n, std::vector<double> weights)
      : pre_(n.pre), diag_(n.diag), w_(std::move(weights)), mass_(n.mass),
        kinks_(n.kinks) {}

  NormalizationJacobian(const Normalized &n, const TimeAxis &axis)
      : NormalizationJacobian(n, trapezoid_weights(axis)) {}

  bool differentiable() const noexcept { return kinks_.empty(); }
  const std::vector<std::size_t> &kinks() const noexcept { return kinks_; }
  std::span<const double> diagonal() const noexcept { return diag_; }
  double mass() const noexcept { return mass_; }

  std::vector<double> apply(std::span<const double> delta) const {
    double dmass = 0.0;
    for (std::size_t j = 0; j < delta.size(); ++j)
      dmass += w_[j] * diag_[j] * delta[j];
    const double inv = 1.0 / mass_;
    std::vector<double> out(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i)
      out[i] = diag_[i] * delta[i] * inv - pre_[i] * dmass * inv * inv;
    return out;
  }

  std::vector<double> apply_transpose(std::span<const double> r) const {
    double pr = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i)
      pr += pre_[i] * r[i];
    const double inv = 1.0 / mass_;
    std::vector<double> out(r.size());
    for (std::size_t j = 0; j < r.size(); ++j)
      out[j] = diag_[j] * (r[j] * inv - w_[j] * pr * inv * inv);
    return out;
  }

  /// d ftilde / d shift for the linear map: (1 - ftilde_i sum_j w_j) / b.
  std::vector<double> shift_sensitivity() const {
    double wsum = 0.0;
    for (double w : w_)
      wsum += w;
    std::vector<double> out(pre_.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = (1.0 - pre_[i] / mass_ * wsum) / mass_;
    return out;
  }

private:
  std::vector<double> pre_, diag_, w_;
  double mass_;
  std::vector<std::size_t> kinks_;
};

/// Jacobian of the normalization of f under `spec`. For the linear kind the
/// shift is held fixed at `linear_shift_value`; for exponential / mixed an
/// unset c falls back to the data-driven default computed from f.
inline NormalizationJacobian normalization_derivative(
    const NormalizationSpec &spec, const Trace &f,
    double linear_shift_value = 0.0) {
  spec.validate();
  double shift = linear_shift_value;
  if (spec.kind == NormalizationKind::linear && shift == 0.0)
    shift = linear_shift(f, f, spec.epsilon);
  const double c = spec.c.value_or(default_scale(f.max_abs()));
  return NormalizationJacobian(
      normalize_single(spec.kind, f, c, spec.epsilon, shift), f.axis);
}

} // namespace otfwi
