//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "otfwi/core.hpp"
#include "otfwi/log.hpp"
#include "otfwi/normalization.hpp"
#include "otfwi/transport.hpp"

namespace otfwi {

enum class MisfitKind { l2, w2_trace };

/// How normalized W2 terms are combined per trace:
///   single        W2^2(N(f), N(g))
///   separate_sum  W2^2(f+, g+) + W2^2(f-, g-)
///   mixed_sum     W2^2(P(f), P(g)) + W2^2(P(-f), P(-g))
enum class Combination { single, separate_sum, mixed_sum };

struct MisfitSpec {
  MisfitKind kind = MisfitKind::l2;
  NormalizationSpec normalization;
  Combination combination = Combination::single;

  static MisfitSpec l2() { return {}; }
  static MisfitSpec w2(NormalizationKind k,
                       Combination comb = Combination::single) {
    return {MisfitKind::w2_trace, {k, std::nullopt, 1e-8}, comb};
  }
  /// Positive and negative parts transported separately.
  static MisfitSpec w2_separate() {
    return w2(NormalizationKind::separate_positive, Combination::separate_sum);
  }
  /// Sign-sensitive map applied to f and to -f, both terms summed.
  static MisfitSpec w2_mixed() {
    return w2(NormalizationKind::mixed, Combination::mixed_sum);
  }

  void validate() const {
    normalization.validate();
    if (kind == MisfitKind::l2)
      return;
    const auto k = normalization.kind;
    if (combination == Combination::separate_sum
        && k != NormalizationKind::separate_positive
        && k != NormalizationKind::separate_negative)
      throw ConfigError("separate-sum combination requires a separate "
                        "normalization");
    if (combination == Combination::mixed_sum && k != NormalizationKind::mixed)
      throw ConfigError("mixed-sum combination requires the mixed "
                        "normalization");
  }

  /// Whether the value is differentiable in the data for generic traces.
  bool differentiable() const {
    if (kind == MisfitKind::l2)
      return true;
    switch (normalization.kind) {
    case NormalizationKind::separate_positive:
    case NormalizationKind::separate_negative:
    case NormalizationKind::absolute:
      return false;
    default:
      return true;
    }
  }
};

struct NamedMisfit {
  std::string_view name;
  MisfitSpec spec;
};

inline std::vector<NamedMisfit> misfit_catalog() {
  using K = NormalizationKind;
  return {
      {"l2", MisfitSpec::l2()},
      {"w2-linear", MisfitSpec::w2(K::linear)},
      {"w2-square", MisfitSpec::w2(K::square)},
      {"w2-exp", MisfitSpec::w2(K::exponential)},
      {"w2-mixed", MisfitSpec::w2_mixed()},
      {"w2-separate", MisfitSpec::w2_separate()},
      {"w2-mixed-single", MisfitSpec::w2(K::mixed)},
      {"w2-abs", MisfitSpec::w2(K::absolute)},
  };
}

inline std::string misfit_names() {
  std::string out;
  for (const auto &m : misfit_catalog()) {
    if (!out.empty())
      out += ", ";
    out += m.name;
  }
  return out;
}

inline MisfitSpec parse_misfit(std::string_view name) {
  for (const auto &m : misfit_catalog())
    if (m.name == name)
      return m.spec;
  throw ConfigError("unknown misfit '" + std::string(name)
                    + "'; valid names: " + misfit_names());
}

struct TraceMisfit {
  double value = 0.0;
  std::vector<double> adjoint; // dJ/df per sample
  bool degenerate = false;
};

struct MisfitReport {
  double value = 0.0;
  std::vector<std::vector<double>> adjoint_sources;
  std::vector<double> per_trace_values;
  std::size_t degenerate_traces = 0;
};

namespace detail {

  inline std::vector<double> transpose_apply(const Normalized &n,
                                             const TimeAxis &axis,
                                             std::span<const double> grad) {
    return NormalizationJacobian(n, axis).apply_transpose(grad);
  }

  /// a.e. gradient of linear_shift with respect to f.
  inline std::vector<double> linear_shift_gradient(const Trace &f,
                                                   const Trace &g,
                                                   double epsilon) {
    std::vector<double> out(f.size(), 0.0);
    const auto fmin = std::min_element(f.samples.begin(), f.samples.end());
    const auto gmin = std::min_element(g.samples.begin(), g.samples.end());
    if (*fmin < 0.0 && *fmin <= *gmin)
      out[static_cast<std::size_t>(fmin - f.samples.begin())] -= 1.0;
    const double fa = f.max_abs();
    if (fa > 1.0 && fa >= g.max_abs()) {
      std::size_t arg = 0;
      for (std::size_t i = 0; i < f.size(); ++i)
        if (std::abs(f[i]) == fa) {
          arg = i;
          break;
        }
      out[arg] += epsilon * (f[arg] > 0.0 ? 1.0 : -1.0);
    }
    return out;
  }

  inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += a[i] * b[i];
    return s;
  }

  /// One W2 term between normalized f and g; adds dJ/df into `adj`.
  inline double w2_term(const Trace &f, const Trace &g, NormalizationKind kind,
                        double c, double epsilon, double sign,
                        std::vector<double> &adj) {
    const Normalized nf = normalize_single(kind, f, c, epsilon);
    const Normalized ng = normalize_single(kind, g, c, epsilon);
    const TransportResult tr = w2_1d(nf.density, ng.density);
    const auto back = transpose_apply(nf, f.axis, tr.grad_f);
    for (std::size_t i = 0; i < adj.size(); ++i)
      adj[i] += sign * back[i];
    return tr.distance_sq;
  }

  inline Trace negated(const Trace &t) {
    Trace out(t.axis);
    for (std::size_t i = 0; i < t.size(); ++i)
      out[i] = -t[i];
    return out;
  }

} // namespace detail

/// L2 misfit of one trace pair: 1/2 int |f - g|^2 dt (trapezoidal).
inline TraceMisfit trace_misfit_l2(const Trace &f, const Trace &g) {
  resample_guard(f.axis, g.axis);
  const auto w = trapezoid_weights(f.axis);
  TraceMisfit out{0.0, std::vector<double>(f.size()), false};
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f[i] - g[i];
    out.value += 0.5 * w[i] * r * r;
    out.adjoint[i] = w[i] * r;
  }
  return out;
}

/// Trace-by-trace W2 misfit of one trace pair with a resolved scale `c`.
/// Degenerate normalizations make the affected term contribute nothing.
inline TraceMisfit trace_misfit_w2(const Trace &f, const Trace &g,
                                   const MisfitSpec &spec, double c) {
  resample_guard(f.axis, g.axis);
  const auto &ns = spec.normalization;
  TraceMisfit out{0.0, std::vector<double>(f.size(), 0.0), false};

  auto guarded = [&](auto &&term) {
    try {
      out.value += term();
    } catch (const DegenerateError &) {
      out.degenerate = true;
    }
  };

  switch (spec.combination) {
  case Combination::single:
    if (ns.kind == NormalizationKind::linear) {
      const double shift = linear_shift(f, g, ns.epsilon);
      const Normalized nf = normalize_shifted(f, shift);
      const Normalized ng = normalize_shifted(g, shift);
      const TransportResult tr = w2_1d(nf.density, ng.density);
      const NormalizationJacobian jf(nf, f.axis);
      const NormalizationJacobian jg(ng, g.axis);
      out.value = tr.distance_sq;
      out.adjoint = jf.apply_transpose(tr.grad_f);
      // The shared shift depends on f through min(f) and max|f|.
      const double coupling = detail::dot(tr.grad_f, jf.shift_sensitivity())
                              + detail::dot(tr.grad_g, jg.shift_sensitivity());
      const auto ds = detail::linear_shift_gradient(f, g, ns.epsilon);
      for (std::size_t i = 0; i < ds.size(); ++i)
        out.adjoint[i] += coupling * ds[i];
    } else {
      guarded([&] {
        return detail::w2_term(f, g, ns.kind, c, ns.epsilon, 1.0, out.adjoint);
      });
    }
    break;
  case Combination::separate_sum:
    guarded([&] {
      return detail::w2_term(f, g, NormalizationKind::separate_positive, c,
                             ns.epsilon, 1.0, out.adjoint);
    });
    guarded([&] {
      return detail::w2_term(f, g, NormalizationKind::separate_negative, c,
                             ns.epsilon, 1.0, out.adjoint);
    });
    break;
  case Combination::mixed_sum: {
    out.value += detail::w2_term(f, g, NormalizationKind::mixed, c,
                                 ns.epsilon, 1.0, out.adjoint);
    // P(-f): the inner sign flip turns J^T grad into -J^T grad.
    out.value += detail::w2_term(detail::negated(f), detail::negated(g),
                                 NormalizationKind::mixed, c, ns.epsilon,
                                 -1.0, out.adjoint);
    break;
  }
  }
  return out;
}

/// Scale c for one shot: the spec's value, or the data-driven default
/// computed from the observed gather's peak amplitude.
inline double resolve_scale(const MisfitSpec &spec, double observed_max_abs) {
  return spec.normalization.c.value_or(default_scale(observed_max_abs));
}

inline TraceMisfit trace_misfit(const Trace &f, const Trace &g,
                                const MisfitSpec &spec) {
  spec.validate();
  if (spec.kind == MisfitKind::l2)
    return trace_misfit_l2(f, g);
  return trace_misfit_w2(f, g, spec, resolve_scale(spec, g.max_abs()));
}

namespace detail {

  template <class PerTrace>
  MisfitReport assemble_report(const ShotGather &f, const ShotGather &g,
                               PerTrace &&per_trace) {
    check_same_geometry(f, g);
    MisfitReport rep;
    rep.per_trace_values.reserve(f.traces.size());
    rep.adjoint_sources.reserve(f.traces.size());
    for (std::size_t r = 0; r < f.traces.size(); ++r) {
      TraceMisfit tm = per_trace(f.traces[r], g.traces[r]);
      if (tm.degenerate) {
        ++rep.degenerate_traces;
        log::warn("trace " + std::to_string(r)
                  + ": degenerate normalization, term dropped");
      }
      rep.value += tm.value;
      rep.per_trace_values.push_back(tm.value);
      rep.adjoint_sources.push_back(std::move(tm.adjoint));
    }
    return rep;
  }

} // namespace detail

/// J1 = 1/2 sum_r int |f - g|^2 dt.
inline MisfitReport misfit_l2(const ShotGather &f, const ShotGather &g) {
  return detail::assemble_report(
      f, g, [](const Trace &a, const Trace &b) { return trace_misfit_l2(a, b); });
}

/// Trace-by-trace W2 misfit (J2, J3, J4 and the single-map variants).
inline MisfitReport misfit_w2_trace(const ShotGather &f, const ShotGather &g,
                                    const MisfitSpec &spec) {
  spec.validate();
  if (spec.kind != MisfitKind::w2_trace)
    throw ConfigError("misfit_w2_trace: spec is not a W2 misfit");
  const double c = resolve_scale(spec, g.max_abs());
  return detail::assemble_report(f, g, [&](const Trace &a, const Trace &b) {
    return trace_misfit_w2(a, b, spec, c);
  });
}

inline MisfitReport evaluate_misfit(const ShotGather &f, const ShotGather &g,
                                    const MisfitSpec &spec) {
  spec.validate();
  return spec.kind == MisfitKind::l2 ? misfit_l2(f, g)
                                     : misfit_w2_trace(f, g, spec);
}

} // namespace otfwi
