//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "otfwi/error.hpp"

namespace otfwi {

namespace detail {

  inline double dot_product(std::span<const double> a,
                            std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += a[i] * b[i];
    return s;
  }

  inline double norm2(std::span<const double> a) {
    return std::sqrt(dot_product(a, a));
  }

} // namespace detail

/// Box constraints lower <= x <= upper, elementwise.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  static Box unbounded(std::size_t n) {
    return {std::vector<double>(n, -HUGE_VAL), std::vector<double>(n, HUGE_VAL)};
  }

  void project(std::span<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::clamp(x[i], lower[i], upper[i]);
  }

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lower[i] || x[i] > upper[i])
        return false;
    return true;
  }
};

/// Bounded history of (s, y) correction pairs with the two-loop recursion.
class LbfgsHistory {
public:
  explicit LbfgsHistory(std::size_t memory = 5,
                        double curvature_tol = 1e-10)
      : memory_(memory), curvature_tol_(curvature_tol) {
    if (memory == 0)
      throw ConfigError("l-BFGS memory must be at least 1");
  }

  std::size_t size() const noexcept { return pairs_.size(); }
  std::size_t memory() const noexcept { return memory_; }
  void clear() { pairs_.clear(); }

  /// Stores the pair unless y's curvature along s is too small relative to
  /// |s||y|; returns whether it was kept.
  bool push(std::vector<double> s, std::vector<double> y) {
    const double sy = detail::dot_product(s, y);
    if (!(sy > curvature_tol_ * detail::norm2(s) * detail::norm2(y)))
      return false;
    if (pairs_.size() == memory_)
      pairs_.pop_front();
    pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
    return true;
  }

  /// d = -H g. With an empty history d = -g.
  std::vector<double> direction(std::span<const double> g) const {
    std::vector<double> q(g.begin(), g.end());
    const std::size_t k = pairs_.size();
    std::vector<double> alpha(k);
    for (std::size_t j = k; j-- > 0;) {
      const auto &p = pairs_[j];
      alpha[j] = p.rho * detail::dot_product(p.s, q);
      for (std::size_t i = 0; i < q.size(); ++i)
        q[i] -= alpha[j] * p.y[i];
    }
    if (k > 0) {
      const auto &last = pairs_.back();
      const double gamma = 1.0 / (last.rho * detail::dot_product(last.y, last.y));
      for (double &v : q)
        v *= gamma;
    }
    for (std::size_t j = 0; j < k; ++j) {
      const auto &p = pairs_[j];
      const double beta = p.rho * detail::dot_product(p.y, q);
      for (std::size_t i = 0; i < q.size(); ++i)
        q[i] += (alpha[j] - beta) * p.s[i];
    }
    for (double &v : q)
      v = -v;
    return q;
  }

private:
  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::size_t memory_;
  double curvature_tol_;
  std::deque<Pair> pairs_;
};

struct LineSearchOptions {
  double c1 = 1e-4;
  std::size_t max_reductions = 20;
};

struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;
};

struct LineSearchResult {
  bool accepted = false;
  double alpha = 0.0;
  std::vector<double> x;
  Evaluation eval;
  std::size_t evaluations = 0;
};

/// Projected backtracking along x + alpha d, accepting the first trial with
///   f(P(x + alpha d)) <= f(x) + c1 g^T (P(x + alpha d) - x).
/// Rejected trials shrink alpha by safeguarded quadratic interpolation.
template <class Objective>
LineSearchResult projected_backtracking(Objective &&objective,
                                        std::span<const double> x,
                                        const Evaluation &at_x,
                                        std::span<const double> d,
                                        double alpha0, const Box &box,
                                        const LineSearchOptions &opts = {}) {
  LineSearchResult res;
  double alpha = alpha0;
  std::vector<double> trial(x.size());
  for (std::size_t k = 0; k <= opts.max_reductions; ++k) {
    for (std::size_t i = 0; i < x.size(); ++i)
      trial[i] = x[i] + alpha * d[i];
    box.project(trial);
    double slope = 0.0; // g^T (trial - x)
    for (std::size_t i = 0; i < x.size(); ++i)
      slope += at_x.gradient[i] * (trial[i] - x[i]);
    if (slope >= 0.0)
      break; // projection killed the descent
    Evaluation e = objective(std::span<const double>(trial));
    ++res.evaluations;
    if (std::isfinite(e.value) && e.value <= at_x.value + opts.c1 * slope) {
      res.accepted = true;
      res.alpha = alpha;
      res.x = trial;
      res.eval = std::move(e);
      return res;
    }
    // Minimizer of the quadratic through f(0), f'(0) and f(alpha).
    double next = 0.5 * alpha;
    if (std::isfinite(e.value)) {
      const double curv = e.value - at_x.value - slope;
      if (curv > 0.0)
        next = -0.5 * slope * alpha / curv;
    }
    alpha = std::clamp(next, 0.1 * alpha, 0.5 * alpha);
  }
  return res;
}

struct LbfgsOptions {
  std::size_t memory = 5;
  std::size_t max_iterations = 100;
  double gradient_tol = 1e-10;
  double curvature_tol = 1e-10;
  LineSearchOptions line_search;
  /// First trial step when the history is empty; <= 0 means 1 / |g|.
  double initial_step = 0.0;
};

struct LbfgsResult {
  std::vector<double> x;
  Evaluation eval;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  bool stagnated = false;
  std::vector<double> history;
};

/// Projected gradient: components pushing against an active bound vanish.
inline std::vector<double> projected_gradient(std::span<const double> x,
                                              std::span<const double> g,
                                              const Box &box) {
  std::vector<double> out(g.begin(), g.end());
  for (std::size_t i = 0; i < x.size(); ++i)
    if ((x[i] <= box.lower[i] && g[i] > 0.0)
        || (x[i] >= box.upper[i] && g[i] < 0.0))
      out[i] = 0.0;
  return out;
}

/// Generic bound-constrained l-BFGS on vectors. Objective maps x to its
/// value and gradient.
template <class Objective>
LbfgsResult minimize_lbfgs(Objective &&objective, std::vector<double> x,
                           const Box &box, const LbfgsOptions &opts = {}) {
  box.project(x);
  LbfgsResult res;
  LbfgsHistory hist(opts.memory, opts.curvature_tol);
  res.eval = objective(std::span<const double>(x));
  res.evaluations = 1;
  res.history.push_back(res.eval.value);
  for (; res.iterations < opts.max_iterations; ++res.iterations) {
    const auto pg = projected_gradient(x, res.eval.gradient, box);
    if (detail::norm2(pg) < opts.gradient_tol) {
      res.converged = true;
      break;
    }
    // Active variables stay put; the quasi-Newton step acts on the rest.
    auto search = [&]() {
      auto d = hist.direction(pg);
      for (std::size_t i = 0; i < d.size(); ++i)
        if (pg[i] == 0.0 && res.eval.gradient[i] != 0.0)
          d[i] = 0.0;
      if (detail::dot_product(d, pg) >= 0.0) {
        hist.clear();
        d = hist.direction(pg);
      }
      const double alpha0 = hist.size() > 0 ? 1.0
                            : opts.initial_step > 0.0
                                ? opts.initial_step
                                : 1.0 / detail::norm2(pg);
      auto ls = projected_backtracking(objective, x, res.eval, d, alpha0, box,
                                       opts.line_search);
      res.evaluations += ls.evaluations;
      return ls;
    };
    auto ls = search();
    if (!ls.accepted && hist.size() > 0) {
      hist.clear();
      ls = search();
    }
    if (!ls.accepted) {
      res.stagnated = true;
      break;
    }
    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      s[i] = ls.x[i] - x[i];
      y[i] = ls.eval.gradient[i] - res.eval.gradient[i];
    }
    hist.push(std::move(s), std::move(y));
    x = std::move(ls.x);
    res.eval = std::move(ls.eval);
    res.history.push_back(res.eval.value);
  }
  res.x = std::move(x);
  return res;
}

} // namespace otfwi
