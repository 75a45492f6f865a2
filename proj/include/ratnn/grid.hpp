#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratnn/real.hpp"

namespace ratnn {

using RealFn = std::function<Real(const Real&)>;

enum class Spacing { Uniform, Chebyshev };

/// Evaluation grid on [lo, hi]; endpoints are included for both spacings.
struct Grid {
  Real lo;
  Real hi;
  std::size_t n = 0;
  Spacing spacing = Spacing::Uniform;

  Grid(Real lo_, Real hi_, std::size_t n_, Spacing spacing_ = Spacing::Uniform)
      : lo(std::move(lo_)), hi(std::move(hi_)), n(n_), spacing(spacing_) {
    if (!(lo < hi)) throw std::invalid_argument("Grid: requires lo < hi");
    if (n < 2) throw std::invalid_argument("Grid: requires n >= 2");
  }

  std::vector<Real> points(const PrecisionContext& ctx) const {
    PrecisionContext::ScopedPrecision guard(ctx);
    std::vector<Real> pts;
    pts.reserve(n);
    const Real mid = (lo + hi) / 2;
    const Real half = (hi - lo) / 2;
    for (std::size_t i = 0; i < n; ++i) {
      if (spacing == Spacing::Uniform) {
        pts.push_back(lo + (hi - lo) * Real(i) / Real(n - 1));
      } else {
        // Chebyshev points of the second kind, descending cos ordering
        // flipped so the sequence runs lo -> hi.
        Real theta = const_pi(ctx) * Real(n - 1 - i) / Real(n - 1);
        pts.push_back(mid + half * cos(theta));
      }
    }
    pts.front() = lo;
    pts.back() = hi;
    return pts;
  }
};

inline Grid default_grid(const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  return Grid(Real(-1), Real(1), 2001, Spacing::Uniform);
}

/// Sup-norm error over a grid plus the size/trace bookkeeping that
/// experiment reports carry around.
struct ErrorReport {
  Real sup_error;
  Real argmax;
  std::size_t size = 0;
  std::vector<Real> per_step_errors;
};

struct SlopeFit {
  Real slope;
  Real intercept;
  Real r2;
  std::size_t window_begin = 0;
  std::size_t window_end = 0;  // one past the last index used
};

inline ErrorReport sup_error(const RealFn& f, const RealFn& g, const Grid& grid,
                             const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  ErrorReport report{Real(0), grid.lo, 0, {}};
  for (const Real& x : grid.points(ctx)) {
    Real fx = f(x);
    Real gx = g(x);
    if (!isfinite(fx) || !isfinite(gx)) {
      throw std::runtime_error("sup_error: non-finite value at x = " + x.str(20, std::ios_base::scientific));
    }
    Real dev = abs(fx - gx);
    if (dev > report.sup_error) {
      report.sup_error = dev;
      report.argmax = x;
    }
  }
  return report;
}

namespace detail {

inline SlopeFit fit_line(const std::vector<Real>& ys, std::size_t begin, std::size_t end) {
  Real sx(0), sy(0), sxx(0), sxy(0), syy(0);
  for (std::size_t k = begin; k < end; ++k) {
    Real x(k);
    sx += x;
    sy += ys[k];
    sxx += x * x;
    sxy += x * ys[k];
    syy += ys[k] * ys[k];
  }
  Real n(end - begin);
  Real denom = n * sxx - sx * sx;
  SlopeFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  Real ss_tot = syy - sy * sy / n;
  Real ss_res(0);
  for (std::size_t k = begin; k < end; ++k) {
    Real r = ys[k] - (fit.slope * Real(k) + fit.intercept);
    ss_res += r * r;
  }
  fit.r2 = ss_tot > 0 ? Real(1) - ss_res / ss_tot : Real(1);
  fit.window_begin = begin;
  fit.window_end = end;
  return fit;
}

}  // namespace detail

/// Least-squares line through (k, log(-log e_k)) over the admissible window.
///
/// Entries at or below 4x the context unit roundoff are roundoff-dominated
/// and excluded, so the window ends at the precision floor. Leading entries
/// reflect the seed of an iteration rather than its contraction rate;
/// they are trimmed while removing the first point still moves the fitted
/// slope by more than 1%. A sequence that is exactly linear in these
/// coordinates keeps its full window.
inline SlopeFit fit_double_exp_slope(const std::vector<Real>& errors,
                                     const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  const Real floor = 4 * ctx.eps();
  std::size_t end = 0;
  for (const Real& e : errors) {
    if (!(e > 0 && e < 1)) {
      throw std::invalid_argument("fit_double_exp_slope: errors must lie in (0,1)");
    }
    if (e <= floor) break;
    ++end;
  }
  if (end < 3) {
    throw std::runtime_error("fit_double_exp_slope: fewer than 3 points above the precision floor");
  }
  std::vector<Real> ys;
  ys.reserve(end);
  for (std::size_t k = 0; k < end; ++k) ys.push_back(log(-log(errors[k])));
  std::size_t begin = 0;
  while (end - begin > 3) {
    SlopeFit with_first = detail::fit_line(ys, begin, end);
    SlopeFit without = detail::fit_line(ys, begin + 1, end);
    if (abs(with_first.slope - without.slope) <= abs(without.slope) / 100) break;
    ++begin;
  }
  return detail::fit_line(ys, begin, end);
}

}  // namespace ratnn
