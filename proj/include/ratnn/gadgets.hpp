#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ratnn/chebyshev.hpp"
#include "ratnn/grid.hpp"
#include "ratnn/rational.hpp"
#include "ratnn/real.hpp"

namespace ratnn {

// ---------------------------------------------------------------------------
// GELU and the scaled square family
// ---------------------------------------------------------------------------

struct GeluConstants {
  Real alpha;  // sqrt(2/pi)
  Real beta;   // 0.044715
  Real s0;     // 1 / (2 alpha (1+beta)); |P(su)| <= 1/2 for |u|<=1, |s|<=s0

  static GeluConstants make(const PrecisionContext& ctx) {
    PrecisionContext::ScopedPrecision guard(ctx);
    GeluConstants c;
    c.alpha = sqrt(2 / const_pi(ctx));
    c.beta = Real("0.044715");
    c.s0 = 1 / (2 * c.alpha * (1 + c.beta));
    return c;
  }

  Real cubic(const Real& x) const { return alpha * (x + beta * x * x * x); }
};

/// Count of scalar GELU evaluations, the network-size measure for every
/// construction in this header.
inline std::atomic<long>& gelu_call_counter() {
  static std::atomic<long> n{0};
  return n;
}

inline Real gelu(const Real& x, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  ++gelu_call_counter();
  GeluConstants c = GeluConstants::make(ctx);
  return x / 2 * (1 + oracle::tanh(c.cubic(x)));
}

namespace detail {

/// GELU evaluation restricted to the small-argument regime |P(z)| <= 1/2
/// that the square family is designed to stay inside. The check is an
/// instrumented assertion, not a numerical tolerance.
inline Real gelu_small_arg(const Real& z, const GeluConstants& c,
                           const PrecisionContext& ctx) {
  Real p = c.cubic(z);
  if (abs(p) > Real(1) / 2 + 64 * ctx.eps()) {
    throw std::logic_error("gelu_small_arg: |P(z)| > 1/2 inside a square gadget");
  }
  ++gelu_call_counter();
  return z / 2 * (1 + oracle::tanh(p));
}

}  // namespace detail

/// S_s(u) = (G(su) + G(-su)) / (alpha s^2); tends to u^2 as s -> 0.
inline Real s_family(const Real& s, const Real& u, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  GeluConstants c = GeluConstants::make(ctx);
  if (!(s > 0 && s <= c.s0)) {
    throw std::domain_error("s_family: scale must lie in (0, s0]");
  }
  if (abs(u) > 1 + 16 * ctx.eps()) {
    throw std::domain_error("s_family: |u| must be <= 1");
  }
  Real a = detail::gelu_small_arg(s * u, c, ctx);
  Real b = detail::gelu_small_arg(-s * u, c, ctx);
  return (a + b) / (c.alpha * s * s);
}

// ---------------------------------------------------------------------------
// Richardson extrapolation across scales
// ---------------------------------------------------------------------------

/// a_j(gamma) = prod_{k != j} 1 / (1 - gamma^{-2(j-k)}), the closed-form
/// solution of the moment system sum a_j = 1, sum a_j gamma^{-2 l j} = 0.
inline std::vector<Real> richardson_coeffs(std::size_t j_count, const Real& gamma,
                                           const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (!(gamma > 1)) throw std::domain_error("richardson_coeffs: gamma must exceed 1");
  std::vector<Real> a(j_count + 1);
  for (std::size_t j = 0; j <= j_count; ++j) {
    Real prod(1);
    for (std::size_t k = 0; k <= j_count; ++k) {
      if (k == j) continue;
      prod /= 1 - pow(gamma, -2 * (static_cast<long>(j) - static_cast<long>(k)));
    }
    a[j] = prod;
  }
  return a;
}

struct RichardsonPlan {
  Real gamma;
  std::size_t j_levels = 0;  // extrapolation order J
  Real s;                    // base scale s*/gamma with s* = s0
  std::vector<Real> coeffs;  // a_0 .. a_J

  static RichardsonPlan make(std::size_t j_levels, const Real& gamma,
                             const PrecisionContext& ctx) {
    PrecisionContext::ScopedPrecision guard(ctx);
    RichardsonPlan plan;
    plan.gamma = gamma;
    plan.j_levels = j_levels;
    plan.s = GeluConstants::make(ctx).s0 / gamma;
    plan.coeffs = richardson_coeffs(j_levels, gamma, ctx);
    return plan;
  }

  /// Smallest J with C2 gamma^{-2(J+1)} <= delta. C2 is an empirically
  /// calibrated stand-in for the existential constant; it is reported by
  /// callers, never asserted exact.
  static RichardsonPlan for_delta(const Real& delta, const Real& gamma,
                                  const PrecisionContext& ctx, const Real& c2 = Real(4)) {
    PrecisionContext::ScopedPrecision guard(ctx);
    if (!(delta > 0)) throw std::domain_error("RichardsonPlan: delta must be positive");
    Real j_real = ceil(log(c2 / delta) / (2 * log(gamma)));
    std::size_t j = j_real < 0 ? 0 : static_cast<std::size_t>(j_real.convert_to<long>());
    return make(j, gamma, ctx);
  }
};

// ---------------------------------------------------------------------------
// Square and product gadgets on a fixed range
// ---------------------------------------------------------------------------

struct GadgetConfig {
  Real range_b;        // B >= 1
  Real range_b_prime;  // B + 1
  Real delta;
  std::size_t j_levels = 0;
  Real gamma;
  Real c4;  // 2 / (1 - 1/rho)^2, recorded when derived from Bernstein data

  static GadgetConfig make(const Real& range_b, const Real& delta, const Real& gamma,
                           const PrecisionContext& ctx, const Real& c2 = Real(4)) {
    PrecisionContext::ScopedPrecision guard(ctx);
    if (!(range_b >= 1)) throw std::domain_error("GadgetConfig: B must be >= 1");
    GadgetConfig cfg;
    cfg.range_b = range_b;
    cfg.range_b_prime = range_b + 1;
    cfg.delta = delta;
    cfg.gamma = gamma;
    cfg.j_levels = RichardsonPlan::for_delta(delta, gamma, ctx, c2).j_levels;
    cfg.c4 = Real(0);
    return cfg;
  }

  /// B = ceil(2 C4 M_rho) + 1 with C4 = 2/(1-1/rho)^2, the range needed for
  /// the Clenshaw states of an expansion with Bernstein data (rho, M_rho).
  static GadgetConfig for_clenshaw(const Real& rho, const Real& m_rho, const Real& delta,
                                   const Real& gamma, const PrecisionContext& ctx,
                                   const Real& c2 = Real(4)) {
    PrecisionContext::ScopedPrecision guard(ctx);
    Real c4 = 2 / pow(1 - 1 / rho, 2);
    Real b = ceil(2 * c4 * m_rho) + 1;
    GadgetConfig cfg = make(b, delta, gamma, ctx, c2);
    cfg.c4 = c4;
    return cfg;
  }
};

/// S_B^(J)(u) = B^2 T_J(u/B; s): Richardson-extrapolated square on [-B, B],
/// accurate to delta B^2 once J >= log(C2/delta) / (2 log gamma).
inline Real square_block(const GadgetConfig& cfg, const RichardsonPlan& plan,
                         const Real& u, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  const Real b = cfg.range_b;
  if (abs(u) > b * (1 + 16 * ctx.eps())) {
    throw std::domain_error("square_block: |u| must be <= B");
  }
  GeluConstants c = GeluConstants::make(ctx);
  Real v = u / b;
  Real acc(0);
  for (std::size_t j = 0; j <= plan.j_levels; ++j) {
    Real sj = plan.s * pow(plan.gamma, -static_cast<long>(j));
    Real g1 = detail::gelu_small_arg(sj * v, c, ctx);
    Real g2 = detail::gelu_small_arg(-sj * v, c, ctx);
    acc += plan.coeffs[j] * (g1 + g2) / (c.alpha * sj * sj);
  }
  return b * b * acc;
}

/// Mult(a,b) = (S_{B'}(a+b) - S_{B'}(a) - S_{B'}(b)) / 2, for |a| <= 1 and
/// |b| <= B; error at most (3/2) delta B'^2. Each of the three squares runs
/// at accuracy delta/3 (uniform split of the budget).
inline Real mult_block(const GadgetConfig& cfg, const Real& a, const Real& b,
                       const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (abs(a) > 1 + 16 * ctx.eps()) {
    throw std::domain_error("mult_block: |a| must be <= 1");
  }
  if (abs(b) > cfg.range_b * (1 + 16 * ctx.eps())) {
    throw std::domain_error("mult_block: |b| must be <= B");
  }
  GadgetConfig sq = GadgetConfig::make(cfg.range_b_prime, cfg.delta / 3, cfg.gamma, ctx);
  RichardsonPlan plan = RichardsonPlan::make(sq.j_levels, cfg.gamma, ctx);
  Real s_ab = square_block(sq, plan, a + b, ctx);
  Real s_a = square_block(sq, plan, a, ctx);
  Real s_b = square_block(sq, plan, b, ctx);
  return (s_ab - s_a - s_b) / 2;
}

// ---------------------------------------------------------------------------
// Inexact Clenshaw recurrence
// ---------------------------------------------------------------------------

using MultFn = std::function<Real(const Real&, const Real&)>;

struct ClenshawTrace {
  std::vector<Real> states;        // b~_d .. b~_1 in evaluation order
  std::vector<Real> local_errors;  // |mult(x, b~_{k+1}) - x b~_{k+1}| per step
  bool in_range = true;
  Real lambda;  // fixed spectral constant 1 + sqrt(2)
};

/// Backward recurrence b~_k = 2 mult(x, b~_{k+1}) - b~_{k+2} + c_k for
/// k = d..1, returning c_0 + mult(x, b~_1) - b~_2. With enforce_range the
/// states must stay within [-B, B] or a range violation is thrown.
inline std::pair<Real, ClenshawTrace> clenshaw(const ChebyshevExpansion& expansion,
                                               const Real& x, const MultFn& mult,
                                               const GadgetConfig& cfg,
                                               const PrecisionContext& ctx,
                                               bool enforce_range = false) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (abs(x) > 1 + 16 * ctx.eps()) {
    throw std::domain_error("clenshaw: |x| must be <= 1");
  }
  const auto& c = expansion.coeffs;
  ClenshawTrace trace;
  trace.lambda = 1 + sqrt(Real(2));
  if (c.empty()) return {Real(0), trace};
  const std::size_t d = c.size() - 1;
  Real b1(0), b2(0);  // b~_{k+1}, b~_{k+2}
  for (std::size_t k = d; k >= 1; --k) {
    Real prod = mult(x, b1);
    trace.local_errors.push_back(abs(prod - x * b1));
    Real bk = 2 * prod - b2 + c[k];
    trace.states.push_back(bk);
    if (abs(bk) > cfg.range_b) {
      trace.in_range = false;
      if (enforce_range) {
        throw std::runtime_error("clenshaw: state bound |b~_k| <= B violated at k = " +
                                 std::to_string(k));
      }
    }
    b2 = b1;
    b1 = bk;
  }
  Real prod = mult(x, b1);
  trace.local_errors.push_back(abs(prod - x * b1));
  return {c[0] + prod - b2, trace};
}

inline MultFn exact_mult() {
  return [](const Real& a, const Real& b) { return a * b; };
}

// ---------------------------------------------------------------------------
// Full pipeline: rational -> Chebyshev -> inexact Clenshaw -> GELU network
// ---------------------------------------------------------------------------

struct PipelineReport {
  std::size_t degree = 0;
  std::size_t j_levels = 0;
  Real delta;
  Real range_b;
  std::size_t size = 0;  // GELU evaluations per point
  Real sup_error;
  Real argmax;
  // Calibrated stand-ins for the existential constants, reported per run.
  Real c_recurrence;  // C_R in the Clenshaw error bound C_R lambda^d delta B'^2
  Real c_range;       // c in the state-bound condition delta <= c lambda^-d / B'^2
};

/// Approximates r on [-1,1] by a network built entirely from GELU calls:
/// degree-d Chebyshev truncation evaluated by Clenshaw with every product
/// replaced by mult_block, output normalized by 1/(1 + eps/2).
inline std::pair<RealFn, PipelineReport> approx_rational_by_gelu(
    const RationalFn& r, const Real& rho, const Real& m_rho, const Real& epsilon,
    const PrecisionContext& ctx, const Grid& grid) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (!(epsilon > 0 && epsilon < 1)) {
    throw std::domain_error("approx_rational_by_gelu: epsilon must lie in (0,1)");
  }
  const std::size_t d = truncation_degree(epsilon, rho, m_rho);
  ChebyshevExpansion expansion = cheb_expand(r, d, rho, m_rho, ctx);

  const Real lambda = 1 + sqrt(Real(2));
  const Real c_recurrence(4);          // calibrated stand-in, reported
  const Real c_range = Real(1) / 4;    // calibrated stand-in, reported
  Real lambda_d = pow(lambda, static_cast<long>(d));
  GadgetConfig probe = GadgetConfig::for_clenshaw(rho, m_rho, Real(1) / 2, Real(2), ctx);
  Real bp2 = probe.range_b_prime * probe.range_b_prime;
  Real delta_acc = epsilon / (4 * c_recurrence * lambda_d * bp2);
  Real delta_rng = c_range / (lambda_d * bp2);
  Real delta = delta_acc < delta_rng ? delta_acc : delta_rng;
  GadgetConfig cfg = GadgetConfig::for_clenshaw(rho, m_rho, delta, Real(2), ctx);

  MultFn gadget = [cfg, ctx](const Real& a, const Real& b) {
    return mult_block(cfg, a, b, ctx);
  };
  Real norm = 1 + epsilon / 2;
  RealFn value_fn = [expansion, gadget, cfg, ctx, norm](const Real& x) {
    PrecisionContext::ScopedPrecision g(ctx);
    auto [y, trace] = clenshaw(expansion, x, gadget, cfg, ctx, /*enforce_range=*/true);
    return y / norm;
  };

  PipelineReport report;
  report.degree = d;
  report.j_levels = cfg.j_levels;
  report.delta = delta;
  report.range_b = cfg.range_b;
  report.c_recurrence = c_recurrence;
  report.c_range = c_range;
  long before = gelu_call_counter().load();
  (void)value_fn(Real(0));
  report.size = static_cast<std::size_t>(gelu_call_counter().load() - before);

  RealFn truth = [r, ctx](const Real& x) { return eval_rational(r, x, ctx); };
  ErrorReport err = sup_error(value_fn, truth, grid, ctx);
  report.sup_error = err.sup_error;
  report.argmax = err.argmax;
  if (report.sup_error > epsilon) {
    throw std::runtime_error("approx_rational_by_gelu: sup error exceeds the target epsilon");
  }
  return {value_fn, report};
}

}  // namespace ratnn
