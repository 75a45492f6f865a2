#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ratnn/grid.hpp"
#include "ratnn/real.hpp"

namespace ratnn {

/// An assembled approximation block: an evaluable map, the non-affine unit
/// count of the construction, and its per-iteration sup-error trace.
struct BlockResult {
  RealFn value_fn;
  std::size_t size = 0;
  std::vector<Real> per_step_errors;
};

// ---------------------------------------------------------------------------
// Step 1: composite p-th root iteration
// ---------------------------------------------------------------------------

struct RootIterConfig {
  int p = 2;
  Real alpha0;
  std::size_t iterations = 0;
};

/// mu(alpha) = ((alpha - alpha^p) / ((p-1)(1-alpha)))^(1/p)
inline Real root_iter_mu(const Real& alpha, int p, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (!(alpha > 0 && alpha < 1)) {
    throw std::domain_error("root_iter_mu: alpha must lie in (0,1)");
  }
  Real num = alpha - pow(alpha, p);
  Real den = (p - 1) * (1 - alpha);
  return pow(num / den, Real(1) / p);
}

namespace detail {

/// mu(alpha), continued by its limit value 1 once alpha has rounded up to 1
/// at working precision (the recursion is stationary there).
inline Real root_mu_saturating(const Real& alpha, int p, const PrecisionContext& ctx) {
  if (alpha >= 1) return Real(1);
  return root_iter_mu(alpha, p, ctx);
}

/// Runs the scalar alpha-recursion; alphas[k] is the k-th iterate and
/// (1 - alphas[k]) / (1 + alphas[k]) the worst-case relative error at step k.
inline std::vector<Real> root_alpha_sequence(const Real& alpha0, int p,
                                             std::size_t iterations,
                                             const PrecisionContext& ctx) {
  std::vector<Real> alphas{alpha0};
  for (std::size_t k = 0; k < iterations; ++k) {
    Real a = alphas.back();
    if (a >= 1) {
      alphas.push_back(Real(1));
      continue;
    }
    Real mu = root_iter_mu(a, p, ctx);
    Real next = p * a / ((p - 1) * mu + pow(mu, 1 - p) * pow(a, p));
    alphas.push_back(next);
  }
  return alphas;
}

inline Real root_error_at(const Real& alpha) { return (1 - alpha) / (1 + alpha); }

}  // namespace detail

/// Rational iteration approximating x^(1/p) on [alpha0^p, 1].
///
/// trace[k] is the grid-measured worst relative error of the scaled iterate
/// f~_k; it coincides with (1 - alpha_k)/(1 + alpha_k).
inline BlockResult pth_root_block(const RootIterConfig& cfg, const PrecisionContext& ctx,
                                  std::size_t trace_grid_points = 129) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (cfg.p < 2) throw std::invalid_argument("pth_root_block: p >= 2");
  if (!(cfg.alpha0 > 0 && cfg.alpha0 < 1)) {
    throw std::domain_error("pth_root_block: alpha0 must lie in (0,1)");
  }
  const int p = cfg.p;
  auto alphas = detail::root_alpha_sequence(cfg.alpha0, p, cfg.iterations, ctx);
  std::vector<Real> mus;
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    mus.push_back(detail::root_mu_saturating(alphas[k], p, ctx));
  }
  Real lo = pow(cfg.alpha0, p);

  auto iterate = [p, mus](std::size_t steps, const Real& x) {
    Real f(1);
    for (std::size_t k = 0; k < steps; ++k) {
      const Real& mu = mus[k];
      f = ((p - 1) * mu * f + x / (pow(mu, p - 1) * pow(f, p - 1))) / p;
    }
    return f;
  };

  BlockResult result;
  result.size = cfg.iterations;
  Real alpha0 = cfg.alpha0;
  std::size_t iters = cfg.iterations;
  Real scale = 2 * alphas[iters] / (1 + alphas[iters]);
  result.value_fn = [iterate, iters, scale, lo, ctx](const Real& x) {
    PrecisionContext::ScopedPrecision g(ctx);
    if (x < lo || x > 1) {
      throw std::domain_error("pth_root_block: x outside [alpha0^p, 1]");
    }
    return scale * iterate(iters, x);
  };

  // Relative-error trace per iteration over a grid of the domain.
  Grid grid(lo, Real(1), trace_grid_points);
  auto pts = grid.points(ctx);
  std::vector<Real> roots;
  for (const Real& x : pts) roots.push_back(pow(x, Real(1) / p));
  for (std::size_t k = 0; k <= cfg.iterations; ++k) {
    Real worst(0);
    Real sk = 2 * alphas[k] / (1 + alphas[k]);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Real rel = abs(sk * iterate(k, pts[i]) - roots[i]) / roots[i];
      if (rel > worst) worst = rel;
    }
    result.per_step_errors.push_back(worst);
  }
  return result;
}

/// Iterations needed for the alpha-recursion to reach relative error <= tol.
inline std::size_t root_iterations_for(const Real& alpha0, int p, const Real& tol,
                                       const PrecisionContext& ctx,
                                       std::size_t cap = 64) {
  Real alpha = alpha0;
  for (std::size_t k = 0; k <= cap; ++k) {
    if (detail::root_error_at(alpha) <= tol) return k;
    Real mu = detail::root_mu_saturating(alpha, p, ctx);
    alpha = p * alpha / ((p - 1) * mu + pow(mu, 1 - p) * pow(alpha, p));
  }
  return cap;
}

namespace detail {

/// sqrt(z) for z > 0 through the p=2 root iteration, with the argument
/// rescaled by a power of 4 into [1/4, 1] so the fixed alpha0 = 1/2 domain
/// applies. Relative accuracy tol.
class SqrtBlock {
 public:
  SqrtBlock(const Real& tol, const PrecisionContext& ctx) : ctx_(ctx) {
    PrecisionContext::ScopedPrecision guard(ctx);
    Real half = Real(1) / 2;
    iterations_ = root_iterations_for(half, 2, tol / 2, ctx);
    mus_.clear();
    Real alpha = half;
    for (std::size_t k = 0; k < iterations_; ++k) {
      Real mu = detail::root_mu_saturating(alpha, 2, ctx);
      mus_.push_back(mu);
      alpha = 2 * alpha / (mu + pow(alpha, 2) / mu);
    }
    scale_ = 2 * alpha / (1 + alpha);
  }

  std::size_t size() const { return iterations_; }

  Real operator()(const Real& z) const {
    PrecisionContext::ScopedPrecision guard(ctx_);
    if (!(z > 0)) throw std::domain_error("SqrtBlock: argument must be positive");
    // z = m * 2^e with m in [1/2, 1); shift by an even exponent.
    long e = static_cast<long>(mpfr_get_exp(z.backend().data()));
    long shift = (e % 2 == 0) ? e : e + 1;
    Real zr = ldexp(z, -static_cast<int>(shift));  // in [1/4, 1)
    Real f(1);
    for (std::size_t k = 0; k < iterations_; ++k) {
      const Real& mu = mus_[k];
      f = (mu * f + zr / (mu * f)) / 2;
    }
    return ldexp(scale_ * f, static_cast<int>(shift / 2));
  }

 private:
  PrecisionContext ctx_;
  std::size_t iterations_ = 0;
  std::vector<Real> mus_;
  Real scale_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Step 2: theta functions and the AGM-theta logarithm
// ---------------------------------------------------------------------------

enum class ThetaKind { Theta2, Theta3 };

/// Truncated q-series reference for the Jacobi theta values:
///   theta3(0,q) = 1 + 2 sum q^(n^2),   theta2(0,q) = 2 q^(1/4) sum q^(n(n+1)).
/// Terms below 2^-(bits+8) are dropped.
inline Real theta_reference(const Real& q, ThetaKind which, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (!(q > 0 && q < 1)) throw std::domain_error("theta_reference: q must lie in (0,1)");
  Real cutoff = ldexp(Real(1), -static_cast<int>(ctx.bits() + 8));
  if (which == ThetaKind::Theta3) {
    Real acc(1);
    for (long n = 1;; ++n) {
      Real term = 2 * pow(q, n * n);
      acc += term;
      if (term < cutoff) break;
    }
    return acc;
  }
  Real acc(0);
  for (long n = 0;; ++n) {
    Real term = pow(q, n * (n + 1));
    acc += term;
    if (term < cutoff) break;
  }
  return 2 * pow(q, Real(1) / 4) * acc;
}

/// Complete elliptic integral K(k) via the classic AGM, for cross-checking
/// the theta identities: K(k) = pi / (2 AGM(1, sqrt(1-k^2))).
inline Real elliptic_k_via_agm(const Real& modulus, std::size_t steps,
                               const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  Real a(1), b = sqrt(1 - modulus * modulus);
  for (std::size_t j = 0; j < steps; ++j) {
    Real an = (a + b) / 2;
    b = sqrt(a * b);
    a = an;
  }
  return const_pi(ctx) / (2 * a);
}

struct AGMLogConfig {
  Real sigma;     // separation from 1
  Real tau;       // cutoff: domain is tau <= x <= 1/tau, |x-1| >= sigma
  std::size_t m_ell = 8;  // elliptic-stage AGM steps (reference route)
  std::size_t l_log = 16; // log-stage AGM steps
  Real sqrt_tol;  // accuracy of the embedded square-root blocks

  static AGMLogConfig defaults(const PrecisionContext& ctx) {
    PrecisionContext::ScopedPrecision guard(ctx);
    AGMLogConfig cfg;
    cfg.sigma = Real(1) / 8;
    cfg.tau = Real(1) / 1000;
    cfg.sqrt_tol = ldexp(Real(1), -static_cast<int>(ctx.bits() / 2));
    return cfg;
  }
};

namespace detail {

inline void check_log_domain(const AGMLogConfig& cfg, const Real& x) {
  if (!(x > 0) || abs(x - 1) < cfg.sigma || x < cfg.tau || x > 1 / cfg.tau) {
    throw std::domain_error("agm_log_block: x outside D_{sigma,tau}");
  }
}

/// theta2(0,q^4) and theta3(0,q^4) as explicit polynomial partial sums in q.
/// With the nome q^4 the prefactor (q^4)^(1/4) = q, so no roots appear and
/// the whole stage is a polynomial evaluation.
inline std::pair<Real, Real> theta_pair_q4(const Real& q, const PrecisionContext& ctx) {
  Real cutoff = ldexp(Real(1), -static_cast<int>(ctx.bits() + 8));
  Real q4 = pow(q, 4);
  Real t3(1);
  for (long n = 1;; ++n) {
    Real term = 2 * pow(q4, n * n);
    t3 += term;
    if (term < cutoff) break;
  }
  Real sum2(0);
  for (long n = 0;; ++n) {
    Real term = pow(q4, n * (n + 1));
    sum2 += term;
    if (term < cutoff) break;
  }
  return {2 * q * sum2, t3};
}

}  // namespace detail

/// Sasaki-Kanada logarithm: log(1/q) = pi / (4 AGM(theta2(0,q^4)^2, theta3(0,q^4)^2)),
/// with every square root inside the AGM realized by the p=2 root block.
/// For x < 1 the reciprocity log(x) = -log(1/x) is applied.
inline BlockResult agm_log_block_traced(const AGMLogConfig& cfg, const Real& x,
                                        const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  detail::check_log_domain(cfg, x);
  if (x < 1) {
    BlockResult inner = agm_log_block_traced(cfg, 1 / x, ctx);
    Real v = inner.value_fn(1 / x);
    inner.value_fn = [v](const Real&) { return -v; };
    return inner;
  }
  Real q = 1 / x;
  auto [t2, t3] = detail::theta_pair_q4(q, ctx);
  detail::SqrtBlock sqrt_block(cfg.sqrt_tol, ctx);
  Real a = t2 * t2, b = t3 * t3;
  const Real pi = const_pi(ctx);
  const Real truth = log(x);  // trace instrumentation only
  BlockResult result;
  result.per_step_errors.push_back(abs(pi / (4 * a) - truth));
  for (std::size_t j = 0; j < cfg.l_log; ++j) {
    Real an = (a + b) / 2;
    b = sqrt_block(a * b);
    a = an;
    result.per_step_errors.push_back(abs(pi / (4 * a) - truth));
  }
  Real value = pi / (4 * a);
  result.size = cfg.l_log * sqrt_block.size();
  result.value_fn = [value](const Real&) { return value; };
  return result;
}

inline Real agm_log_block(const AGMLogConfig& cfg, const Real& x,
                          const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  detail::check_log_domain(cfg, x);
  if (x < 1) return -agm_log_block(cfg, 1 / x, ctx);
  Real q = 1 / x;
  auto [t2, t3] = detail::theta_pair_q4(q, ctx);
  detail::SqrtBlock sqrt_block(cfg.sqrt_tol, ctx);
  Real a = t2 * t2, b = t3 * t3;
  for (std::size_t j = 0; j < cfg.l_log; ++j) {
    Real an = (a + b) / 2;
    b = sqrt_block(a * b);
    a = an;
  }
  return const_pi(ctx) / (4 * a);
}

namespace detail {

/// AGM step count sufficient for absolute accuracy tol on D_{sigma,tau};
/// the log-stage AGM gains one squaring per step, so steps scale like
/// log2 of the bit target.
inline std::size_t agm_steps_for(const Real& tol, const PrecisionContext& ctx) {
  double t = -static_cast<double>(log2(tol).convert_to<double>());
  if (t < 4) t = 4;
  std::size_t steps = static_cast<std::size_t>(std::ceil(std::log2(t))) + 3;
  return steps;
}

}  // namespace detail

/// Config tuned so that |agm_log - log| <= tol on the artanh argument range.
inline AGMLogConfig agm_log_config_for(const Real& tol, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  AGMLogConfig cfg = AGMLogConfig::defaults(ctx);
  cfg.l_log = detail::agm_steps_for(tol / 4, ctx);
  cfg.sqrt_tol = tol / (8 * Real(cfg.l_log + 1));
  Real eps_floor = 8 * ctx.eps();
  if (cfg.sqrt_tol < eps_floor) cfg.sqrt_tol = eps_floor;
  return cfg;
}

// ---------------------------------------------------------------------------
// Step 3: artanh on [-1/8, 1/8]
// ---------------------------------------------------------------------------

/// artanh(z) = (log(1+z) - log(1-z)) / 2 with each log on [7/8, 9/8]
/// factored as log(u) = log(2u) - log(2), both arguments in D_{sigma,tau}.
/// log(2) is evaluated once per call chain; z = 0 returns exactly 0.
class ArtanhBlock {
 public:
  ArtanhBlock(const Real& tol, const PrecisionContext& ctx)
      : ctx_(ctx), cfg_(agm_log_config_for(tol / 4, ctx)) {
    PrecisionContext::ScopedPrecision guard(ctx);
    log2_ = agm_log_block(cfg_, Real(2), ctx);
    detail::SqrtBlock probe(cfg_.sqrt_tol, ctx);
    size_ = 3 * cfg_.l_log * probe.size();  // log(2u) twice + shared log(2)
  }

  std::size_t size() const { return size_; }

  Real operator()(const Real& z) const {
    PrecisionContext::ScopedPrecision guard(ctx_);
    if (abs(z) > Real(1) / 8) {
      throw std::domain_error("ArtanhBlock: |z| must be <= 1/8");
    }
    if (z == 0) return Real(0);
    return (log_restricted(1 + z) - log_restricted(1 - z)) / 2;
  }

 private:
  Real log_restricted(const Real& u) const {
    if (u == 1) return Real(0);  // hard-wired log(1) = 0
    return agm_log_block(cfg_, 2 * u, ctx_) - log2_;
  }

  PrecisionContext ctx_;
  AGMLogConfig cfg_;
  Real log2_;
  std::size_t size_ = 0;
};

inline Real artanh_block(const Real& z, const Real& tol, const PrecisionContext& ctx) {
  return ArtanhBlock(tol, ctx)(z);
}

// ---------------------------------------------------------------------------
// Step 4: Halley iteration for tanh on [-1/8, 1/8]
// ---------------------------------------------------------------------------

struct HalleyConfig {
  std::size_t iterations = 4;
  Real artanh_tol;  // 0 selects the exact artanh oracle
};

/// t_{k+1} = t_k - (1 - t_k^2)(A(t_k) - s) / (1 - t_k (A(t_k) - s)), A = artanh.
inline BlockResult halley_tanh_block(const HalleyConfig& cfg, const PrecisionContext& ctx,
                                     std::size_t trace_grid_points = 65) {
  PrecisionContext::ScopedPrecision guard(ctx);
  std::shared_ptr<ArtanhBlock> artanh_approx;
  std::size_t artanh_size = 0;
  if (cfg.artanh_tol > 0) {
    artanh_approx = std::make_shared<ArtanhBlock>(cfg.artanh_tol, ctx);
    artanh_size = artanh_approx->size();
  }
  auto artanh_eval = [artanh_approx](const Real& t) {
    return artanh_approx ? (*artanh_approx)(t) : oracle::atanh(t);
  };
  const Real eighth = Real(1) / 8;
  std::size_t iters = cfg.iterations;
  auto iterate = [artanh_eval, iters](const Real& s) {
    Real t = s;
    for (std::size_t k = 0; k < iters; ++k) {
      Real resid = artanh_eval(t) - s;
      t = t - (1 - t * t) * resid / (1 - t * resid);
    }
    return t;
  };

  BlockResult result;
  result.size = cfg.iterations * (artanh_size + 1);
  result.value_fn = [iterate, eighth, ctx](const Real& s) {
    PrecisionContext::ScopedPrecision g(ctx);
    if (abs(s) > eighth) throw std::domain_error("halley_tanh_block: |s| must be <= 1/8");
    return iterate(s);
  };

  Grid grid(-eighth, eighth, trace_grid_points);
  auto pts = grid.points(ctx);
  std::vector<Real> truth;
  for (const Real& s : pts) truth.push_back(tanh(s));
  std::vector<Real> state(pts);
  for (std::size_t k = 0; k <= cfg.iterations; ++k) {
    Real worst(0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Real dev = abs(state[i] - truth[i]);
      if (dev > worst) worst = dev;
    }
    result.per_step_errors.push_back(worst);
    if (k == cfg.iterations) break;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Real resid = artanh_eval(state[i]) - pts[i];
      state[i] = state[i] - (1 - state[i] * state[i]) * resid / (1 - state[i] * resid);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Step 5: GELU assembly through the double-angle ladder
// ---------------------------------------------------------------------------

struct GeluLadderConfig {
  std::size_t m = 3;  // double-angle halvings; alpha(1+beta)/2^m <= 1/8 needs m >= 3
  HalleyConfig inner;
};

/// G(x) ~ (x/2)(1 + Psi^m(tanh_block(P(x)/2^m))) with P(x) = alpha(x + beta x^3)
/// and Psi(t) = 2t/(1+t^2). Fully rational once the tanh block is.
inline BlockResult gelu_rational_block(GeluLadderConfig cfg, const Real& epsilon,
                                       const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (!(epsilon > 0 && epsilon < 1)) {
    throw std::domain_error("gelu_rational_block: epsilon must lie in (0,1)");
  }
  const Real alpha = sqrt(2 / const_pi(ctx));
  const Real beta = Real("0.044715");
  if (alpha * (1 + beta) / ldexp(Real(1), static_cast<int>(cfg.m)) > Real(1) / 8) {
    throw std::invalid_argument("gelu_rational_block: ladder depth m too small");
  }

  // Error through the ladder amplifies by at most |Psi'| <= 2 per rung and
  // the outer x/2 halves it; split the remaining budget between the ideal
  // Halley error and the artanh substitution drift.
  Real inner_target = epsilon / ldexp(Real(1), static_cast<int>(cfg.m));
  if (cfg.inner.iterations == 0) {
    // Calibrate the iteration count against the oracle on a coarse grid.
    HalleyConfig probe{0, Real(0)};
    Real eighth = Real(1) / 8;
    std::size_t k = 0;
    Real err(1);
    while (k < 12) {
      probe.iterations = k;
      BlockResult b = halley_tanh_block(probe, ctx, 17);
      err = b.per_step_errors.back();
      if (err <= inner_target / 2) break;
      ++k;
    }
    cfg.inner.iterations = k;
  }
  if (!(cfg.inner.artanh_tol > 0)) {
    cfg.inner.artanh_tol = inner_target / (8 * Real(cfg.inner.iterations + 1));
  }

  BlockResult tanh_block = halley_tanh_block(cfg.inner, ctx, 17);
  RealFn tanh_fn = tanh_block.value_fn;
  std::size_t m = cfg.m;
  BlockResult result;
  result.size = tanh_block.size + m + 1;
  result.per_step_errors = tanh_block.per_step_errors;
  result.value_fn = [tanh_fn, m, alpha, beta, ctx](const Real& x) {
    PrecisionContext::ScopedPrecision g(ctx);
    Real p = alpha * (x + beta * x * x * x);
    Real t = tanh_fn(ldexp(p, -static_cast<int>(m)));
    for (std::size_t j = 0; j < m; ++j) t = 2 * t / (1 + t * t);
    return x / 2 * (1 + t);
  };
  return result;
}

}  // namespace ratnn
