#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ratnn/grid.hpp"
#include "ratnn/rational.hpp"
#include "ratnn/real.hpp"

namespace ratnn {

/// Rational activation with the pole-free effective denominator
/// Q(z) = 1 + |Q~(z)|, Q~(z) = sum b_k z^k.
struct SafeRational {
  std::vector<Real> a;  // numerator coefficients a_0 .. a_m
  std::vector<Real> b;  // inner denominator coefficients b_0 .. b_n
};

/// Normalization layer z = gamma (u - mu)/sigma + beta_shift.
struct NormAffine {
  Real gamma;
  Real beta_shift;
  Real mu;
  Real sigma;

  void validate() const {
    if (!(sigma > 0)) throw std::invalid_argument("NormAffine: sigma must be positive");
  }

  Real apply(const Real& u) const { return gamma * (u - mu) / sigma + beta_shift; }
};

inline Real safe_eval(const SafeRational& theta, const Real& z, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  return eval_poly(theta.a, z) / (1 + abs(eval_poly(theta.b, z)));
}

/// Coefficients of p(s x + t) from the coefficients of p, by binomial
/// re-expansion.
inline std::vector<Real> compose_affine_poly(const std::vector<Real>& coeffs, const Real& s,
                                             const Real& t, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  std::vector<Real> out(coeffs.size(), Real(0));
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    // a_j (s x + t)^j contributes a_j C(j,i) s^i t^{j-i} to x^i
    std::vector<Real> s_pows(j + 1), t_pows(j + 1);
    s_pows[0] = Real(1);
    t_pows[0] = Real(1);
    for (std::size_t i = 1; i <= j; ++i) {
      s_pows[i] = s_pows[i - 1] * s;
      t_pows[i] = t_pows[i - 1] * t;
    }
    Real c(1);
    for (std::size_t i = 0; i <= j; ++i) {
      out[i] += coeffs[j] * c * s_pows[i] * t_pows[j - i];
      c = c * Real(static_cast<long>(j - i)) / Real(static_cast<long>(i + 1));
    }
  }
  return out;
}

/// theta' with safe_eval(theta', x) = safe_eval(theta, s x + t) identically.
inline SafeRational absorb_affine(const SafeRational& theta, const Real& s, const Real& t,
                                  const PrecisionContext& ctx) {
  if (s == 0) throw std::invalid_argument("absorb_affine: degenerate affine (s = 0)");
  SafeRational out;
  out.a = compose_affine_poly(theta.a, s, t, ctx);
  out.b = compose_affine_poly(theta.b, s, t, ctx);
  return out;
}

/// Gauge motion: gamma_eta = e^eta gamma, a_{j,eta} = e^{-j eta} a_j,
/// b_{k,eta} = e^{-k eta} b_k. Leaves the composite u -> r(gamma (u-mu)/sigma)
/// unchanged (scalar case, no shift).
inline std::pair<Real, SafeRational> scale_gauge(const SafeRational& theta, const Real& gamma,
                                                 const Real& eta, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  Real factor = oracle::exp(-eta);
  SafeRational out = theta;
  Real f(1);
  for (std::size_t j = 1; j < out.a.size(); ++j) {
    f *= factor;
    out.a[j] *= f;
  }
  f = Real(1);
  for (std::size_t k = 1; k < out.b.size(); ++k) {
    f *= factor;
    out.b[k] *= f;
  }
  return {oracle::exp(eta) * gamma, out};
}

struct CoeffGradient {
  std::vector<Real> d_a;  // dr/da_j
  std::vector<Real> d_b;  // dr/db_k
  Real at_z;
  int sign_qtilde = 0;
};

/// dr/da_j = z^j / Q(z), dr/db_k = -P(z) z^k sgn(Q~(z)) / Q(z)^2, with
/// sgn(0) = 0 in the subgradient sense. The bounds |dr/da_j| <= |z|^j and
/// |dr/db_k| <= |P(z)| |z|^k are verified on construction.
inline CoeffGradient coeff_gradients(const SafeRational& theta, const Real& z,
                                     const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  Real p = eval_poly(theta.a, z);
  Real qt = eval_poly(theta.b, z);
  Real q = 1 + abs(qt);
  CoeffGradient grad;
  grad.at_z = z;
  grad.sign_qtilde = qt > 0 ? 1 : (qt < 0 ? -1 : 0);
  Real z_pow(1);
  for (std::size_t j = 0; j < theta.a.size(); ++j) {
    grad.d_a.push_back(z_pow / q);
    if (abs(grad.d_a.back()) > abs(z_pow) * (1 + 16 * ctx.eps())) {
      throw std::logic_error("coeff_gradients: numerator gradient bound violated");
    }
    z_pow *= z;
  }
  z_pow = Real(1);
  for (std::size_t k = 0; k < theta.b.size(); ++k) {
    grad.d_b.push_back(-p * z_pow * grad.sign_qtilde / (q * q));
    if (abs(grad.d_b.back()) > abs(p) * abs(z_pow) * (1 + 16 * ctx.eps())) {
      throw std::logic_error("coeff_gradients: denominator gradient bound violated");
    }
    z_pow *= z;
  }
  return grad;
}

namespace detail {

/// r'(z) for the safe rational, away from Q~ sign flips.
inline Real safe_eval_deriv(const SafeRational& theta, const Real& z,
                            const PrecisionContext& ctx) {
  Real p = eval_poly(theta.a, z);
  Real qt = eval_poly(theta.b, z);
  Real q = 1 + abs(qt);
  Real dp(0), dqt(0);
  Real z_pow(1);
  for (std::size_t j = 1; j < theta.a.size(); ++j) {
    dp += Real(static_cast<long>(j)) * theta.a[j] * z_pow;
    z_pow *= z;
  }
  z_pow = Real(1);
  for (std::size_t k = 1; k < theta.b.size(); ++k) {
    dqt += Real(static_cast<long>(k)) * theta.b[k] * z_pow;
    z_pow *= z;
  }
  int sign = qt > 0 ? 1 : (qt < 0 ? -1 : 0);
  return dp / q - p * dqt * sign / (q * q);
}

}  // namespace detail

/// Derivative of the composite output along the gauge direction at eta = 0,
/// assembled by the chain rule:
///   sum_j dr/da_j (-j a_j) + sum_k dr/db_k (-k b_k) + r'(z) z,
/// with z = gamma (u - mu)/sigma. Exactly zero in exact arithmetic; the
/// returned value is the max magnitude over the grid.
inline Real gauge_flatness_probe(const SafeRational& theta, const NormAffine& aff,
                                 const Grid& grid, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  aff.validate();
  if (aff.beta_shift != 0) {
    throw std::invalid_argument("gauge_flatness_probe: requires beta_shift = 0");
  }
  Real worst(0);
  for (const Real& u : grid.points(ctx)) {
    Real z = aff.gamma * (u - aff.mu) / aff.sigma;
    CoeffGradient grad = coeff_gradients(theta, z, ctx);
    Real acc = detail::safe_eval_deriv(theta, z, ctx) * z;
    for (std::size_t j = 1; j < theta.a.size(); ++j) {
      acc -= grad.d_a[j] * Real(static_cast<long>(j)) * theta.a[j];
    }
    for (std::size_t k = 1; k < theta.b.size(); ++k) {
      acc -= grad.d_b[k] * Real(static_cast<long>(k)) * theta.b[k];
    }
    if (abs(acc) > worst) worst = abs(acc);
  }
  return worst;
}

/// Batch-noise moment probe: gradients dr/da_j at z perturbed by centered
/// uniform noise of scale varsigma; returns per-j pairs of the empirical
/// second moment of the gradient and the sampled moment E[z^{2j}/Q(z)^2].
/// Reported quantities only; the qualitative brittleness claim carries no
/// numeric threshold.
inline std::vector<std::pair<Real, Real>> gradient_noise_moments(
    const SafeRational& theta, const Real& z, const Real& varsigma, std::size_t samples,
    unsigned seed, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<std::pair<Real, Real>> out(theta.a.size(), {Real(0), Real(0)});
  for (std::size_t s = 0; s < samples; ++s) {
    Real zs = z + varsigma * Real(unif(rng));
    CoeffGradient grad = coeff_gradients(theta, zs, ctx);
    Real q = 1 + abs(eval_poly(theta.b, zs));
    Real z_pow(1);
    for (std::size_t j = 0; j < theta.a.size(); ++j) {
      out[j].first += grad.d_a[j] * grad.d_a[j];
      out[j].second += z_pow * z_pow / (q * q);
      z_pow *= zs;
    }
  }
  for (auto& [empirical, moment] : out) {
    empirical /= Real(static_cast<long>(samples));
    moment /= Real(static_cast<long>(samples));
  }
  return out;
}

}  // namespace ratnn
