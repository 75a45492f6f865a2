#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ratnn/rational.hpp"
#include "ratnn/real.hpp"

namespace ratnn {

/// Chebyshev truncation of an analytic rational, with the Bernstein-ellipse
/// metadata (rho, M_rho) that controls coefficient decay.
struct ChebyshevExpansion {
  std::vector<Real> coeffs;  // c_0 .. c_d
  std::size_t degree = 0;
  Real rho;
  Real m_rho;
};

/// Direct Chebyshev-series sum, used as an independent check on Clenshaw.
inline Real eval_chebyshev_sum(const std::vector<Real>& coeffs, const Real& x) {
  Real t_prev(1), t_cur = x, acc = coeffs.empty() ? Real(0) : coeffs[0];
  for (std::size_t k = 1; k < coeffs.size(); ++k) {
    acc += coeffs[k] * t_cur;
    Real t_next = 2 * x * t_cur - t_prev;
    t_prev = t_cur;
    t_cur = t_next;
  }
  return acc;
}

/// Degree-d truncation of the Chebyshev expansion of r on [-1,1].
///
/// Coefficients come from interpolation at N+1 Chebyshev points of the
/// second kind with N = 2d+16 for aliasing control, via the naive O(N d)
/// cosine-transform relation. The decay bound |c_k| <= 2 M_rho rho^-k is
/// verified against the supplied ellipse data.
inline ChebyshevExpansion cheb_expand(const RationalFn& r, std::size_t d,
                                      const Real& rho, const Real& m_rho,
                                      const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (!(rho > 1) || !(m_rho > 0)) {
    throw std::invalid_argument("cheb_expand: requires rho > 1 and m_rho > 0");
  }
  if (r.denominator_vanishes_on(Real(-1), Real(1), ctx)) {
    throw std::domain_error("cheb_expand: rational has a pole on [-1,1]");
  }
  const std::size_t big_n = 2 * d + 16;
  const Real pi = const_pi(ctx);
  std::vector<Real> values(big_n + 1);
  for (std::size_t j = 0; j <= big_n; ++j) {
    Real xj = cos(pi * Real(j) / Real(big_n));
    values[j] = eval_rational(r, xj, ctx);
  }
  ChebyshevExpansion exp;
  exp.degree = d;
  exp.rho = rho;
  exp.m_rho = m_rho;
  exp.coeffs.resize(d + 1);
  for (std::size_t k = 0; k <= d; ++k) {
    Real acc = values[0] / 2;
    for (std::size_t j = 1; j < big_n; ++j) {
      acc += values[j] * cos(pi * Real(k * j) / Real(big_n));
    }
    acc += values[big_n] * (k % 2 == 0 ? Real(1) : Real(-1)) / 2;
    exp.coeffs[k] = acc * 2 / Real(big_n);
  }
  exp.coeffs[0] /= 2;
  // Bernstein decay check against the caller-supplied ellipse data.
  Real slack = Real(1) + Real(1) / 1000000;
  for (std::size_t k = 0; k <= d; ++k) {
    Real bound = 2 * m_rho * pow(rho, -Real(k)) * slack + 16 * ctx.eps() * m_rho;
    if (abs(exp.coeffs[k]) > bound) {
      throw std::runtime_error("cheb_expand: coefficient decay violates the supplied (rho, M_rho)");
    }
  }
  return exp;
}

/// Truncation bound 2 M_rho rho^-d / (rho - 1).
inline Real cheb_truncation_bound(const Real& rho, const Real& m_rho, std::size_t d) {
  return 2 * m_rho * pow(rho, -Real(d)) / (rho - 1);
}

/// d = ceil( log(8 M_rho / ((rho-1) eps)) / log rho ), the smallest degree
/// with truncation error at most eps/4.
inline std::size_t truncation_degree(const Real& epsilon, const Real& rho,
                                     const Real& m_rho) {
  if (!(epsilon > 0 && epsilon < 1)) {
    throw std::invalid_argument("truncation_degree: epsilon must be in (0,1)");
  }
  Real ratio = 8 * m_rho / ((rho - 1) * epsilon);
  Real d = ceil(log(ratio) / log(rho));
  if (d < 0) return 0;
  return static_cast<std::size_t>(d.convert_to<long>());
}

/// Degree cap C_deg * W * 3^L for a width-W depth-L rational network with
/// (3,2) activations.
struct DegreeBudget {
  long width = 1;
  long depth = 1;
  Real c_deg;
};

inline Real degree_cap(const DegreeBudget& budget) {
  return budget.c_deg * Real(budget.width) * pow(Real(3), budget.depth);
}

/// Minimizes W*L subject to c_deg * W * 3^L >= n_required, by exhaustive
/// search over L; ties break toward smaller L.
inline std::pair<long, long> min_size_from_degree(long n_required, const Real& c_deg) {
  if (n_required < 1) throw std::invalid_argument("min_size_from_degree: n_required >= 1");
  long best_w = 0, best_l = 0;
  long best_product = -1;
  long l_cap = 1;
  while (c_deg * pow(Real(3), l_cap) < Real(n_required)) ++l_cap;
  ++l_cap;
  for (long l = 1; l <= l_cap; ++l) {
    Real need = Real(n_required) / (c_deg * pow(Real(3), l));
    long w = static_cast<long>(ceil(need).convert_to<long>());
    if (w < 1) w = 1;
    long product = w * l;
    if (best_product < 0 || product < best_product) {
      best_product = product;
      best_w = w;
      best_l = l;
    }
  }
  return {best_w, best_l};
}

}  // namespace ratnn
