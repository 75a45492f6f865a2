#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratnn/grid.hpp"
#include "ratnn/real.hpp"

namespace ratnn {

inline Real eval_poly(const std::vector<Real>& coeffs, const Real& x) {
  Real acc(0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

/// Rational function in coefficient form, ascending powers.
///
/// With safe=true the effective denominator is 1 + |sum b_j x^j|, which is
/// bounded below by 1 and therefore pole-free on the real line.
struct RationalFn {
  std::vector<Real> numer;  // a_0 .. a_{r_P}
  std::vector<Real> denom;  // b_0 .. b_{r_Q}
  bool safe = false;

  /// Scans the denominator for a sign change or near-zero on [lo, hi].
  /// Only meaningful for unsafe rationals.
  bool denominator_vanishes_on(const Real& lo, const Real& hi,
                               const PrecisionContext& ctx,
                               std::size_t scan_points = 10001) const {
    if (safe) return false;
    PrecisionContext::ScopedPrecision guard(ctx);
    Grid scan(lo, hi, scan_points);
    Real prev;
    bool first = true;
    for (const Real& x : scan.points(ctx)) {
      Real q = eval_poly(denom, x);
      if (q == 0) return true;
      if (!first && ((prev < 0) != (q < 0))) return true;
      prev = q;
      first = false;
    }
    return false;
  }
};

inline Real eval_rational(const RationalFn& r, const Real& x,
                          const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  Real p = eval_poly(r.numer, x);
  Real q = eval_poly(r.denom, x);
  if (r.safe) return p / (1 + abs(q));
  if (q == 0) {
    throw std::domain_error("eval_rational: denominator zero at x = " +
                            x.str(20, std::ios_base::scientific));
  }
  return p / q;
}

/// Plain-text record: one line per field, coefficients as full-precision
/// decimal strings, for CLI round-tripping.
inline std::string to_record(const RationalFn& r, const PrecisionContext& ctx) {
  std::ostringstream os;
  os << "rational " << (r.safe ? "safe" : "plain") << " " << r.numer.size()
     << " " << r.denom.size() << "\n";
  for (const Real& c : r.numer) os << to_decimal_string(c, ctx) << "\n";
  for (const Real& c : r.denom) os << to_decimal_string(c, ctx) << "\n";
  return os.str();
}

inline RationalFn rational_from_record(const std::string& record,
                                       const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  std::istringstream is(record);
  std::string tag, mode;
  std::size_t np = 0, nq = 0;
  is >> tag >> mode >> np >> nq;
  if (tag != "rational" || (mode != "safe" && mode != "plain")) {
    throw std::runtime_error("rational_from_record: malformed header");
  }
  RationalFn r;
  r.safe = (mode == "safe");
  std::string tok;
  for (std::size_t i = 0; i < np + nq; ++i) {
    if (!(is >> tok)) throw std::runtime_error("rational_from_record: truncated record");
    (i < np ? r.numer : r.denom).push_back(Real(tok));
  }
  return r;
}

}  // namespace ratnn
