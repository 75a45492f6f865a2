#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ratnn {

namespace mp = boost::multiprecision;

/// Variable-precision real scalar backed by MPFR, round-to-nearest-even.
using Real = mp::number<mp::mpfr_float_backend<0>, mp::et_off>;

/// Working precision for all Real values created while a context is active.
///
/// MPFR precision is set per value; the context installs a thread-wide
/// default so that every freshly constructed scalar carries the same
/// significand width. `bits()` reports the precision actually installed,
/// which may exceed the requested value by a few bits because the default
/// is specified in decimal digits.
class PrecisionContext {
 public:
  explicit PrecisionContext(unsigned requested_bits) {
    if (requested_bits < 53) {
      throw std::invalid_argument("PrecisionContext: bits must be >= 53");
    }
    requested_bits_ = requested_bits;
    digits10_ = static_cast<unsigned>(std::ceil(requested_bits * 0.30102999566398119521)) + 1;
  }

  unsigned requested_bits() const { return requested_bits_; }
  unsigned digits10() const { return digits10_; }

  /// Actual significand bits of values created under this context.
  unsigned bits() const {
    ScopedPrecision guard(*this);
    Real probe(0);
    return static_cast<unsigned>(mpfr_get_prec(probe.backend().data()));
  }

  /// Unit roundoff 2^(1-bits) of the active precision.
  Real eps() const {
    ScopedPrecision guard(*this);
    Real one(1);
    Real e;
    mpfr_set_ui_2exp(e.backend().data(), 1, 1 - static_cast<long>(bits()), MPFR_RNDN);
    return e;
  }

  /// RAII guard installing this context's default precision on the thread.
  class ScopedPrecision {
   public:
    explicit ScopedPrecision(const PrecisionContext& ctx)
        : saved_(Real::default_precision()) {
      Real::default_precision(ctx.digits10());
    }
    ~ScopedPrecision() { Real::default_precision(saved_); }
    ScopedPrecision(const ScopedPrecision&) = delete;
    ScopedPrecision& operator=(const ScopedPrecision&) = delete;

   private:
    unsigned saved_;
  };

 private:
  unsigned requested_bits_;
  unsigned digits10_;
};

inline Real const_pi(const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  Real pi;
  mpfr_const_pi(pi.backend().data(), MPFR_RNDN);
  return pi;
}

/// Transcendental ground-truth oracles.
///
/// These are the correctly rounded MPFR implementations; every derived
/// expected value in the test suite bottoms out here. Calls are counted so
/// that structurally rational constructions can prove they never touch a
/// transcendental primitive.
namespace oracle {

inline std::atomic<long>& call_counter() {
  static std::atomic<long> n{0};
  return n;
}

inline Real log(const Real& x) {
  ++call_counter();
  return mp::log(x);
}
inline Real exp(const Real& x) {
  ++call_counter();
  return mp::exp(x);
}
inline Real tanh(const Real& x) {
  ++call_counter();
  return mp::tanh(x);
}
inline Real atanh(const Real& x) {
  ++call_counter();
  return mp::atanh(x);
}
inline Real sqrt(const Real& x) {
  ++call_counter();
  return mp::sqrt(x);
}

/// Count of oracle invocations during `fn()`.
template <typename F>
long calls_during(F&& fn) {
  long before = call_counter().load();
  fn();
  return call_counter().load() - before;
}

}  // namespace oracle

/// Decimal string carrying the full precision of the active context
/// (ceil(bits*log10(2)) + 2 digits), suitable for lossless round-trips.
inline std::string to_decimal_string(const Real& x, const PrecisionContext& ctx) {
  unsigned digits = static_cast<unsigned>(std::ceil(ctx.bits() * 0.30102999566398119521)) + 2;
  return x.str(digits, std::ios_base::scientific);
}

}  // namespace ratnn
