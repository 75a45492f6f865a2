#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <stdexcept>

#include "ratnn/rational.hpp"
#include "ratnn/real.hpp"

using namespace ratnn;

TEST_CASE("rational evaluation on plain and safe forms") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);

  RationalFn identity{{Real(0), Real(1)}, {Real(1)}, false};
  CHECK(eval_rational(identity, Real(2), ctx) == 2);

  RationalFn safe_const{{Real(1)}, {}, true};  // empty inner polynomial => denominator 1
  CHECK(eval_rational(safe_const, Real(7), ctx) == 1);

  RationalFn runge{{Real(1)}, {Real(1) / 4, Real(0), Real(1)}, false};
  CHECK(abs(eval_rational(runge, Real(0), ctx) - 4) < 4 * ctx.eps());
}

TEST_CASE("plain rational throws at a denominator zero, naming the point") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  RationalFn r{{Real(1)}, {Real(0), Real(1)}, false};  // 1/x
  CHECK_THROWS_WITH(eval_rational(r, Real(0), ctx),
                    Catch::Matchers::ContainsSubstring("denominator zero"));
}

TEST_CASE("denominator sign scan finds real zeros") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  RationalFn no_pole{{Real(1)}, {Real(1) / 4, Real(0), Real(1)}, false};
  CHECK_FALSE(no_pole.denominator_vanishes_on(Real(-1), Real(1), ctx, 1001));
  RationalFn pole{{Real(1)}, {Real(0), Real(1)}, false};  // zero at x = 0
  CHECK(pole.denominator_vanishes_on(Real(-1), Real(1), ctx, 1001));
  RationalFn safe{{Real(1)}, {Real(0), Real(1)}, true};
  CHECK_FALSE(safe.denominator_vanishes_on(Real(-1), Real(1), ctx, 1001));
}

TEST_CASE("safe rational stays finite for random coefficients") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    RationalFn r;
    r.safe = true;
    for (int i = 0; i < 6; ++i) r.numer.push_back(Real(unif(rng)));
    for (int i = 0; i < 5; ++i) r.denom.push_back(Real(unif(rng)));
    for (int i = -10; i <= 10; ++i) {
      Real v = eval_rational(r, Real(i) / 2, ctx);
      CHECK(isfinite(v));
    }
  }
}

TEST_CASE("plain-text record round-trips coefficients exactly") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  RationalFn r;
  r.safe = true;
  r.numer = {sqrt(Real(2)), Real(-1) / 3, Real("0.044715")};
  r.denom = {Real(1), const_pi(ctx) / 7};
  RationalFn back = rational_from_record(to_record(r, ctx), ctx);
  REQUIRE(back.numer.size() == r.numer.size());
  REQUIRE(back.denom.size() == r.denom.size());
  CHECK(back.safe == r.safe);
  for (std::size_t i = 0; i < r.numer.size(); ++i) CHECK(back.numer[i] == r.numer[i]);
  for (std::size_t i = 0; i < r.denom.size(); ++i) CHECK(back.denom[i] == r.denom[i]);
}

TEST_CASE("malformed records are rejected") {
  PrecisionContext ctx(128);
  CHECK_THROWS_AS(rational_from_record("poly plain 1 0\n1\n", ctx), std::runtime_error);
  CHECK_THROWS_AS(rational_from_record("rational safe 2 1\n1.0\n", ctx), std::runtime_error);
}
