#include <catch2/catch_amalgamated.hpp>

#include <stdexcept>

#include "ratnn/blocks.hpp"
#include "ratnn/grid.hpp"
#include "ratnn/real.hpp"

using namespace ratnn;

TEST_CASE("root iteration shrink factor") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real half = Real(1) / 2;
  CHECK(abs(root_iter_mu(half, 2, ctx) - sqrt(half)) < 4 * ctx.eps());
  CHECK(abs(root_iter_mu(Real("0.9"), 2, ctx) - sqrt(Real("0.9"))) < 4 * ctx.eps());
  Real expected = pow(Real("0.375"), Real(1) / 3);
  CHECK(abs(root_iter_mu(half, 3, ctx) - expected) < 4 * ctx.eps());
  CHECK_THROWS_AS(root_iter_mu(Real(0), 2, ctx), std::domain_error);
  CHECK_THROWS_AS(root_iter_mu(Real(1), 2, ctx), std::domain_error);
}

TEST_CASE("square root block trace follows the scalar recursion") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  RootIterConfig cfg{2, Real(1) / 2, 6};
  BlockResult block = pth_root_block(cfg, ctx);
  REQUIRE(block.per_step_errors.size() == 7);

  // step 0: worst relative error (1 - 1/2)/(1 + 1/2) = 1/3
  CHECK(abs(block.per_step_errors[0] - Real(1) / 3) < Real("1e-60"));

  // step 1: alpha_1 = 1/(sqrt(1/2) + (1/4)/sqrt(1/2))
  Real mu = sqrt(Real(1) / 2);
  Real alpha1 = 1 / (mu + (Real(1) / 4) / mu);
  CHECK(abs(block.per_step_errors[1] - (1 - alpha1) / (1 + alpha1)) < Real("1e-60"));
  CHECK(abs(block.per_step_errors[1] - Real("0.029437")) < Real("1e-6"));

  for (std::size_t k = 1; k < block.per_step_errors.size(); ++k) {
    if (block.per_step_errors[k] <= 4 * ctx.eps()) break;
    CHECK(block.per_step_errors[k] < block.per_step_errors[k - 1]);
  }

  CHECK(abs(block.value_fn(Real("0.7")) - sqrt(Real("0.7"))) <
        2 * block.per_step_errors.back());
  CHECK_THROWS_AS(block.value_fn(Real("0.1")), std::domain_error);
  CHECK_THROWS_AS(block.value_fn(Real(2)), std::domain_error);
  CHECK(block.size == 6);
}

TEST_CASE("free-standing square root block is relatively accurate across scales") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real tol("1e-30");
  detail::SqrtBlock sq(tol, ctx);
  for (const char* z_str : {"1e-10", "0.37", "0.5", "3", "81", "1e8"}) {
    Real z(z_str);
    Real rel = abs(sq(z) - sqrt(z)) / sqrt(z);
    CHECK(rel <= tol);
  }
  CHECK_THROWS_AS(sq(Real(-1)), std::domain_error);
}

TEST_CASE("theta series values") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real tiny("1e-30");
  CHECK(abs(theta_reference(tiny, ThetaKind::Theta3, ctx) - 1) < 3 * tiny);
  Real q("0.0625");
  CHECK(abs(theta_reference(q, ThetaKind::Theta3, ctx) - Real("1.12503052")) < Real("1e-8"));
  CHECK_THROWS_AS(theta_reference(Real(1), ThetaKind::Theta3, ctx), std::domain_error);
}

TEST_CASE("theta values are consistent with the AGM elliptic integral") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real q("0.1");
  Real t2 = theta_reference(q, ThetaKind::Theta2, ctx);
  Real t3 = theta_reference(q, ThetaKind::Theta3, ctx);
  Real modulus = t2 * t2 / (t3 * t3);
  Real k_val = elliptic_k_via_agm(modulus, 12, ctx);
  CHECK(abs(t3 * t3 - 2 / const_pi(ctx) * k_val) < ldexp(Real(1), -240));
}

TEST_CASE("AGM logarithm hits its tolerance on both sides of 1") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real tol("1e-40");
  AGMLogConfig cfg = agm_log_config_for(tol, ctx);
  CHECK(abs(agm_log_block(cfg, Real(2), ctx) - log(Real(2))) <= tol);
  CHECK(abs(agm_log_block(cfg, Real(100), ctx) - log(Real(100))) <= tol);
  // reciprocity is an implemented identity, hence exact
  CHECK(agm_log_block(cfg, Real(1) / 2, ctx) == -agm_log_block(cfg, Real(2), ctx));
}

TEST_CASE("AGM logarithm domain gate") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  AGMLogConfig cfg = AGMLogConfig::defaults(ctx);
  CHECK_THROWS_AS(agm_log_block(cfg, Real(1), ctx), std::domain_error);
  CHECK_THROWS_AS(agm_log_block(cfg, Real("1.05"), ctx), std::domain_error);
  CHECK_THROWS_AS(agm_log_block(cfg, Real("1e-5"), ctx), std::domain_error);
  CHECK_THROWS_AS(agm_log_block(cfg, Real(-2), ctx), std::domain_error);
}

TEST_CASE("AGM logarithm satisfies the additive functional equation") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real tol("1e-30");
  AGMLogConfig cfg = agm_log_config_for(tol, ctx);
  Real lhs = agm_log_block(cfg, Real(6), ctx);
  Real rhs = agm_log_block(cfg, Real(2), ctx) + agm_log_block(cfg, Real(3), ctx);
  CHECK(abs(lhs - rhs) <= 3 * tol);
}

TEST_CASE("theta-AGM identity reproduces the logarithm to high precision") {
  PrecisionContext ctx(1024);
  PrecisionContext::ScopedPrecision guard(ctx);
  AGMLogConfig cfg = AGMLogConfig::defaults(ctx);
  cfg.l_log = 24;
  cfg.sqrt_tol = 8 * ctx.eps();
  Real bound = ldexp(Real(1), -900);
  for (const char* q_str : {"0.5", "0.1", "0.01"}) {
    Real q(q_str);
    Real x = 1 / q;
    CHECK(abs(agm_log_block(cfg, x, ctx) - log(x)) < bound);
  }
}

TEST_CASE("artanh block values and symmetry") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real tol("1e-30");
  ArtanhBlock block(tol, ctx);
  CHECK(block(Real(0)) == 0);
  CHECK(abs(block(Real("0.1")) - atanh(Real("0.1"))) <= tol);
  CHECK(abs(block(Real("0.1")) - Real("0.1003353")) < Real("1e-7"));
  Real eighth = Real(1) / 8;
  CHECK(block(-eighth) == -block(eighth));
  CHECK_THROWS_AS(block(Real("0.2")), std::domain_error);
}

TEST_CASE("Halley tanh iteration basics") {
  PrecisionContext ctx(512);
  PrecisionContext::ScopedPrecision guard(ctx);
  HalleyConfig cfg{3, Real(0)};
  BlockResult block = halley_tanh_block(cfg, ctx);
  CHECK(block.value_fn(Real(0)) == 0);
  Real s = Real(1) / 8;
  CHECK(abs(block.value_fn(s) - tanh(s)) < Real("1e-50"));
  CHECK(abs(tanh(s) - Real("0.1243530")) < Real("1e-7"));
  CHECK(block.value_fn(-s) == -block.value_fn(s));
  CHECK_THROWS_AS(block.value_fn(Real("0.2")), std::domain_error);
  REQUIRE(block.per_step_errors.size() == 4);
  CHECK(block.per_step_errors[3] < block.per_step_errors[0]);
}

TEST_CASE("Halley trace with an inexact artanh drifts at most linearly") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real artanh_tol("1e-20");
  BlockResult exact = halley_tanh_block(HalleyConfig{4, Real(0)}, ctx, 17);
  BlockResult inexact = halley_tanh_block(HalleyConfig{4, artanh_tol}, ctx, 17);
  for (std::size_t k = 0; k < exact.per_step_errors.size(); ++k) {
    Real drift = 8 * Real(static_cast<long>(k) + 1) * artanh_tol;
    CHECK(inexact.per_step_errors[k] <= exact.per_step_errors[k] + drift);
  }
}

TEST_CASE("double-angle ladder inverts halving for the exact function") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Grid grid(Real(-1), Real(1), 21);
  for (int m : {1, 2, 3}) {
    for (const Real& w : grid.points(ctx)) {
      Real t = tanh(ldexp(w, -m));
      for (int j = 0; j < m; ++j) t = 2 * t / (1 + t * t);
      CHECK(abs(t - tanh(w)) < 16 * ctx.eps());
    }
  }
}

TEST_CASE("assembled smooth-gate block meets its target accuracy") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real epsilon("1e-12");
  BlockResult block = gelu_rational_block(GeluLadderConfig{}, epsilon, ctx);
  CHECK(block.value_fn(Real(0)) == 0);

  Real alpha = sqrt(2 / const_pi(ctx));
  Real beta("0.044715");
  RealFn truth = [&](const Real& x) {
    return x / 2 * (1 + tanh(alpha * (x + beta * x * x * x)));
  };
  CHECK(abs(truth(Real(1)) - Real("0.841192")) < Real("1e-5"));
  Grid grid(Real(-1), Real(1), 201);
  Real sup = sup_error(block.value_fn, truth, grid, ctx).sup_error;
  CHECK(sup <= epsilon);
  CHECK(block.size > 0);

  CHECK_THROWS_AS(gelu_rational_block(GeluLadderConfig{}, Real(2), ctx), std::domain_error);
  GeluLadderConfig shallow;
  shallow.m = 2;
  CHECK_THROWS_AS(gelu_rational_block(shallow, epsilon, ctx), std::invalid_argument);
}

TEST_CASE("assembled block never touches a transcendental primitive") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  BlockResult block = gelu_rational_block(GeluLadderConfig{}, Real("1e-8"), ctx);
  long calls = oracle::calls_during([&] {
    (void)block.value_fn(Real("0.8"));
    (void)block.value_fn(Real("-0.3"));
  });
  CHECK(calls == 0);
}
