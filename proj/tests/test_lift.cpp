#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <stdexcept>

#include "ratnn/blocks.hpp"
#include "ratnn/grid.hpp"
#include "ratnn/lift.hpp"
#include "ratnn/rational.hpp"
#include "ratnn/real.hpp"

using namespace ratnn;

namespace {

RationalFn random_safe_rational(unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  RationalFn r;
  r.safe = true;
  for (int i = 0; i < 6; ++i) r.numer.push_back(Real(unif(rng)));
  for (int i = 0; i < 5; ++i) r.denom.push_back(Real(unif(rng)));
  return r;
}

}  // namespace

TEST_CASE("layer normalization constraint is enforced") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  LayerSpec bad;
  bad.weights = {{Real("0.8")}};
  bad.biases = {Real("0.5")};
  bad.activation = GeluActivation{};
  CHECK_THROWS_AS(bad.validate(ctx), std::invalid_argument);

  LayerSpec ok;
  ok.weights = {{Real("0.6")}};
  ok.biases = {Real("0.3")};
  ok.activation = GeluActivation{};
  CHECK_NOTHROW(ok.validate(ctx));

  LayerSpec mismatched;
  mismatched.weights = {{Real("0.5")}};
  mismatched.activation = GeluActivation{};
  CHECK_THROWS_AS(mismatched.validate(ctx), std::invalid_argument);
}

TEST_CASE("geometric budget values") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  CHECK(geometric_budget(Real(1), 5) == 5);
  CHECK(geometric_budget(Real(2), 3) == 7);
  CHECK(abs(geometric_budget(Real("1.083"), 4) - Real("4.52610")) < Real("1e-4"));
  Real closed = (pow(Real(2), 8) - 1) / (Real(2) - 1);
  CHECK(abs(geometric_budget(Real(2), 8) - closed) <= 2 * ctx.eps() * closed);
  CHECK_THROWS_AS(geometric_budget(Real(2), 0), std::invalid_argument);
}

TEST_CASE("error propagation recursion") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  auto zeros = propagate_error_bound(Real(2), {Real(0), Real(0), Real(0)});
  for (const Real& e : zeros) CHECK(e == 0);

  Real tenth = Real(1) / 10;
  auto bounds = propagate_error_bound(Real(2), {tenth, tenth, tenth});
  REQUIRE(bounds.size() == 4);
  CHECK(abs(bounds[3] - Real(7) / 10) < 8 * ctx.eps());

  CHECK_THROWS_AS(propagate_error_bound(Real(2), {Real(-1)}), std::invalid_argument);
}

TEST_CASE("uniform budget telescopes to the total tolerance") {
  PrecisionContext ctx(320);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real target("1e-3");
  for (const char* l_str : {"0.5", "1", "1.083", "2"}) {
    Real lips(l_str);
    for (std::size_t depth = 1; depth <= 8; ++depth) {
      Real per_layer = target / geometric_budget(lips, depth);
      std::vector<Real> tols(depth, per_layer);
      Real final = propagate_error_bound(lips, tols).back();
      CHECK(abs(final - target) <= ldexp(ctx.eps(), 4) * target);
    }
  }
}

TEST_CASE("scalar chain evaluation respects the range invariant") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  NetworkSpec net = random_network(3, 3, GeluActivation{}, 5, ctx);
  net.validate(ctx);
  std::vector<Real> witness;
  Real y = eval_network(net, Real("0.4"), ctx, &witness);
  CHECK(abs(y) <= 1);
  CHECK(witness.size() == 3 + 3 + 3);
  for (const Real& z : witness) CHECK(abs(z) <= 1 + 16 * ctx.eps());
  CHECK_THROWS_AS(eval_network(net, Real(2), ctx), std::domain_error);
}

TEST_CASE("random chains are generated at the 0.95 normalization margin") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  NetworkSpec net = random_network(2, 4, GeluActivation{}, 9, ctx);
  REQUIRE(net.layers.size() == 2);
  for (const LayerSpec& layer : net.layers) {
    REQUIRE(layer.weights.size() == 4);
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      Real norm = abs(layer.biases[i]);
      for (const Real& w : layer.weights[i]) norm += abs(w);
      CHECK(abs(norm - Real("0.95")) < 16 * ctx.eps());
    }
  }
}

TEST_CASE("single-layer substitution deviation is at most the tolerance") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  RationalFn r = random_safe_rational(21);
  NetworkSpec net = random_network(1, 3, r, 3, ctx);
  Real tol("1e-6");
  RealFn surrogate = [r, tol, &ctx](const Real& x) {
    return eval_rational(r, x, ctx) + tol * sin(10 * x);
  };
  Grid grid(Real(-1), Real(1), 41);
  SubstitutionReport rep = simulate_substitution(net, true, surrogate, tol, grid, ctx, 1001);
  CHECK(rep.measured <= tol);
  CHECK(rep.measured <= rep.bound);
  CHECK(rep.range_ok);
}

TEST_CASE("deep rational chain stays under the geometric bound") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  RationalFn r = random_safe_rational(33);
  NetworkSpec net = random_network(3, 4, r, 12, ctx);
  Real tol("1e-6");
  RealFn surrogate = [r, tol, &ctx](const Real& x) {
    return eval_rational(r, x, ctx) + tol * sin(10 * x);
  };
  Grid grid(Real(-1), Real(1), 101);
  SubstitutionReport rep = simulate_substitution(net, true, surrogate, tol, grid, ctx, 1001);
  CHECK(rep.measured <= rep.bound);
  CHECK(rep.range_ok);
  CHECK(rep.lipschitz > 0);
}

TEST_CASE("gate nodes substituted by the rational block stay under the bound") {
  PrecisionContext ctx(256);
  PrecisionContext::ScopedPrecision guard(ctx);
  Real tol("1e-8");
  BlockResult block = gelu_rational_block(GeluLadderConfig{}, tol, ctx);
  NetworkSpec net = random_network(2, 2, GeluActivation{}, 17, ctx);
  Grid grid(Real(-1), Real(1), 41);
  SubstitutionReport rep = simulate_substitution(net, false, block.value_fn, tol, grid, ctx, 501);
  CHECK(rep.measured <= rep.bound);
  CHECK(rep.range_ok);
}

TEST_CASE("substitution requires a matching activation kind") {
  PrecisionContext ctx(128);
  PrecisionContext::ScopedPrecision guard(ctx);
  NetworkSpec net = random_network(2, 2, GeluActivation{}, 1, ctx);
  RealFn surrogate = [](const Real& x) { return x; };
  Grid grid(Real(-1), Real(1), 11);
  CHECK_THROWS_AS(simulate_substitution(net, true, surrogate, Real("1e-6"), grid, ctx, 101),
                  std::invalid_argument);
}
