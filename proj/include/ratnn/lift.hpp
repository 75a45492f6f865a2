#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "ratnn/gadgets.hpp"
#include "ratnn/grid.hpp"
#include "ratnn/rational.hpp"
#include "ratnn/real.hpp"

namespace ratnn {

/// Activation of a lift-theorem network node: a safe rational, the GELU
/// primitive, or an arbitrary surrogate map (used for substitution runs).
struct GeluActivation {};
using Activation = std::variant<RationalFn, GeluActivation, RealFn>;

/// One layer of nodes z_i = act(a_i . h + b_i) with ||a_i||_1 + |b_i| <= 1,
/// which keeps every pre-activation in [-1,1] when the inputs are.
struct LayerSpec {
  std::vector<std::vector<Real>> weights;
  std::vector<Real> biases;
  Activation activation;

  void validate(const PrecisionContext& ctx) const {
    PrecisionContext::ScopedPrecision guard(ctx);
    if (weights.size() != biases.size()) {
      throw std::invalid_argument("LayerSpec: weights/biases size mismatch");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
      Real norm = abs(biases[i]);
      for (const Real& w : weights[i]) norm += abs(w);
      if (norm > 1 + 16 * ctx.eps()) {
        throw std::invalid_argument("LayerSpec: node violates ||a||_1 + |b| <= 1");
      }
    }
  }
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::size_t input_dim = 1;

  std::size_t depth() const { return layers.size(); }

  void validate(const PrecisionContext& ctx) const {
    for (const LayerSpec& layer : layers) layer.validate(ctx);
  }
};

namespace detail {

/// Activation output clamped to [-1,1]; surrogates may overshoot slightly
/// and the clamp keeps the range invariant of the lift theorem intact.
inline Real apply_activation(const Activation& act, const Real& z,
                             const PrecisionContext& ctx) {
  Real v;
  if (const auto* r = std::get_if<RationalFn>(&act)) {
    v = eval_rational(*r, z, ctx);
  } else if (std::get_if<GeluActivation>(&act)) {
    v = gelu(z, ctx);
  } else {
    v = std::get<RealFn>(act)(z);
  }
  if (v > 1) v = Real(1);
  if (v < -1) v = Real(-1);
  return v;
}

}  // namespace detail

/// Output of the first node of the last layer for a scalar input chain;
/// all hidden values stay in [-1,1]. range_witness, when given, records
/// every pre-activation for invariant checks.
inline Real eval_network(const NetworkSpec& net, const Real& x, const PrecisionContext& ctx,
                         std::vector<Real>* range_witness = nullptr) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (net.input_dim != 1) {
    throw std::invalid_argument("eval_network: scalar input chains only");
  }
  if (abs(x) > 1 + 16 * ctx.eps()) {
    throw std::domain_error("eval_network: |x| must be <= 1");
  }
  std::vector<Real> h{x};
  for (const LayerSpec& layer : net.layers) {
    std::vector<Real> next(layer.weights.size());
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      Real z = layer.biases[i];
      for (std::size_t j = 0; j < h.size() && j < layer.weights[i].size(); ++j) {
        z += layer.weights[i][j] * h[j];
      }
      if (range_witness) range_witness->push_back(z);
      next[i] = detail::apply_activation(layer.activation, z, ctx);
    }
    h = std::move(next);
  }
  return h.front();
}

// ---------------------------------------------------------------------------
// Geometric error budgets
// ---------------------------------------------------------------------------

/// S_M(L) = sum_{j=0}^{M-1} L^j.
inline Real geometric_budget(const Real& lipschitz, std::size_t depth) {
  if (depth < 1) throw std::invalid_argument("geometric_budget: depth must be >= 1");
  Real acc(0), power(1);
  for (std::size_t j = 0; j < depth; ++j) {
    acc += power;
    power *= lipschitz;
  }
  return acc;
}

/// E_0 = 0, E_{j+1} = L E_j + eps_{j+1}; returns E_0 .. E_M.
inline std::vector<Real> propagate_error_bound(const Real& lipschitz,
                                               const std::vector<Real>& per_layer_tol) {
  std::vector<Real> bounds{Real(0)};
  for (const Real& eps : per_layer_tol) {
    if (eps < 0) throw std::invalid_argument("propagate_error_bound: tolerances must be >= 0");
    bounds.push_back(lipschitz * bounds.back() + eps);
  }
  return bounds;
}

// ---------------------------------------------------------------------------
// Activation substitution on small random networks
// ---------------------------------------------------------------------------

struct SubstitutionReport {
  Real measured;         // sup deviation between original and substituted net
  Real bound;            // S_M(L) * tol
  Real lipschitz;        // the L estimate the bound uses
  bool range_ok = true;  // every observed pre-activation stayed in [-1,1]
};

/// Max |finite-difference slope| of the activation over [-1,1], plus 1%
/// headroom; any upper bound is valid for the lift theorem, and the
/// estimate is reported alongside the result.
inline Real estimate_lipschitz(const Activation& act, const PrecisionContext& ctx,
                               std::size_t points = 4001) {
  PrecisionContext::ScopedPrecision guard(ctx);
  Grid grid(Real(-1), Real(1), points);
  auto pts = grid.points(ctx);
  Real worst(0);
  Real prev = detail::apply_activation(act, pts[0], ctx);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    Real cur = detail::apply_activation(act, pts[i], ctx);
    Real slope = abs(cur - prev) / (pts[i] - pts[i - 1]);
    if (slope > worst) worst = slope;
    prev = cur;
  }
  return worst * (1 + Real(1) / 100);
}

/// Replaces every activation of the requested kind by the surrogate,
/// evaluates both networks over the grid, and checks the measured sup
/// deviation against the uniform-budget bound S_M(L) * tol.
///
/// `rational_nodes` selects whether rational or GELU activations are the
/// substitution targets.
inline SubstitutionReport simulate_substitution(const NetworkSpec& net,
                                                bool rational_nodes, const RealFn& surrogate,
                                                const Real& measured_tol, const Grid& grid,
                                                const PrecisionContext& ctx,
                                                std::size_t lipschitz_points = 4001) {
  PrecisionContext::ScopedPrecision guard(ctx);
  net.validate(ctx);
  NetworkSpec substituted = net;
  Real lipschitz(0);
  bool found = false;
  for (LayerSpec& layer : substituted.layers) {
    bool matches = rational_nodes ? std::holds_alternative<RationalFn>(layer.activation)
                                  : std::holds_alternative<GeluActivation>(layer.activation);
    if (!matches) continue;
    Real est = estimate_lipschitz(layer.activation, ctx, lipschitz_points);
    if (est > lipschitz) lipschitz = est;
    layer.activation = surrogate;
    found = true;
  }
  if (!found) {
    throw std::invalid_argument("simulate_substitution: no activation of the requested kind");
  }

  SubstitutionReport report;
  report.lipschitz = lipschitz;
  report.bound = geometric_budget(lipschitz, net.depth()) * measured_tol;
  report.measured = Real(0);
  for (const Real& x : grid.points(ctx)) {
    std::vector<Real> witness;
    Real a = eval_network(net, x, ctx, &witness);
    Real b = eval_network(substituted, x, ctx, &witness);
    for (const Real& z : witness) {
      if (abs(z) > 1 + 16 * ctx.eps()) report.range_ok = false;
    }
    Real dev = abs(a - b);
    if (dev > report.measured) report.measured = dev;
  }
  return report;
}

/// Random depth-M scalar chain with the given activation at every node;
/// weights rescaled so that ||a||_1 + |b| = 0.95 per node.
inline NetworkSpec random_network(std::size_t depth, std::size_t width,
                                  const Activation& activation, unsigned seed,
                                  const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  NetworkSpec net;
  net.input_dim = 1;
  std::size_t prev = 1;
  for (std::size_t l = 0; l < depth; ++l) {
    LayerSpec layer;
    layer.activation = activation;
    for (std::size_t i = 0; i < width; ++i) {
      std::vector<Real> row;
      Real norm(0);
      for (std::size_t j = 0; j < prev; ++j) {
        row.push_back(Real(unif(rng)));
        norm += abs(row.back());
      }
      Real bias(unif(rng));
      norm += abs(bias);
      if (norm == 0) norm = Real(1);
      Real scale = Real("0.95") / norm;
      for (Real& w : row) w *= scale;
      layer.weights.push_back(std::move(row));
      layer.biases.push_back(bias * scale);
    }
    net.layers.push_back(std::move(layer));
    prev = width;
  }
  return net;
}

}  // namespace ratnn
