#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ratnn/gadgets.hpp"
#include "ratnn/grid.hpp"
#include "ratnn/real.hpp"

namespace ratnn {

/// Minimal complex scalar over Real; only the operations the root finder
/// and the pole reports need.
struct Cplx {
  Real re, im;

  Cplx() : re(0), im(0) {}
  Cplx(Real r, Real i) : re(std::move(r)), im(std::move(i)) {}

  Cplx operator+(const Cplx& o) const { return {re + o.re, im + o.im}; }
  Cplx operator-(const Cplx& o) const { return {re - o.re, im - o.im}; }
  Cplx operator*(const Cplx& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  Cplx operator/(const Cplx& o) const {
    Real d = o.re * o.re + o.im * o.im;
    return {(re * o.re + im * o.im) / d, (im * o.re - re * o.im) / d};
  }
  Cplx conj() const { return {re, -im}; }
  Real abs2() const { return re * re + im * im; }
  Real abs() const { return sqrt(abs2()); }
};

// ---------------------------------------------------------------------------
// Pole geometry of GELU
// ---------------------------------------------------------------------------

struct PoleReport {
  long k_index = 0;
  std::vector<Cplx> roots;  // the three roots of the branch cubic
  Real nearest_distance;    // min distance from a root to the segment [-1,1]
  Real zeta_eff;            // |Im| of the branch's nearest root
};

namespace detail {

/// Distance from a complex point to the real segment [-1,1].
inline Real segment_distance(const Cplx& z, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (z.re >= -1 && z.re <= 1) return abs(z.im);
  Real endpoint = z.re > 1 ? Real(1) : Real(-1);
  Real dx = z.re - endpoint;
  return sqrt(dx * dx + z.im * z.im);
}

}  // namespace detail

/// Roots of alpha beta z^3 + alpha z - i(pi/2 + k pi) = 0 for each branch k.
///
/// Substituting z = i w turns the cubic into a real one,
///   w^3 - (1/beta) w + (pi/2 + k pi)/(alpha beta) = 0,
/// solved in closed form (one real root, deflated quadratic for the pair),
/// then each root is polished by one complex Newton step on the original
/// cubic at context precision.
inline std::vector<PoleReport> find_gelu_poles(long k_lo, long k_hi,
                                               const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  if (k_hi < k_lo) throw std::invalid_argument("find_gelu_poles: empty branch range");
  GeluConstants gc = GeluConstants::make(ctx);
  const Real pi = const_pi(ctx);
  std::vector<PoleReport> reports;
  for (long k = k_lo; k <= k_hi; ++k) {
    Real cap_p = -1 / gc.beta;
    Real cap_q = (pi / 2 + k * pi) / (gc.alpha * gc.beta);
    // Real root of w^3 + P w + Q by Cardano (one real root: discriminant < 0
    // for every branch of this family) or trigonometric form otherwise.
    Real disc = cap_q * cap_q / 4 + cap_p * cap_p * cap_p / 27;
    Real w1;
    if (disc >= 0) {
      Real s = sqrt(disc);
      w1 = cbrt(-cap_q / 2 + s) + cbrt(-cap_q / 2 - s);
    } else {
      Real r = sqrt(-cap_p * cap_p * cap_p / 27);
      Real phi = acos(-cap_q / (2 * r));
      w1 = 2 * cbrt(r) * cos(phi / 3);
      // pick the real root that actually minimizes the residual
      Real best = abs(w1 * w1 * w1 + cap_p * w1 + cap_q);
      for (int j = 1; j < 3; ++j) {
        Real cand = 2 * cbrt(r) * cos((phi + 2 * j * pi) / 3);
        Real resid = abs(cand * cand * cand + cap_p * cand + cap_q);
        if (resid < best) {
          best = resid;
          w1 = cand;
        }
      }
    }
    // Deflate: w^2 + w1 w + (P + w1^2); conjugate pair when its
    // discriminant is negative, which holds for the nearest branches.
    Real qb = w1, qc = cap_p + w1 * w1;
    Real qdisc = qb * qb - 4 * qc;
    std::vector<Cplx> w_roots{{w1, Real(0)}};
    if (qdisc < 0) {
      Real v = sqrt(-qdisc) / 2;
      w_roots.push_back({-qb / 2, v});
      w_roots.push_back({-qb / 2, -v});
    } else {
      Real s = sqrt(qdisc);
      w_roots.push_back({(-qb + s) / 2, Real(0)});
      w_roots.push_back({(-qb - s) / 2, Real(0)});
    }

    PoleReport report;
    report.k_index = k;
    Cplx rhs{Real(0), pi / 2 + k * pi};
    for (const Cplx& w : w_roots) {
      Cplx z{-w.im, w.re};  // z = i w
      // one Newton step: f = alpha beta z^3 + alpha z - i(pi/2 + k pi)
      Cplx ab{gc.alpha * gc.beta, Real(0)};
      Cplx a{gc.alpha, Real(0)};
      Cplx f = ab * z * z * z + a * z - rhs;
      Cplx fp = Cplx{3 * gc.alpha * gc.beta, Real(0)} * z * z + a;
      z = z - f / fp;
      report.roots.push_back(z);
    }
    report.nearest_distance = detail::segment_distance(report.roots[0], ctx);
    report.zeta_eff = abs(report.roots[0].im);
    for (const Cplx& z : report.roots) {
      Real dist = detail::segment_distance(z, ctx);
      if (dist < report.nearest_distance) {
        report.nearest_distance = dist;
        report.zeta_eff = abs(z.im);
      }
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

/// Residual |alpha beta z^3 + alpha z - i(pi/2 + k pi)| of a reported root.
inline Real pole_residual(const Cplx& z, long k, const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  GeluConstants gc = GeluConstants::make(ctx);
  Cplx ab{gc.alpha * gc.beta, Real(0)};
  Cplx a{gc.alpha, Real(0)};
  Cplx rhs{Real(0), const_pi(ctx) / 2 + k * const_pi(ctx)};
  return (ab * z * z * z + a * z - rhs).abs();
}

// ---------------------------------------------------------------------------
// Capacity rate bound and implied minimum degree/size
// ---------------------------------------------------------------------------

/// C (zeta + sqrt(1 + zeta^2))^(-n).
inline Real rate_lower_bound(const Real& zeta, long n, const Real& c) {
  if (!(zeta > 0) || n < 0) {
    throw std::domain_error("rate_lower_bound: requires zeta > 0 and n >= 0");
  }
  return c * pow(zeta + sqrt(1 + zeta * zeta), -n);
}

inline Real capacity(const Real& zeta) {
  return 2 * log(zeta + sqrt(1 + zeta * zeta));
}

/// Smallest degree n with C (zeta + sqrt(1+zeta^2))^(-n) <= epsilon.
inline long min_rational_degree(const Real& epsilon, const Real& zeta, const Real& c) {
  if (!(epsilon > 0 && epsilon < c)) {
    throw std::domain_error("min_rational_degree: bound vacuous unless 0 < epsilon < C");
  }
  Real n = ceil(log(c / epsilon) / log(zeta + sqrt(1 + zeta * zeta)));
  return n < 0 ? 0 : n.convert_to<long>();
}

/// Width*depth lower bound implied by the minimum degree through the
/// degree cap of (3,2)-rational networks.
inline long min_rational_size(const Real& epsilon, const Real& zeta, const Real& c,
                              const Real& c_deg) {
  long n = min_rational_degree(epsilon, zeta, c);
  if (n < 1) n = 1;
  auto [w, l] = min_size_from_degree(n, c_deg);
  return w * l;
}

// ---------------------------------------------------------------------------
// Curvature separation
// ---------------------------------------------------------------------------

namespace detail {

inline void check_curvature_params(const Real& epsilon, const Real& eta) {
  if (!(epsilon > 0 && epsilon < Real(1) / 8)) {
    throw std::domain_error("curvature: epsilon must lie in (0, 1/8)");
  }
  if (!(eta > 0 && eta < pow(epsilon, Real(1) / 4))) {
    throw std::domain_error("curvature: eta must lie in (0, epsilon^(1/4))");
  }
}

}  // namespace detail

/// 1/(2 epsilon): the curvature any epsilon-approximant of R_eta must carry.
inline Real curvature_requirement(const Real& epsilon, const Real& eta,
                                  const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  detail::check_curvature_params(epsilon, eta);
  return 1 / (2 * epsilon);
}

/// Finite-difference curvature |f(eta)+f(-eta)-2f(0)|/eta^2 of an
/// epsilon-approximant of R_eta(x) = 1/(x^2+eta^2); must be at least
/// (1 - 4 epsilon eta^2)/eta^4, which in the valid region dominates the
/// requirement 1/(2 epsilon).
inline bool verify_curvature_chain(const RealFn& f, const Real& epsilon, const Real& eta,
                                   const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  detail::check_curvature_params(epsilon, eta);
  Real fd = abs(f(eta) + f(-eta) - 2 * f(0)) / (eta * eta);
  Real needed = (1 - 4 * epsilon * eta * eta) / pow(eta, 4);
  return fd >= needed;
}

struct CurvatureBudget {
  Real c;                    // max{1, sup|G'|, sqrt(sup|G''|)}
  Real b;                    // parameter magnitude bound
  std::vector<long> widths;  // W_1 .. W_L

  Real upper() const {
    long depth = static_cast<long>(widths.size());
    Real acc = Real(depth) * pow(c * b, 2 * depth + 1);
    for (long w : widths) acc *= Real(w) * Real(w);
    return acc;
  }
};

inline Real curvature_upper(const CurvatureBudget& budget) {
  if (budget.widths.empty()) {
    throw std::invalid_argument("curvature_upper: widths must be nonempty");
  }
  return budget.upper();
}

/// Scalar-input dense GELU network with all parameters bounded by B.
struct DenseGeluNet {
  struct Layer {
    std::vector<std::vector<Real>> weights;  // [neuron][input]
    std::vector<Real> biases;
  };
  std::vector<Layer> layers;
  std::vector<Real> out_weights;
  Real out_bias;
  Real param_bound;  // B

  void validate() const {
    auto check = [this](const Real& v) {
      if (abs(v) > param_bound) {
        throw std::invalid_argument("DenseGeluNet: parameter exceeds the bound B");
      }
    };
    for (const Layer& layer : layers) {
      for (const auto& row : layer.weights)
        for (const Real& v : row) check(v);
      for (const Real& v : layer.biases) check(v);
    }
    for (const Real& v : out_weights) check(v);
    check(out_bias);
  }

  Real eval(const Real& x, const PrecisionContext& ctx) const {
    PrecisionContext::ScopedPrecision guard(ctx);
    std::vector<Real> h{x};
    for (const Layer& layer : layers) {
      std::vector<Real> next(layer.weights.size());
      for (std::size_t i = 0; i < layer.weights.size(); ++i) {
        Real z = layer.biases[i];
        for (std::size_t j = 0; j < h.size(); ++j) z += layer.weights[i][j] * h[j];
        next[i] = gelu(z, ctx);
      }
      h = std::move(next);
    }
    Real y = out_bias;
    for (std::size_t j = 0; j < h.size(); ++j) y += out_weights[j] * h[j];
    return y;
  }
};

/// Max over the grid of the second-order central finite difference of the
/// network output, step 2^(-bits/3).
inline Real measure_curvature(const DenseGeluNet& net, const Grid& grid,
                              const PrecisionContext& ctx) {
  PrecisionContext::ScopedPrecision guard(ctx);
  net.validate();
  Real h = ldexp(Real(1), -static_cast<int>(ctx.bits() / 3));
  Real worst(0);
  for (const Real& x : grid.points(ctx)) {
    Real fd = abs(net.eval(x + h, ctx) + net.eval(x - h, ctx) - 2 * net.eval(x, ctx)) /
              (h * h);
    if (fd > worst) worst = fd;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Lipschitz constants of GELU and its derivatives
// ---------------------------------------------------------------------------

enum class DerivOrder { Value, First, Second };

namespace detail {

inline Real gelu_deriv(const Real& x, DerivOrder which, const GeluConstants& gc) {
  Real p = gc.cubic(x);
  Real t = tanh(p);
  if (which == DerivOrder::Value) return x / 2 * (1 + t);
  Real sech2 = 1 - t * t;
  Real p1 = gc.alpha * (1 + 3 * gc.beta * x * x);
  if (which == DerivOrder::First) return (1 + t) / 2 + x / 2 * sech2 * p1;
  Real p2 = 6 * gc.alpha * gc.beta * x;
  return sech2 * (p1 + x * p2 / 2 - x * t * p1 * p1);
}

}  // namespace detail

/// Grid-plus-refinement supremum of |G|, |G'| or |G''| on [lo, hi],
/// with analytic derivative formulas. A point interval returns the value.
inline Real lipschitz_sup(DerivOrder which, const Real& lo, const Real& hi,
                          const PrecisionContext& ctx, std::size_t grid_points = 4001) {
  PrecisionContext::ScopedPrecision guard(ctx);
  GeluConstants gc = GeluConstants::make(ctx);
  if (lo == hi) return abs(detail::gelu_deriv(lo, which, gc));
  if (!(lo < hi)) throw std::invalid_argument("lipschitz_sup: requires lo <= hi");
  Real a = lo, b = hi;
  Real best(0), best_x = a;
  for (int pass = 0; pass < 3; ++pass) {
    Grid grid(a, b, grid_points);
    for (const Real& x : grid.points(ctx)) {
      Real v = abs(detail::gelu_deriv(x, which, gc));
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    Real step = (b - a) / Real(grid_points - 1);
    a = best_x - step;
    b = best_x + step;
    if (a < lo) a = lo;
    if (b > hi) b = hi;
    if (!(a < b)) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Greedy barycentric rational fitting (empirical near-best approximant)
// ---------------------------------------------------------------------------

/// Per-degree sup-error of greedy barycentric rational interpolation of the
/// target on [lo, hi]: support points are added at the current error
/// maximum and the weights come from the least-squares null space of the
/// Loewner matrix. Runs in double precision.
inline std::vector<Real> aaa_rational_fit(const std::function<double(double)>& target,
                                          double lo, double hi, std::size_t max_degree,
                                          std::size_t sample_points = 1200) {
  if (!(lo < hi)) throw std::invalid_argument("aaa_rational_fit: requires lo < hi");
  std::vector<double> zs(sample_points), fs(sample_points);
  for (std::size_t i = 0; i < sample_points; ++i) {
    zs[i] = lo + (hi - lo) * static_cast<double>(i) / (sample_points - 1);
    fs[i] = target(zs[i]);
  }
  double mean = 0;
  for (double v : fs) mean += v;
  mean /= static_cast<double>(sample_points);

  std::vector<std::size_t> support;
  std::vector<double> rvals(sample_points, mean);
  std::vector<Real> errors;
  std::vector<bool> is_support(sample_points, false);

  for (std::size_t m = 1; m <= max_degree; ++m) {
    // add the point of current worst error
    std::size_t pick = 0;
    double worst = -1;
    for (std::size_t i = 0; i < sample_points; ++i) {
      if (is_support[i]) continue;
      double dev = std::abs(fs[i] - rvals[i]);
      if (dev > worst) {
        worst = dev;
        pick = i;
      }
    }
    support.push_back(pick);
    is_support[pick] = true;

    // Loewner least-squares null vector for the weights
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < sample_points; ++i)
      if (!is_support[i]) rest.push_back(i);
    Eigen::MatrixXd loewner(rest.size(), support.size());
    for (std::size_t r = 0; r < rest.size(); ++r) {
      for (std::size_t c = 0; c < support.size(); ++c) {
        std::size_t i = rest[r], j = support[c];
        loewner(r, c) = (fs[i] - fs[j]) / (zs[i] - zs[j]);
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(loewner, Eigen::ComputeThinV);
    Eigen::VectorXd w = svd.matrixV().col(static_cast<Eigen::Index>(support.size()) - 1);
    if (w.norm() == 0) throw std::runtime_error("aaa_rational_fit: degenerate weight solve");

    // barycentric evaluation on the whole grid
    double sup = 0;
    for (std::size_t i = 0; i < sample_points; ++i) {
      if (is_support[i]) {
        rvals[i] = fs[i];
        continue;
      }
      double num = 0, den = 0;
      for (std::size_t c = 0; c < support.size(); ++c) {
        double d = zs[i] - zs[support[c]];
        num += w(static_cast<Eigen::Index>(c)) * fs[support[c]] / d;
        den += w(static_cast<Eigen::Index>(c)) / d;
      }
      rvals[i] = num / den;
      double dev = std::abs(fs[i] - rvals[i]);
      if (dev > sup) sup = dev;
    }
    errors.push_back(Real(sup));
  }
  return errors;
}

}  // namespace ratnn
