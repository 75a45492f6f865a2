// Experiment runner: every command wires library constructions into a CSV
// report and exits nonzero if any embedded invariant fails, naming it.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ratnn/blocks.hpp"
#include "ratnn/bounds.hpp"
#include "ratnn/chebyshev.hpp"
#include "ratnn/csv.hpp"
#include "ratnn/gadgets.hpp"
#include "ratnn/grid.hpp"
#include "ratnn/lift.hpp"
#include "ratnn/norm_rational.hpp"
#include "ratnn/rational.hpp"
#include "ratnn/real.hpp"

namespace {

using namespace ratnn;

struct RunConfig {
  std::string command;
  unsigned bits = 256;
  double epsilon = 1e-6;
  std::size_t grid_points = 2001;
  unsigned seed = 1;
  std::string out_path = "out.csv";
};

void validate_config(const RunConfig& cfg) {
  if (cfg.bits < 53) throw std::invalid_argument("config: bits must be >= 53");
  if (!(cfg.epsilon > 0 && cfg.epsilon < 1)) {
    throw std::invalid_argument("config: epsilon must lie in (0,1)");
  }
  if (cfg.grid_points < 2) throw std::invalid_argument("config: grid-points must be >= 2");
}

[[noreturn]] void fail(const std::string& invariant) {
  throw std::runtime_error("invariant failed: " + invariant);
}

// ---------------------------------------------------------------------- //

int run_convergence(const RunConfig& cfg) {
  PrecisionContext ctx(cfg.bits);
  PrecisionContext::ScopedPrecision guard(ctx);
  CsvWriter csv(cfg.out_path, {"block", "k", "error", "log_neg_log_error", "slope_fit"}, ctx);

  auto emit = [&](const std::string& name, const std::vector<Real>& errors,
                  const SlopeFit& fit) {
    for (std::size_t k = 0; k < errors.size(); ++k) {
      Real lnl = errors[k] > 0 && errors[k] < 1 ? log(-log(errors[k])) : Real(0);
      csv.row({name, CsvWriter::cell(k), csv.cell(errors[k]), csv.cell(lnl),
               csv.cell(fit.slope)});
    }
  };

  RootIterConfig root{2, Real(1) / 2, 12};
  BlockResult root_block = pth_root_block(root, ctx);
  SlopeFit root_fit = fit_double_exp_slope(root_block.per_step_errors, ctx);
  emit("pth_root", root_block.per_step_errors, root_fit);

  AGMLogConfig log_cfg = AGMLogConfig::defaults(ctx);
  log_cfg.l_log = 14;
  log_cfg.sqrt_tol = 8 * ctx.eps();
  BlockResult log_block = agm_log_block_traced(log_cfg, Real(2), ctx);
  SlopeFit log_fit = fit_double_exp_slope(log_block.per_step_errors, ctx);
  emit("agm_log", log_block.per_step_errors, log_fit);

  HalleyConfig halley{8, Real(0)};
  BlockResult halley_block = halley_tanh_block(halley, ctx);
  SlopeFit halley_fit = fit_double_exp_slope(halley_block.per_step_errors, ctx);
  emit("halley_tanh", halley_block.per_step_errors, halley_fit);

  Real ln2 = log(Real(2)), ln3 = log(Real(3));
  if (abs(root_fit.slope - ln2) > Real("0.07")) fail("pth_root slope within ln2 +/- 0.07");
  if (abs(log_fit.slope - ln2) > Real("0.07")) fail("agm_log slope within ln2 +/- 0.07");
  if (abs(halley_fit.slope - ln3) > Real("0.12")) fail("halley slope within ln3 +/- 0.12");
  return 0;
}

int run_gelu_approx(const RunConfig& cfg) {
  PrecisionContext ctx(cfg.bits);
  PrecisionContext::ScopedPrecision guard(ctx);
  CsvWriter csv(cfg.out_path, {"epsilon", "size", "sup_error", "argmax"}, ctx);
  Real epsilon(cfg.epsilon);
  BlockResult block = gelu_rational_block(GeluLadderConfig{}, epsilon, ctx);
  Grid grid(Real(-1), Real(1), cfg.grid_points);
  RealFn truth = [&ctx](const Real& x) { return gelu(x, ctx); };
  ErrorReport report = sup_error(block.value_fn, truth, grid, ctx);
  csv.row({csv.cell(epsilon), CsvWriter::cell(block.size), csv.cell(report.sup_error),
           csv.cell(report.argmax)});
  if (report.sup_error > epsilon) fail("gelu block sup error <= epsilon");
  return 0;
}

int run_rational_approx(const RunConfig& cfg) {
  PrecisionContext ctx(cfg.bits);
  PrecisionContext::ScopedPrecision guard(ctx);
  CsvWriter csv(cfg.out_path,
                {"epsilon", "d", "J", "delta", "B", "size", "sup_error"}, ctx);
  RationalFn target;
  target.numer = {Real(1)};
  target.denom = {Real(1), Real(0), Real(1)};
  Grid grid(Real(-1), Real(1), cfg.grid_points);
  Real epsilon(cfg.epsilon);
  auto [fn, report] = approx_rational_by_gelu(target, Real(2), Real("2.3"), epsilon, ctx, grid);
  csv.row({csv.cell(epsilon), CsvWriter::cell(report.degree), CsvWriter::cell(report.j_levels),
           csv.cell(report.delta), csv.cell(report.range_b), CsvWriter::cell(report.size),
           csv.cell(report.sup_error)});
  if (report.sup_error > epsilon) fail("pipeline sup error <= epsilon");
  return 0;
}

int run_bounds(const RunConfig& cfg) {
  PrecisionContext ctx(cfg.bits);
  PrecisionContext::ScopedPrecision guard(ctx);
  CsvWriter csv(cfg.out_path, {"kind", "index", "col_a", "col_b", "col_c"}, ctx);

  auto reports = find_gelu_poles(0, 2, ctx);
  Real resid_tol = ldexp(Real(1), -static_cast<int>(ctx.bits() / 2));
  Real zeta = reports[0].zeta_eff;
  for (const PoleReport& rep : reports) {
    for (const Cplx& z : rep.roots) {
      csv.row({"pole", CsvWriter::cell(rep.k_index), csv.cell(z.re), csv.cell(z.im),
               csv.cell(detail::segment_distance(z, ctx))});
      if (pole_residual(z, rep.k_index, ctx) > resid_tol) fail("pole cubic residual");
      // reflection partner -conj(z) must also be a root
      Cplx mirror{-z.re, z.im};
      if (pole_residual(mirror, rep.k_index, ctx) > resid_tol) fail("pole reflection symmetry");
    }
    // Vieta: sum of roots 0, product i(pi/2 + k pi)/(alpha beta)
    Cplx sum, prod{Real(1), Real(0)};
    for (const Cplx& z : rep.roots) {
      sum = sum + z;
      prod = prod * z;
    }
    GeluConstants gc = GeluConstants::make(ctx);
    Cplx expect{Real(0), (const_pi(ctx) / 2 + rep.k_index * const_pi(ctx)) / (gc.alpha * gc.beta)};
    if (sum.abs() > resid_tol) fail("Vieta root sum");
    if ((prod - expect).abs() > resid_tol * expect.abs()) fail("Vieta root product");
  }

  auto target = [](double x) {
    double a = 0.7978845608028654, b = 0.044715;
    return x / 2 * (1 + std::tanh(a * (x + b * x * x * x)));
  };
  std::vector<Real> aaa = aaa_rational_fit(target, -1.0, 1.0, 14);
  for (std::size_t n = 0; n < aaa.size(); ++n) {
    Real lower = rate_lower_bound(zeta, static_cast<long>(n), Real(1));
    csv.row({"rate", CsvWriter::cell(n), csv.cell(lower), csv.cell(aaa[n]), ""});
  }
  // Pre-floor running-min decay per support point; each support point adds
  // one numerator and one denominator degree, so the per-degree ratio is
  // the square root of the per-point ratio.
  Real floor("1e-13");
  Real run_min = aaa[0];
  std::size_t last = 0;
  for (std::size_t n = 1; n < aaa.size(); ++n) {
    if (aaa[n] < floor) break;
    if (aaa[n] < run_min) run_min = aaa[n];
    last = n;
  }
  if (last < 2) fail("aaa pre-floor window too short");
  Real per_point = pow(run_min / aaa[0], Real(1) / static_cast<long>(last));
  Real per_degree = sqrt(per_point);
  Real theory = 1 / (zeta + sqrt(1 + zeta * zeta));
  if (per_degree < theory / 2) fail("aaa decay per degree >= theory ratio / 2");
  return 0;
}

int run_lift(const RunConfig& cfg) {
  PrecisionContext ctx(cfg.bits);
  PrecisionContext::ScopedPrecision guard(ctx);
  CsvWriter csv(cfg.out_path,
                {"direction", "seed", "M", "width", "L_estimate", "tol", "measured", "bound"},
                ctx);
  Grid grid(Real(-1), Real(1), 101);
  std::size_t width = 3;

  Real gelu_tol("1e-8");
  BlockResult gelu_block = gelu_rational_block(GeluLadderConfig{}, gelu_tol, ctx);
  RealFn gelu_surrogate = gelu_block.value_fn;

  for (unsigned s = 0; s < 5; ++s) {
    unsigned seed = cfg.seed + s;
    for (std::size_t depth = 1; depth <= 3; ++depth) {
      // rational -> perturbed-rational direction
      std::mt19937_64 rng(seed * 7919 + depth);
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      RationalFn r;
      r.safe = true;
      for (int i = 0; i < 6; ++i) r.numer.push_back(Real(unif(rng)));
      for (int i = 0; i < 5; ++i) r.denom.push_back(Real(unif(rng)));
      NetworkSpec net = random_network(depth, width, r, seed, ctx);
      Real tol("1e-6");
      RealFn surrogate = [r, tol, &ctx](const Real& x) {
        return eval_rational(r, x, ctx) + tol * sin(10 * x);
      };
      SubstitutionReport rep = simulate_substitution(net, true, surrogate, tol, grid, ctx);
      csv.row({"rational", CsvWriter::cell(static_cast<long>(seed)), CsvWriter::cell(depth),
               CsvWriter::cell(width), csv.cell(rep.lipschitz), csv.cell(tol),
               csv.cell(rep.measured), csv.cell(rep.bound)});
      if (rep.measured > rep.bound) fail("lift bound, rational direction");
      if (!rep.range_ok) fail("lift range invariant, rational direction");

      // GELU -> rational-block direction
      NetworkSpec gnet = random_network(depth, width, GeluActivation{}, seed + 1000, ctx);
      SubstitutionReport grep =
          simulate_substitution(gnet, false, gelu_surrogate, gelu_tol, grid, ctx);
      csv.row({"gelu", CsvWriter::cell(static_cast<long>(seed)), CsvWriter::cell(depth),
               CsvWriter::cell(width), csv.cell(grep.lipschitz), csv.cell(gelu_tol),
               csv.cell(grep.measured), csv.cell(grep.bound)});
      if (grep.measured > grep.bound) fail("lift bound, gelu direction");
      if (!grep.range_ok) fail("lift range invariant, gelu direction");
    }
  }
  return 0;
}

int run_gauge(const RunConfig& cfg) {
  PrecisionContext ctx(cfg.bits);
  PrecisionContext::ScopedPrecision guard(ctx);
  CsvWriter csv(cfg.out_path,
                {"seed", "max_flatness", "gauge_identity_dev", "max_grad_rel_err"}, ctx);
  NormAffine aff{Real("1.1"), Real(0), Real("0.2"), Real("1.3")};
  Grid probe_grid(Real(-1), Real(1), 101);
  Grid identity_grid(Real(-1), Real(1), 501);
  Real flat_tol("1e-70");
  for (unsigned s = 0; s < 3; ++s) {
    std::mt19937_64 rng(cfg.seed + s);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    SafeRational theta;
    for (int i = 0; i < 6; ++i) theta.a.push_back(Real(unif(rng)));
    for (int i = 0; i < 5; ++i) theta.b.push_back(Real(unif(rng)));

    Real flat = gauge_flatness_probe(theta, aff, probe_grid, ctx);

    Real identity_dev(0);
    for (const Real eta : {Real("0.3"), Real("-0.3"), Real(1), Real(-1)}) {
      auto [gamma_eta, theta_eta] = scale_gauge(theta, aff.gamma, eta, ctx);
      for (const Real& u : identity_grid.points(ctx)) {
        Real z = aff.gamma * (u - aff.mu) / aff.sigma;
        Real z_eta = gamma_eta * (u - aff.mu) / aff.sigma;
        Real lhs = safe_eval(theta_eta, z_eta, ctx);
        Real rhs = safe_eval(theta, z, ctx);
        Real scale = abs(rhs) > 1 ? abs(rhs) : Real(1);
        Real dev = abs(lhs - rhs) / scale;
        if (dev > identity_dev) identity_dev = dev;
      }
    }

    Real grad_err(0);
    Real h = ldexp(Real(1), -static_cast<int>(ctx.bits() / 3));
    for (const Real z : {Real("-1.2"), Real("0.3"), Real(2)}) {
      CoeffGradient grad = coeff_gradients(theta, z, ctx);
      for (std::size_t j = 0; j < theta.a.size(); ++j) {
        SafeRational up = theta, dn = theta;
        up.a[j] += h;
        dn.a[j] -= h;
        Real fd = (safe_eval(up, z, ctx) - safe_eval(dn, z, ctx)) / (2 * h);
        Real rel = abs(fd - grad.d_a[j]) / (abs(grad.d_a[j]) > 1 ? abs(grad.d_a[j]) : Real(1));
        if (rel > grad_err) grad_err = rel;
      }
      for (std::size_t k = 0; k < theta.b.size(); ++k) {
        SafeRational up = theta, dn = theta;
        up.b[k] += h;
        dn.b[k] -= h;
        Real fd = (safe_eval(up, z, ctx) - safe_eval(dn, z, ctx)) / (2 * h);
        Real rel = abs(fd - grad.d_b[k]) / (abs(grad.d_b[k]) > 1 ? abs(grad.d_b[k]) : Real(1));
        if (rel > grad_err) grad_err = rel;
      }
    }

    csv.row({CsvWriter::cell(static_cast<long>(cfg.seed + s)), csv.cell(flat),
             csv.cell(identity_dev), csv.cell(grad_err)});
    if (flat > flat_tol) fail("gauge flatness <= 1e-70");
    if (identity_dev > 8 * ctx.eps()) fail("gauge identity to 8 ulps");
    if (grad_err > Real("1e-6")) fail("coefficient gradients match finite differences");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rational/GELU approximation experiments"};
  RunConfig cfg;
  std::string config_path;
  auto* opt_command =
      app.add_option("--command", cfg.command, "experiment to run")
          ->check(CLI::IsMember(
              {"convergence", "gelu-approx", "rational-approx", "bounds", "lift", "gauge"}));
  auto* opt_bits = app.add_option("--bits", cfg.bits, "working precision in bits");
  auto* opt_eps = app.add_option("--epsilon", cfg.epsilon, "accuracy target");
  auto* opt_grid = app.add_option("--grid-points", cfg.grid_points, "grid resolution");
  auto* opt_seed = app.add_option("--seed", cfg.seed, "base random seed");
  auto* opt_out = app.add_option("--out", cfg.out_path, "output CSV path");
  app.add_option("--config", config_path, "key=value config file (flags win)");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config file " + config_path);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto pos = line.find('=');
        if (pos == std::string::npos) continue;
        std::string key = line.substr(0, pos), value = line.substr(pos + 1);
        if (key == "command" && opt_command->count() == 0) cfg.command = value;
        else if (key == "bits" && opt_bits->count() == 0) cfg.bits = std::stoul(value);
        else if (key == "epsilon" && opt_eps->count() == 0) cfg.epsilon = std::stod(value);
        else if (key == "grid-points" && opt_grid->count() == 0) cfg.grid_points = std::stoul(value);
        else if (key == "seed" && opt_seed->count() == 0) cfg.seed = std::stoul(value);
        else if (key == "out" && opt_out->count() == 0) cfg.out_path = value;
      }
    }
    if (cfg.command.empty()) throw std::invalid_argument("config: command is required");
    validate_config(cfg);

    if (cfg.command == "convergence") return run_convergence(cfg);
    if (cfg.command == "gelu-approx") return run_gelu_approx(cfg);
    if (cfg.command == "rational-approx") return run_rational_approx(cfg);
    if (cfg.command == "bounds") return run_bounds(cfg);
    if (cfg.command == "lift") return run_lift(cfg);
    if (cfg.command == "gauge") return run_gauge(cfg);
    throw std::invalid_argument("unknown command " + cfg.command);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
