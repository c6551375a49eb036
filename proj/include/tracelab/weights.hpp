#pragma once

// Weights gamma(x,t) on the window half-space, their box averages and
// essential infima, the empirical A1-type constant over small cubes, and the
// derived scale tables hat_gamma with the parameters (q_tilde, q).

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tracelab/geometry.hpp"

namespace tracelab {

// Built-in weights are separable: a positive piecewise-constant periodic
// factor in x (constant on cells of pitch 1/cells_per_unit) times c*t^{-alpha}
// with 0 <= alpha < 1. Those carry exact box integrals and exact essinf.
// Generic weights supply only a pointwise evaluator.
struct Weight {
  enum class Kind { constant, power_t, step_power, piecewise_cells, generic };
  Kind kind = Kind::constant;

  double c = 1.0;      // scale of the t-factor
  double alpha = 0.0;  // exponent in t^{-alpha}

  std::vector<double> spatial;   // row-major over [0,period)^n; empty means 1
  int cells_per_unit = 1;        // power of two
  int period = 1;                // spatial period in unit lengths
  int n = 1;

  std::function<double(const std::vector<double>&, double)> fn;  // generic only
  bool has_exact_box_integral = true;
  bool has_exact_essinf = true;
  std::optional<double> declared_C_gamma;

  double operator()(const std::vector<double>& x, double t) const;

  static Weight constant(int n, double c);
  static Weight power_t(int n, double alpha, double c = 1.0);
  static Weight step_power(int n, std::vector<double> coeffs, int cells_per_unit,
                           int period, double alpha, double c = 1.0);
  static Weight piecewise_cells(int n, std::vector<double> coeffs, int period);
  static Weight generic(int n,
                        std::function<double(const std::vector<double>&, double)> fn,
                        std::optional<double> declared = std::nullopt);
};

struct EssInf {
  double value = 0.0;
  bool certified = false;  // exact formula vs refined grid minimum
};

// Mean of gamma over (spatial box) x (t0,t1); exact antiderivatives when the
// weight supports them, otherwise adaptive tensor Gauss to relative 1e-8.
// The spatial box may wrap or exceed the period (counted with multiplicity).
double box_average(const Lattice& lat, const Weight& w, const Box& space,
                   double t0, double t1);

// Quadrature path regardless of capabilities (exactness cross-check).
double box_average_quadrature(const Lattice& lat, const Weight& w,
                              const Box& space, double t0, double t1);

EssInf essinf_estimate(const Lattice& lat, const Weight& w, const Box& space,
                       double t0, double t1);

// Empirical A1 constant: max of average/essinf over all dyadic cubes of the
// (n+1)-dimensional grid with side <= 1 down to `depth`, inside the window.
// Throws if a declared constant is exceeded.
double a1loc_constant(const Lattice& lat, const Weight& w, int depth);

struct IneqCheck {
  std::string name;
  bool pass = false;
  double worst_ratio = 0.0;  // largest lhs/(constant*rhs); pass iff <= 1
};

struct A1Report {
  bool ok = false;
  std::vector<IneqCheck> checks;
};

// Per-cube scale table: hat[k][linear m] = average of gamma over
// Q_{k,m} x (0, 2^{-k}).
struct WeightScales {
  int depth = 0;
  std::vector<std::vector<double>> hat;

  double hat_gamma(int k, i64 lin) const { return hat[std::size_t(k)][std::size_t(lin)]; }
  // (side)^{n+1} * hat_gamma: the integral-normalized coefficient
  double gamma_integral(const Lattice& lat, int k, i64 lin) const;
  // 2^{kl} * integral over Q_{k,m} x (0,2^{-k})
  double gamma3(const Lattice& lat, int k, i64 lin, int l) const;
};

WeightScales populate_scales(const Lattice& lat, const Weight& w, int depth,
                             bool parallel = true);

struct QParams {
  double q_tilde = 1.0;
  double q = 1.0;
};

// Empirical (q_tilde, q) over the populated range: q_tilde compares the
// average of gamma over 8Q_{k,m} x (0,2^{-k}) against hat_gamma of the
// level-k cubes inside 8Q_{k,m}; q = 16 * q_tilde * C_gamma * 2^{n+1}.
QParams q_parameters(const Lattice& lat, const Weight& w,
                     const WeightScales& scales);

// Checks of the halving, adjacency and dilation inequalities plus the q-based
// scale comparisons; failures are report entries, never exceptions.
A1Report verify_a1_inequalities(const Lattice& lat, const Weight& w, int depth);

}  // namespace tracelab
