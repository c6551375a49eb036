#pragma once

// Sampled functions on the periodic window, analytic functions on the
// half-space, weighted Sobolev norms, traces, difference moduli, and best-L1
// polynomial approximation.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tracelab/weights.hpp"

namespace tracelab {

// Piecewise-constant samples at cell centers of the uniform grid of pitch
// 2^{-d} over [0,M)^n, periodic in x.
struct GridFunction {
  int n = 1, M = 1, d = 0;
  std::vector<double> v;  // row-major, (M*2^d)^n values

  i64 cells_per_axis() const { return i64(M) << d; }
  i64 size() const;
  double& at(const std::vector<i64>& idx);
  double at(const std::vector<i64>& idx) const;  // periodic
};

GridFunction sample_grid(int n, int M, int d,
                         const std::function<double(const std::vector<double>&)>& fn);

// CSV with header "n,M,d"; values reproduce bit-exactly on round trip.
void write_grid_csv(std::ostream& os, const GridFunction& g);
GridFunction read_grid_csv(std::istream& is);

// Function on the half-space window x (0,T]; analytic evaluator plus optional
// analytic first partials (axis < n spatial, axis == n is t). Missing
// derivatives fall back to centered finite differences of step fd_h.
struct HalfSpaceFunction {
  int n = 1;
  std::function<double(const std::vector<double>&, double)> f;
  std::function<double(const std::vector<double>&, double, int)> df;
  double fd_h = 1e-5;

  double value(const std::vector<double>& x, double t) const { return f(x, t); }
  double partial(const std::vector<double>& x, double t, int axis) const;
};

struct NormReport {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> breakdown;
  int truncation_level = 0;
  double refinement_delta = 0.0;
};

// Sum over multi-indices |a| <= l of the integral of gamma*|D^a f| over
// (spatial box) x (t0,t1); t0 == 0 means geometrically graded bands toward 0.
// Parallel and serial paths produce bit-identical sums.
NormReport weighted_sobolev_norm(const Lattice& lat, const HalfSpaceFunction& f,
                                 const Weight& w, const Box& space, double t0,
                                 double t1, int l, bool parallel = true);

struct TraceResult {
  GridFunction trace;        // filled on cells inside Q, zero elsewhere
  double residual = 0.0;     // sup over consecutive t-pairs of the L1 gap on Q
  bool converged = false;    // residual below tolerance
  bool decreasing = false;   // consecutive L1 gaps nonincreasing
};

// Trace candidate f(.,t_min) on the cube Q sampled at depth d, with the
// Cauchy residual along t_seq (strictly decreasing positive).
// tol < 0 selects the default 1e-2 * ||f(.,t_min)||_{L1(Q)}.
TraceResult trace_of(const Lattice& lat, const HalfSpaceFunction& f,
                     const DyadicCube& Q, int d, const std::vector<double>& t_seq,
                     double tol = -1.0);

// Discrete (1/|Q|^2) * sum over x in Q, h in [-r,r)^n of |Delta^l(h) phi(x)|,
// differences wrapping periodically in x. Q must be no finer than the grid.
double delta_modulus(const GridFunction& phi, const DyadicCube& Q, int l);

// Best L1(Q) approximation error by polynomials of degree < l.
// l=1: sample median (lower-of-two tie rule); l=2: IRLS over affine to 1e-6.
double best_l1_poly_error(const GridFunction& phi, const DyadicCube& Q, int l);

// Mean of phi over a (possibly wrapping) box in lat units, boundary cells
// weighted by their exact overlap fraction. Requires lat.M == phi.M and the
// grid pitch no finer than the lattice.
double cell_average(const Lattice& lat, const GridFunction& phi, const Box& b);

// L1 norm of phi over the cube Q (exact cell sum).
double l1_on_cube(const GridFunction& phi, const DyadicCube& Q);

}  // namespace tracelab
