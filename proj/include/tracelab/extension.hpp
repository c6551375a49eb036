#pragma once

// Both extension operators: the linear mollifier-based one (smooth orders)
// and the nonlinear partition-of-unity one (limiting first order), together
// with the index-set combinatorics and smooth partitions they need.

#include <memory>
#include <utility>
#include <vector>

#include "tracelab/grid_function.hpp"
#include "tracelab/tilings.hpp"

namespace tracelab {

// Normalized C-infinity bump on the unit ball plus the composite-kernel
// weights mu_j solved from the measured even-moment system, so that the
// two-stage mollifier reproduces polynomials of degree < l.
struct MollifierSpec {
  int n = 1;
  int l = 1;
  double norm_c = 1.0;          // bump normalization constant
  std::vector<double> mu;       // size l
  std::vector<double> moments;  // even 1-axis moments m_0, m_2, ... of the bump

  double theta(const std::vector<double>& u) const;  // the normalized bump
  double integral_quadrature() const;                // should be 1

  static MollifierSpec make(int n, int l);
};

// Two-stage mollification of the grid function at the point x:
// sum_j mu_j (Theta_eps * Theta_{j eps} * phi)(x), kernels L1-normalized.
// Requires eps >= 2 * grid pitch.
double mollify_E_eps(const Lattice& lat, const GridFunction& phi, double eps,
                     const MollifierSpec& spec, const std::vector<double>& x);

// f(x,t) = sum_k psi_k(t) E_{2^-k}[phi](x), truncated at the finest k the
// grid resolves; f vanishes for t >= 1 and its trace recovers phi.
HalfSpaceFunction extend_smooth(const Lattice& lat, const GridFunction& phi, int l,
                                const MollifierSpec& spec);

// Smooth partition of unity on window x (0,2) adapted to a tiling system
// (factor-2 dilations, so the lattice must have k0 = 0), with the B/D/E
// index-set combinatorics resolved into an owner map.
struct PartitionFamily {
  Lattice lat;
  int K = 0;  // finest (k,m) level; the k = K time band lumps the tail

  std::vector<DyadicCube> cubes;  // one entry per (stage, selected cube) pair
  std::vector<int> stage;
  // E-sets: pair id -> list of (k, linear m); disjoint and exhaustive
  std::vector<std::vector<std::pair<int, i64>>> e_set;
  // owner[k][linear m] = pair id whose E-set holds (k,m)
  std::vector<std::vector<int>> owner;

  double psi(int k, double t) const;                  // time bumps, 0..K
  double theta(int k, const std::vector<i64>& m,
               const std::vector<double>& x) const;   // normalized spatial bump
  double big_theta(int k, const std::vector<i64>& m, const std::vector<double>& x,
                   double t) const;                   // theta * psi
  double g(std::size_t pair, const std::vector<double>& x, double t) const;
  double g_sum(const std::vector<double>& x, double t) const;
  int support_count(const std::vector<double>& x, double t) const;
  // central finite-difference gradient of g, spatial axes then t
  std::vector<double> grad_g(std::size_t pair, const std::vector<double>& x,
                             double t) const;
};

PartitionFamily build_partition_g(const Lattice& lat, const TilingSystem& sys);

// Largest measured ratio of integral(gamma |grad g|) over the support bands
// to hat_gamma * |Q| across all pairs.
double partition_gradient_constant(const Lattice& lat, const PartitionFamily& fam,
                                   const Weight& w, const WeightScales& scales);

// f(x,t) = sum over pairs of g(x,t) times the cell average of phi over the
// dilated cube; nonlinear in phi once the system depends on it.
HalfSpaceFunction extend_limiting(const Lattice& lat, const GridFunction& phi,
                                  const TilingSystem& sys);

}  // namespace tracelab
