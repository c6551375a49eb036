#pragma once

// The variable-smoothness Besov-type norm (difference-modulus or best-L1
// variant) and the Z-functional evaluated over admissible tiling systems.

#include <vector>

#include "tracelab/grid_function.hpp"
#include "tracelab/tilings.hpp"

namespace tracelab {

struct BesovParams {
  int l = 2;        // smoothness order; 2 or 3 (1 admitted for special cases)
  int k_max = 1;    // truncation level, >= 1
  bool use_E = false;  // best-L1 over doubled cubes instead of delta modulus
};

// Best L1(box) approximation error of phi by polynomials of degree < l, over
// the grid cells whose centers lie in the open (periodic) box; each cell
// counted once even when the box wraps.
double best_l1_box_error(const Lattice& lat, const GridFunction& phi, const Box& b,
                         int l);

// Truncated double sum: level-0 weighted L1 terms plus, for k = 1..k_max,
// gamma3(k,m,l) times the difference modulus (or 2^{kn} * best-L1 error over
// the doubled cube). One breakdown row per (k,m).
NormReport besov_variable_norm(const Lattice& lat, const GridFunction& phi,
                               const WeightScales& scales, const BesovParams& p);

// Sum over stages s >= 1 and selected cubes of hat_gamma times the best-L1
// constant error over the dilated cube, plus the level-0 weighted L1 terms.
// The system must pass check_admissible; an upper bound for the infimum norm.
NormReport z_functional(const Lattice& lat, const GridFunction& phi,
                        const TilingSystem& sys, const WeightScales& scales);

// Minimum of z_functional over a supplied system library.
NormReport z_functional_best(const Lattice& lat, const GridFunction& phi,
                             const std::vector<TilingSystem>& library,
                             const WeightScales& scales);

}  // namespace tracelab
