#pragma once

// Greedy cover selection with bounded overlap, function-dependent level
// schedules, and the blue/yellow construction of weight-adapted tiling
// systems with the four admissibility conditions.

#include <string>
#include <vector>

#include "tracelab/grid_function.hpp"
#include "tracelab/weights.hpp"

namespace tracelab {

struct LevelSchedule {
  std::vector<int> l;      // strictly increasing, l[0] = 0
  bool truncated = false;  // hit d_max before the requested stage count
};

// l_{j+1} = minimal level whose slab Sobolev norm over window x (0,2^{-l})
// is at most half the previous slab norm (l_j + 1 when the norm is zero).
LevelSchedule build_lj_sequence(const Lattice& lat, const HalfSpaceFunction& f,
                                const Weight& w, int max_stages);

// Single deterministic greedy pass in canonical order (level ascending, then
// lexicographic index): a cube is dropped iff its dilation is covered by the
// dilations of the currently surviving other cubes. Returns surviving
// positions into `tiling`.
std::vector<std::size_t> select_cover(const Lattice& lat,
                                      const std::vector<ColoredCube>& tiling);

// (min, max) multiplicity of the open-box family over the whole torus,
// decided exactly on the half-granularity sample lattice.
std::pair<int, int> overlap_range(const Lattice& lat, const std::vector<Box>& boxes);

struct TilingSystem {
  std::vector<std::vector<ColoredCube>> raw;     // every construction step
  std::vector<std::vector<ColoredCube>> stages;  // thinned: stages[s] = raw[r*s]
  std::vector<std::vector<std::size_t>> selected;  // survivors per stage
  std::vector<int> stage_level;                    // minimal admitted level 2^{-l}
  LevelSchedule schedule;
  int r = 5;
  double q = 1.0, c1 = 1.0, c2 = 1.0;
  bool truncated = false;
};

// Blue/yellow induction: every step-s cube with hat_gamma in [q^j, q^{j+1})
// is subdivided; children whose hat_gamma exceeds q^{j+1} are painted blue
// and frozen for the step, the rest continue down to side 2^{-l_{s+1}} and
// are painted yellow. Thinning keeps every r-th step.
TilingSystem build_admissible_system(const Lattice& lat, const WeightScales& scales,
                                     const LevelSchedule& schedule, double q, int r);

struct AdmissCondition {
  std::string name;
  double worst = 0.0;  // raw ratio, compared against `limit`
  double limit = 1.0;
  bool pass = true;
};

struct AdmissReport {
  bool ok = false;
  std::vector<AdmissCondition> conds;
};

// Def-style admissibility over ALL cubes of each stage: (1) intersecting
// dilated same-stage cubes compare hat_gamma within c1; (2) stage-to-stage
// containment compares within c2 both ways; (3) any stage-(s+1) cube whose
// dilation meets a stage-s dilation has at most half its side; (4) stage-s
// sides are at least 2^{-stage_level[s]}.
AdmissReport check_admissible(const Lattice& lat, const WeightScales& scales,
                              const TilingSystem& sys, double c1, double c2);

// Every cube of `later` lies inside some cube of `earlier`.
bool is_succession(const Lattice& lat, const std::vector<ColoredCube>& later,
                   const std::vector<ColoredCube>& earlier);

}  // namespace tracelab
