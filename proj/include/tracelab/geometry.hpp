#pragma once

// Exact integer-lattice arithmetic for dyadic cubes on a bounded periodic
// window [0,M)^n. All coordinates live on the lattice of pitch 2^{-shift},
// shift = d_max + k0 + 1, so corners of (1+2^{-k0})-dilated cubes of any
// admitted level are integers and every predicate is decided exactly.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace tracelab {

using i64 = std::int64_t;

struct Window {
  int n = 1;       // spatial dimension
  int M = 1;       // spatial period, window = [0,M)^n
  int d_max = 6;   // finest admitted dyadic level
  static constexpr int T = 2;  // temporal extent (0,T]
};

struct DilationParam {
  int k0 = 0;  // lambda = 2^{-k0}, dilation factor 1 + lambda
};

// Shared lattice context derived from a Window and a DilationParam.
struct Lattice {
  int n = 1, M = 1, d_max = 6, k0 = 0;
  int shift = 8;  // d_max + k0 + 1
  i64 S = 256;    // units per unit length (2^shift)
  i64 W = 256;    // units per period (M*S)

  Lattice() = default;
  Lattice(const Window& w, DilationParam d);

  i64 side_units(int k) const { return S >> k; }       // side of level-k cube
  i64 cells_per_axis(int k) const { return i64(M) << k; }  // cube count per axis
};

// Dyadic cube Q_{k,m}: side 2^{-k}, corner m*2^{-k}; m reduced mod M*2^k.
struct DyadicCube {
  int k = 0;
  std::vector<i64> m;

  bool operator==(const DyadicCube&) const = default;
};

// Axis-aligned spatial box in lattice units; lo canonical in [0,W).
// len >= W on an axis means the axis wraps completely.
struct Box {
  std::vector<i64> lo, len;
};

struct Interval {
  i64 lo = 0, len = 0;
};

// Pi_{k,m}-style box: spatial part (periodic) times a t-interval (plain).
struct SpaceTimeBox {
  Box space;
  Interval time;
};

// Exact rational point in unit lengths (x_i = num/den), one pair per axis,
// den > 0.
struct RatPoint {
  std::vector<std::pair<i64, i64>> c;
};

// --- index and family helpers ------------------------------------------------

// Reduce a cube index into [0, M*2^k) per axis.
void reduce_index(const Lattice& lat, DyadicCube& q);

// Linear index of a (reduced) cube at its level, lexicographic in m.
i64 linear_index(const Lattice& lat, const DyadicCube& q);
DyadicCube cube_from_linear(const Lattice& lat, int k, i64 idx);

// --- cube operations ----------------------------------------------------------

// The 2^n children at level k+1. Throws std::invalid_argument("depth exhausted")
// when q.k == d_max.
std::vector<DyadicCube> children_of(const Lattice& lat, const DyadicCube& q);

DyadicCube parent_of(const Lattice& lat, const DyadicCube& q);

// Closed/open cube as a Box (corners exact).
Box cube_box(const Lattice& lat, const DyadicCube& q);

// Concentric dilation by factor 1 + 2^{-k0}; corners exact lattice points.
Box dilate(const Lattice& lat, const DyadicCube& q);

// Concentric dilation by an integer factor c (used for 8Q in the q~ estimate).
Box dilate_int(const Lattice& lat, const DyadicCube& q, int factor);

// --- measures and predicates (all exact) --------------------------------------

// Lebesgue measure of A ∩ B under periodic identification, in units^n.
i64 intersection_measure(const Lattice& lat, const Box& a, const Box& b);

// Box volume in units^n (axes clamped at W).
i64 box_measure(const Lattice& lat, const Box& b);

// Open-box membership of an exact rational point (periodic).
bool contains_open(const Lattice& lat, const Box& b, const RatPoint& p);

// Number of boxes in `family` whose open box contains p.
int overlap_multiplicity(const Lattice& lat, const RatPoint& p,
                         const std::vector<Box>& family);

// True iff every lattice cell inside `target` is contained in some member of
// `others` (exact; granularity adapted to the common corner lattice).
bool covered_by_union(const Lattice& lat, const Box& target,
                      const std::vector<Box>& others);

// --- tiling checks -------------------------------------------------------------

struct TilingDiag {
  bool ok = false;
  std::string detail;  // first gap or overlap cell, if any
};

// Interiors pairwise disjoint and closures cover the window.
TilingDiag validate_tiling(const Lattice& lat, const std::vector<DyadicCube>& cubes);

// --- serialization --------------------------------------------------------------

enum class CubeColor : std::uint8_t { yellow = 0, blue = 1 };

struct ColoredCube {
  DyadicCube cube;
  CubeColor color = CubeColor::yellow;
};

// Text format: header "n M d_max k0", then one record "k m_1 ... m_n color"
// per cube; bit-exact round trip.
void write_tiling(std::ostream& os, const Lattice& lat,
                  const std::vector<ColoredCube>& cubes);
std::vector<ColoredCube> read_tiling(std::istream& is, Lattice& lat_out);

}  // namespace tracelab
