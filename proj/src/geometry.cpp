#include "tracelab/geometry.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tracelab {

Lattice::Lattice(const Window& w, DilationParam d)
    : n(w.n), M(w.M), d_max(w.d_max), k0(d.k0) {
  if (n < 1 || M < 1 || d_max < 1 || k0 < 0)
    throw std::invalid_argument("bad window/dilation parameters");
  shift = d_max + k0 + 1;
  if (shift > 40) throw std::invalid_argument("lattice pitch too fine for i64");
  S = i64(1) << shift;
  W = i64(M) * S;
}

static i64 imod(i64 v, i64 m) {
  i64 r = v % m;
  return r < 0 ? r + m : r;
}

void reduce_index(const Lattice& lat, DyadicCube& q) {
  const i64 cpa = lat.cells_per_axis(q.k);
  for (auto& mi : q.m) mi = imod(mi, cpa);
}

i64 linear_index(const Lattice& lat, const DyadicCube& q) {
  const i64 cpa = lat.cells_per_axis(q.k);
  i64 idx = 0;
  for (int i = 0; i < lat.n; ++i) idx = idx * cpa + imod(q.m[i], cpa);
  return idx;
}

DyadicCube cube_from_linear(const Lattice& lat, int k, i64 idx) {
  const i64 cpa = lat.cells_per_axis(k);
  DyadicCube q{k, std::vector<i64>(lat.n, 0)};
  for (int i = lat.n - 1; i >= 0; --i) {
    q.m[i] = idx % cpa;
    idx /= cpa;
  }
  return q;
}

std::vector<DyadicCube> children_of(const Lattice& lat, const DyadicCube& q) {
  if (q.k >= lat.d_max) throw std::invalid_argument("depth exhausted");
  std::vector<DyadicCube> out;
  out.reserve(std::size_t(1) << lat.n);
  const int corners = 1 << lat.n;
  for (int c = 0; c < corners; ++c) {
    DyadicCube child{q.k + 1, std::vector<i64>(lat.n)};
    for (int i = 0; i < lat.n; ++i)
      child.m[i] = 2 * q.m[i] + ((c >> i) & 1);
    reduce_index(lat, child);
    out.push_back(std::move(child));
  }
  return out;
}

DyadicCube parent_of(const Lattice& lat, const DyadicCube& q) {
  if (q.k == 0) throw std::invalid_argument("level-0 cube has no parent");
  DyadicCube p{q.k - 1, q.m};
  for (auto& mi : p.m) mi = (mi >= 0 ? mi / 2 : -((-mi + 1) / 2));
  reduce_index(lat, p);
  return p;
}

Box cube_box(const Lattice& lat, const DyadicCube& q) {
  Box b;
  b.lo.resize(lat.n);
  b.len.assign(lat.n, lat.side_units(q.k));
  for (int i = 0; i < lat.n; ++i)
    b.lo[i] = imod(q.m[i] * lat.side_units(q.k), lat.W);
  return b;
}

Box dilate(const Lattice& lat, const DyadicCube& q) {
  const i64 u = lat.side_units(q.k);          // 2^{shift-k}
  const i64 half_ext = u >> (lat.k0 + 1);     // (lambda/2)*side, integer by design
  Box b;
  b.lo.resize(lat.n);
  b.len.assign(lat.n, u + 2 * half_ext);
  for (int i = 0; i < lat.n; ++i)
    b.lo[i] = imod(q.m[i] * u - half_ext, lat.W);
  return b;
}

Box dilate_int(const Lattice& lat, const DyadicCube& q, int factor) {
  const i64 u = lat.side_units(q.k);
  const i64 ext = u * (factor - 1) / 2;
  Box b;
  b.lo.resize(lat.n);
  b.len.assign(lat.n, u * factor);
  for (int i = 0; i < lat.n; ++i)
    b.lo[i] = imod(q.m[i] * u - ext, lat.W);
  return b;
}

// Circular overlap of two intervals of the torus of circumference W.
static i64 circ_overlap(i64 W, i64 lo1, i64 len1, i64 lo2, i64 len2) {
  if (len1 >= W) return std::min(len2, W);
  if (len2 >= W) return len1;
  i64 total = 0;
  for (int j = -1; j <= 1; ++j) {
    const i64 a = std::max(lo1, lo2 + j * W);
    const i64 b = std::min(lo1 + len1, lo2 + len2 + j * W);
    if (b > a) total += b - a;
  }
  return total;
}

i64 intersection_measure(const Lattice& lat, const Box& a, const Box& b) {
  i64 vol = 1;
  for (int i = 0; i < lat.n; ++i) {
    const i64 o = circ_overlap(lat.W, a.lo[i], a.len[i], b.lo[i], b.len[i]);
    if (o == 0) return 0;
    vol *= o;
  }
  return vol;
}

i64 box_measure(const Lattice& lat, const Box& b) {
  i64 vol = 1;
  for (int i = 0; i < lat.n; ++i) vol *= std::min(b.len[i], lat.W);
  return vol;
}

bool contains_open(const Lattice& lat, const Box& b, const RatPoint& p) {
  for (int i = 0; i < lat.n; ++i) {
    auto [num, den] = p.c[i];
    if (den <= 0) throw std::invalid_argument("nonpositive denominator");
    if (b.len[i] > lat.W) continue;  // arc longer than the circumference
    // coordinate in lattice units is num*S/den; compare over common denominator
    const i64 v0 = imod(num * lat.S, lat.W * den);
    bool inside = false;
    for (i64 j = 0; j <= 2 && !inside; ++j) {
      const i64 v = v0 + j * lat.W * den;
      inside = (v > b.lo[i] * den) && (v < (b.lo[i] + b.len[i]) * den);
    }
    if (!inside) return false;
  }
  return true;
}

int overlap_multiplicity(const Lattice& lat, const RatPoint& p,
                         const std::vector<Box>& family) {
  int count = 0;
  for (const auto& b : family) count += contains_open(lat, b, p) ? 1 : 0;
  return count;
}

// Largest power of two dividing every corner coordinate of the given boxes
// (and W); rasterization at this pitch is exact.
static i64 corner_granularity(const Lattice& lat, const Box& target,
                              const std::vector<Box>& others) {
  std::uint64_t acc = std::uint64_t(lat.W);
  auto fold = [&acc](const Box& b) {
    for (std::size_t i = 0; i < b.lo.size(); ++i) {
      acc |= std::uint64_t(b.lo[i]);
      acc |= std::uint64_t(b.lo[i] + b.len[i]);
    }
  };
  fold(target);
  for (const auto& b : others) fold(b);
  return i64(1) << std::min<int>(std::countr_zero(acc), lat.shift);
}

// Open-set containment target ⊂ ∪ others, decided exactly. All corners lie on
// the pitch-G lattice, so membership in the union is constant on each stratum
// (cell/face/vertex) of that grid, and every stratum meeting the open target
// has its barycenter on the half-G lattice strictly inside it. Sampling those
// barycenters is therefore exact. Work in doubled coordinates: sample points
// are 2*target.lo + s*G for s in [s_lo, s_hi) per axis.
bool covered_by_union(const Lattice& lat, const Box& target,
                      const std::vector<Box>& others) {
  const i64 G = corner_granularity(lat, target, others);
  const i64 W2 = 2 * lat.W;
  std::vector<i64> s_lo(lat.n), s_hi(lat.n), dims(lat.n);
  i64 total = 1;
  for (int i = 0; i < lat.n; ++i) {
    if (target.len[i] > lat.W) {          // full torus circle, seam included
      s_lo[i] = 0;
      s_hi[i] = W2 / G;
    } else {                              // open box (seam excluded at len==W)
      s_lo[i] = 1;
      s_hi[i] = 2 * target.len[i] / G;
    }
    dims[i] = s_hi[i] - s_lo[i];
    if (dims[i] <= 0) return true;  // degenerate target
    total *= dims[i];
  }
  std::vector<char> hit(std::size_t(total), 0);

  std::vector<std::vector<std::pair<i64, i64>>> spans(lat.n);
  for (const auto& ob : others) {
    bool any_empty = false;
    for (int i = 0; i < lat.n && !any_empty; ++i) {
      spans[i].clear();
      if (ob.len[i] > lat.W) {
        spans[i].push_back({0, dims[i]});
        continue;
      }
      // strict inclusion: 2*ob.lo < 2*target.lo + s*G + j*W2 < 2*(ob.lo+ob.len)
      for (i64 j = -2; j <= 2; ++j) {
        const i64 a = (2 * ob.lo[i] - 2 * target.lo[i] - j * W2) / G + 1;
        const i64 b = (2 * (ob.lo[i] + ob.len[i]) - 2 * target.lo[i] - j * W2) / G;
        const i64 lo = std::max(a, s_lo[i]) - s_lo[i];
        const i64 up = std::min(b, s_hi[i]) - s_lo[i];
        if (up > lo) spans[i].push_back({lo, up});
      }
      if (spans[i].empty()) any_empty = true;
    }
    if (any_empty) continue;
    auto mark = [&](auto&& self, int axis, i64 base) -> void {
      i64 stride = 1;
      for (int i = axis + 1; i < lat.n; ++i) stride *= dims[i];
      for (auto [a, b] : spans[axis]) {
        if (axis == lat.n - 1)
          std::fill(hit.begin() + base + a, hit.begin() + base + b, char(1));
        else
          for (i64 r = a; r < b; ++r) self(self, axis + 1, base + r * stride);
      }
    };
    mark(mark, 0, 0);
  }
  return std::all_of(hit.begin(), hit.end(), [](char c) { return c != 0; });
}

TilingDiag validate_tiling(const Lattice& lat, const std::vector<DyadicCube>& cubes) {
  int kmax = 0;
  for (const auto& q : cubes) {
    if (q.k < 0 || q.k > lat.d_max) return {false, "cube level out of range"};
    kmax = std::max(kmax, q.k);
  }
  const i64 cpa = lat.cells_per_axis(kmax);
  i64 total = 1;
  for (int i = 0; i < lat.n; ++i) total *= cpa;
  std::vector<std::uint16_t> count(std::size_t(total), 0);

  for (const auto& q : cubes) {
    const i64 span = i64(1) << (kmax - q.k);
    std::vector<i64> base(lat.n);
    for (int i = 0; i < lat.n; ++i) base[i] = imod(q.m[i], lat.cells_per_axis(q.k)) * span;
    std::vector<i64> off(lat.n, 0);
    for (;;) {
      i64 idx = 0;
      for (int i = 0; i < lat.n; ++i) idx = idx * cpa + (base[i] + off[i]);
      ++count[std::size_t(idx)];
      int ax = lat.n - 1;
      while (ax >= 0 && ++off[ax] == span) off[ax--] = 0;
      if (ax < 0) break;
    }
  }
  for (i64 idx = 0; idx < total; ++idx) {
    if (count[std::size_t(idx)] != 1) {
      std::ostringstream oss;
      oss << (count[std::size_t(idx)] == 0 ? "gap" : "overlap")
          << " at level-" << kmax << " cell " << idx;
      return {false, oss.str()};
    }
  }
  return {true, ""};
}

void write_tiling(std::ostream& os, const Lattice& lat,
                  const std::vector<ColoredCube>& cubes) {
  os << lat.n << ' ' << lat.M << ' ' << lat.d_max << ' ' << lat.k0 << '\n';
  for (const auto& cc : cubes) {
    os << cc.cube.k;
    for (const auto& mi : cc.cube.m) os << ' ' << mi;
    os << ' ' << (cc.color == CubeColor::blue ? "blue" : "yellow") << '\n';
  }
}

std::vector<ColoredCube> read_tiling(std::istream& is, Lattice& lat_out) {
  Window w;
  DilationParam d;
  if (!(is >> w.n >> w.M >> w.d_max >> d.k0))
    throw std::runtime_error("bad tiling header");
  lat_out = Lattice(w, d);
  std::vector<ColoredCube> out;
  int k;
  while (is >> k) {
    ColoredCube cc;
    cc.cube.k = k;
    cc.cube.m.resize(lat_out.n);
    for (int i = 0; i < lat_out.n; ++i)
      if (!(is >> cc.cube.m[i])) throw std::runtime_error("bad tiling record");
    std::string color;
    if (!(is >> color)) throw std::runtime_error("bad tiling record");
    if (color != "blue" && color != "yellow")
      throw std::runtime_error("bad tiling color: " + color);
    cc.color = color == "blue" ? CubeColor::blue : CubeColor::yellow;
    out.push_back(std::move(cc));
  }
  return out;
}

}  // namespace tracelab
