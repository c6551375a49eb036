#include "tracelab/tilings.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace tracelab {

namespace {

i64 floor_div(i64 a, i64 b) {
  i64 q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

i64 imod(i64 a, i64 b) {
  i64 r = a % b;
  return r < 0 ? r + b : r;
}

// largest power of two dividing x (x > 0)
i64 pow2_divisor(i64 x) { return x & -x; }

// cubes of one level present in a stage, with O(1) membership
struct LevelSet {
  int k = 0;
  i64 cpa = 0;
  std::vector<char> present;
  std::vector<i64> lin;  // the present linear indices, construction order
};

struct StageIndex {
  std::vector<LevelSet> levels;  // ascending k
  const LevelSet* find(int k) const {
    for (const auto& L : levels)
      if (L.k == k) return &L;
    return nullptr;
  }
};

StageIndex index_stage(const Lattice& lat, const std::vector<ColoredCube>& stage) {
  StageIndex si;
  for (const auto& cc : stage) {
    LevelSet* L = nullptr;
    for (auto& cand : si.levels)
      if (cand.k == cc.cube.k) L = &cand;
    if (!L) {
      LevelSet ns;
      ns.k = cc.cube.k;
      ns.cpa = lat.cells_per_axis(cc.cube.k);
      i64 cells = 1;
      for (int i = 0; i < lat.n; ++i) cells *= ns.cpa;
      ns.present.assign(std::size_t(cells), 0);
      si.levels.push_back(std::move(ns));
      L = &si.levels.back();
    }
    const i64 li = linear_index(lat, cc.cube);
    if (!L->present[std::size_t(li)]) {
      L->present[std::size_t(li)] = 1;
      L->lin.push_back(li);
    }
  }
  std::sort(si.levels.begin(), si.levels.end(),
            [](const LevelSet& a, const LevelSet& b) { return a.k < b.k; });
  return si;
}

// level-k2 cubes whose dilation can meet the box A, by corner index ranges
void candidate_cubes(const Lattice& lat, const Box& A, int k2,
                     std::vector<DyadicCube>& out) {
  out.clear();
  const i64 side2 = lat.side_units(k2);
  const i64 margin = side2 >> (lat.k0 + 1);
  const i64 cpa = lat.cells_per_axis(k2);
  std::vector<i64> first(std::size_t(lat.n), 0), count(std::size_t(lat.n), 0);
  for (int i = 0; i < lat.n; ++i) {
    const i64 lo = A.lo[std::size_t(i)] - margin;
    const i64 hi = A.lo[std::size_t(i)] + A.len[std::size_t(i)] + margin;
    first[std::size_t(i)] = floor_div(lo, side2);
    count[std::size_t(i)] = std::min(cpa, floor_div(hi - 1, side2) -
                                              first[std::size_t(i)] + 1);
  }
  DyadicCube q;
  q.k = k2;
  q.m.assign(std::size_t(lat.n), 0);
  std::vector<i64> it(std::size_t(lat.n), 0);
  while (true) {
    for (int i = 0; i < lat.n; ++i)
      q.m[std::size_t(i)] = imod(first[std::size_t(i)] + it[std::size_t(i)], cpa);
    out.push_back(q);
    int ax = lat.n - 1;
    while (ax >= 0 && ++it[std::size_t(ax)] == count[std::size_t(ax)])
      it[std::size_t(ax)] = 0, --ax;
    if (ax < 0) break;
  }
}

double slab_norm(const Lattice& lat, const HalfSpaceFunction& f, const Weight& w,
                 int level) {
  Box win;
  win.lo.assign(std::size_t(lat.n), 0);
  win.len.assign(std::size_t(lat.n), lat.W);
  return weighted_sobolev_norm(lat, f, w, win, 0.0, std::ldexp(1.0, -level), 1)
      .value;
}

}  // namespace

LevelSchedule build_lj_sequence(const Lattice& lat, const HalfSpaceFunction& f,
                                const Weight& w, int max_stages) {
  LevelSchedule sched;
  sched.l.push_back(0);
  double prev = slab_norm(lat, f, w, 0);
  const double zero_tol = 1e-14 * std::max(1.0, prev);
  while (int(sched.l.size()) < max_stages) {
    const int lp = sched.l.back();
    if (lp >= lat.d_max) {
      sched.truncated = true;
      break;
    }
    if (prev <= zero_tol) {
      sched.l.push_back(lp + 1);
      prev = 0.0;
      continue;
    }
    int chosen = -1;
    double nl = 0.0;
    for (int l = lp + 1; l <= lat.d_max; ++l) {
      nl = slab_norm(lat, f, w, l);
      if (nl <= 0.5 * prev) {
        chosen = l;
        break;
      }
    }
    if (chosen < 0) {
      sched.truncated = true;
      break;
    }
    sched.l.push_back(chosen);
    prev = nl;
  }
  return sched;
}

std::vector<std::size_t> select_cover(const Lattice& lat,
                                      const std::vector<ColoredCube>& tiling) {
  const std::size_t N = tiling.size();
  std::vector<Box> dil(N);
  for (std::size_t i = 0; i < N; ++i) dil[i] = dilate(lat, tiling[i].cube);

  // canonical visiting order: level ascending, then lexicographic corner
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const DyadicCube &qa = tiling[a].cube, &qb = tiling[b].cube;
    if (qa.k != qb.k) return qa.k < qb.k;
    return linear_index(lat, qa) < linear_index(lat, qb);
  });

  std::vector<char> alive(N, 1);
  std::vector<Box> others;
  for (std::size_t pos : order) {
    others.clear();
    for (std::size_t j = 0; j < N; ++j) {
      if (j == pos || !alive[j]) continue;
      if (intersection_measure(lat, dil[pos], dil[j]) > 0) others.push_back(dil[j]);
    }
    if (!others.empty() && covered_by_union(lat, dil[pos], others)) alive[pos] = 0;
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < N; ++i)
    if (alive[i]) keep.push_back(i);
  return keep;
}

std::pair<int, int> overlap_range(const Lattice& lat, const std::vector<Box>& boxes) {
  // common corner granularity
  i64 G = pow2_divisor(lat.W);
  for (const auto& b : boxes)
    for (int i = 0; i < lat.n; ++i) {
      if (b.lo[std::size_t(i)] != 0)
        G = std::min(G, pow2_divisor(b.lo[std::size_t(i)]));
      const i64 hi = b.lo[std::size_t(i)] + std::min(b.len[std::size_t(i)], lat.W);
      if (hi != 0) G = std::min(G, pow2_divisor(hi));
    }
  const i64 P = 2 * lat.W / G;  // sample points per axis, pitch G/2
  i64 cells = 1;
  for (int i = 0; i < lat.n; ++i) cells *= P;
  std::vector<int> acc(std::size_t(cells), 0);

  std::vector<std::vector<i64>> idx(std::size_t(lat.n));
  for (const auto& b : boxes) {
    bool empty = false;
    for (int i = 0; i < lat.n; ++i) {
      auto& ids = idx[std::size_t(i)];
      ids.clear();
      if (b.len[std::size_t(i)] > lat.W) {
        for (i64 j = 0; j < P; ++j) ids.push_back(j);
      } else {
        // strict interior of (2lo, 2lo+2len) on the doubled torus
        const i64 a = 2 * b.lo[std::size_t(i)] / G + 1;
        const i64 e = (2 * (b.lo[std::size_t(i)] + b.len[std::size_t(i)])) / G - 1;
        for (i64 j = a; j <= e; ++j) ids.push_back(imod(j, P));
      }
      if (ids.empty()) empty = true;
    }
    if (empty) continue;
    std::vector<std::size_t> it(std::size_t(lat.n), 0);
    while (true) {
      i64 flat = 0;
      for (int i = 0; i < lat.n; ++i)
        flat = flat * P + idx[std::size_t(i)][it[std::size_t(i)]];
      ++acc[std::size_t(flat)];
      int ax = lat.n - 1;
      while (ax >= 0 && ++it[std::size_t(ax)] == idx[std::size_t(ax)].size())
        it[std::size_t(ax)] = 0, --ax;
      if (ax < 0) break;
    }
  }
  auto [mn, mx] = std::minmax_element(acc.begin(), acc.end());
  return {*mn, *mx};
}

TilingSystem build_admissible_system(const Lattice& lat, const WeightScales& scales,
                                     const LevelSchedule& schedule, double q, int r) {
  if (schedule.l.empty() || schedule.l.front() != 0)
    throw std::invalid_argument("schedule must start at level 0");
  if (schedule.l.back() > scales.depth)
    throw std::invalid_argument("scale table shallower than schedule");
  if (q <= 1.0) throw std::invalid_argument("q must exceed 1");
  if (r < 1) throw std::invalid_argument("r must be positive");

  TilingSystem sys;
  sys.schedule = schedule;
  sys.r = r;
  sys.q = q;
  sys.c1 = q * q * q;
  sys.c2 = std::pow(q, r);
  sys.truncated = schedule.truncated;

  const double lq = std::log(q);
  auto hat = [&](const DyadicCube& c) {
    return scales.hat_gamma(c.k, linear_index(lat, c));
  };

  // step 0: the full level-l_0 grid, yellow
  std::vector<ColoredCube> cur;
  {
    const i64 cpa = lat.cells_per_axis(schedule.l[0]);
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= cpa;
    for (i64 li = 0; li < cells; ++li)
      cur.push_back({cube_from_linear(lat, schedule.l[0], li), CubeColor::yellow});
  }
  sys.raw.push_back(cur);

  for (std::size_t s = 1; s < schedule.l.size(); ++s) {
    const int target = schedule.l[s];
    std::vector<ColoredCube> next;
    for (const auto& cc : cur) {
      if (cc.cube.k >= target) {  // cannot happen for strictly increasing l_j
        next.push_back(cc);
        continue;
      }
      const int j = int(std::floor(std::log(hat(cc.cube)) / lq + 1e-12));
      const double thr = std::pow(q, j + 1);
      // depth-first refinement, children in canonical order
      std::vector<DyadicCube> work{cc.cube};
      while (!work.empty()) {
        DyadicCube c = work.back();
        work.pop_back();
        auto kids = children_of(lat, c);
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
          const double hc = hat(*it);
          if (hc > thr * (1 + 1e-12))
            next.push_back({*it, CubeColor::blue});  // frozen for this step
          else if (it->k < target)
            work.push_back(*it);
          else
            next.push_back({*it, CubeColor::yellow});
        }
      }
    }
    cur = std::move(next);
    sys.raw.push_back(cur);
  }

  for (std::size_t s = 0; s * std::size_t(r) < sys.raw.size(); ++s) {
    sys.stages.push_back(sys.raw[s * std::size_t(r)]);
    sys.stage_level.push_back(schedule.l[s * std::size_t(r)]);
    sys.selected.push_back(select_cover(lat, sys.stages.back()));
  }
  return sys;
}

AdmissReport check_admissible(const Lattice& lat, const WeightScales& scales,
                              const TilingSystem& sys, double c1, double c2) {
  AdmissReport rep;
  const std::size_t S = sys.stages.size();
  std::vector<StageIndex> idx(S);
  for (std::size_t s = 0; s < S; ++s) idx[s] = index_stage(lat, sys.stages[s]);

  AdmissCondition comparable{"same-stage dilated neighbours comparable", 0.0, c1, true};
  AdmissCondition nested{"stage-to-stage containment comparable", 0.0, c2, true};
  AdmissCondition halving{"dilated successor sides halve", 0.0, 0.5, true};
  AdmissCondition floor_ok{"stage sides respect the level floor", 0.0, 1.0, true};

  std::vector<DyadicCube> cand;
  for (std::size_t s = 0; s < S; ++s) {
    const auto& stage = sys.stages[s];
    const std::ptrdiff_t N = std::ptrdiff_t(stage.size());
    double w1 = 0.0, w3 = 0.0, w4 = 0.0;
#pragma omp parallel for reduction(max : w1, w3, w4) firstprivate(cand)
    for (std::ptrdiff_t i = 0; i < N; ++i) {
      const DyadicCube& a = stage[std::size_t(i)].cube;
      const Box da = dilate(lat, a);
      const double ha = scales.hat_gamma(a.k, linear_index(lat, a));
      // (1) comparability across intersecting same-stage dilations
      for (const auto& L : idx[s].levels) {
        candidate_cubes(lat, da, L.k, cand);
        for (const auto& b : cand) {
          if (!L.present[std::size_t(linear_index(lat, b))]) continue;
          if (b.k == a.k && b.m == a.m) continue;
          if (intersection_measure(lat, da, dilate(lat, b)) <= 0) continue;
          w1 = std::max(w1, ha / scales.hat_gamma(b.k, linear_index(lat, b)));
        }
      }
      // (3) any next-stage dilation meeting this one has at most half the side
      if (s + 1 < S)
        for (const auto& L : idx[s + 1].levels) {
          candidate_cubes(lat, da, L.k, cand);
          for (const auto& b : cand) {
            if (!L.present[std::size_t(linear_index(lat, b))]) continue;
            if (intersection_measure(lat, da, dilate(lat, b)) <= 0) continue;
            w3 = std::max(w3, double(lat.side_units(b.k)) / double(lat.side_units(a.k)));
          }
        }
      // (4) sides no finer than the admitted stage level
      w4 = std::max(w4, std::ldexp(1.0, a.k - sys.stage_level[s]));
    }
    comparable.worst = std::max(comparable.worst, w1);
    halving.worst = std::max(halving.worst, w3);
    floor_ok.worst = std::max(floor_ok.worst, w4);

    // (2) both hat ratios along successor-in-predecessor containment
    if (s + 1 < S) {
      double w2 = 0.0;
      const auto& fine = sys.stages[s + 1];
      const std::ptrdiff_t NF = std::ptrdiff_t(fine.size());
#pragma omp parallel for reduction(max : w2)
      for (std::ptrdiff_t i = 0; i < NF; ++i) {
        const DyadicCube& b = fine[std::size_t(i)].cube;
        const double hb = scales.hat_gamma(b.k, linear_index(lat, b));
        for (const auto& L : idx[s].levels) {
          if (L.k > b.k) continue;
          DyadicCube anc;
          anc.k = L.k;
          anc.m.resize(std::size_t(lat.n));
          for (int d = 0; d < lat.n; ++d)
            anc.m[std::size_t(d)] = b.m[std::size_t(d)] >> (b.k - L.k);
          if (!L.present[std::size_t(linear_index(lat, anc))]) continue;
          const double hanc = scales.hat_gamma(anc.k, linear_index(lat, anc));
          w2 = std::max(w2, std::max(hb / hanc, hanc / hb));
        }
      }
      nested.worst = std::max(nested.worst, w2);
    }
  }

  const double tol = 1 + 1e-12;
  comparable.pass = comparable.worst <= c1 * tol;
  nested.pass = nested.worst <= c2 * tol;
  halving.pass = halving.worst <= 0.5 * tol;
  floor_ok.pass = floor_ok.worst <= 1.0 * tol;
  rep.conds = {comparable, nested, halving, floor_ok};
  rep.ok = comparable.pass && nested.pass && halving.pass && floor_ok.pass;
  return rep;
}

bool is_succession(const Lattice& lat, const std::vector<ColoredCube>& later,
                   const std::vector<ColoredCube>& earlier) {
  StageIndex ei = index_stage(lat, earlier);
  for (const auto& cc : later) {
    bool found = false;
    for (const auto& L : ei.levels) {
      if (L.k > cc.cube.k) continue;
      DyadicCube anc;
      anc.k = L.k;
      anc.m.resize(std::size_t(lat.n));
      for (int d = 0; d < lat.n; ++d)
        anc.m[std::size_t(d)] = cc.cube.m[std::size_t(d)] >> (cc.cube.k - L.k);
      if (L.present[std::size_t(linear_index(lat, anc))]) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace tracelab
