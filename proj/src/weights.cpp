#include "tracelab/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tracelab {

static i64 imod(i64 v, i64 m) {
  i64 r = v % m;
  return r < 0 ? r + m : r;
}

// --- construction ---------------------------------------------------------

static void check_spatial(const Weight& w) {
  if (w.cells_per_unit < 1 || (w.cells_per_unit & (w.cells_per_unit - 1)))
    throw std::invalid_argument("cells_per_unit must be a power of two");
  i64 want = 1;
  const i64 cpa = i64(w.period) * w.cells_per_unit;
  for (int i = 0; i < w.n; ++i) want *= cpa;
  if (!w.spatial.empty() && i64(w.spatial.size()) != want)
    throw std::invalid_argument("spatial table size mismatch");
  for (double v : w.spatial)
    if (!(v > 0)) throw std::invalid_argument("spatial table must be positive");
}

Weight Weight::constant(int n, double c) {
  Weight w;
  w.kind = Kind::constant;
  w.n = n;
  w.c = c;
  w.declared_C_gamma = 1.0;
  return w;
}

Weight Weight::power_t(int n, double alpha, double c) {
  if (!(alpha >= 0 && alpha < 1)) throw std::invalid_argument("alpha outside [0,1)");
  Weight w;
  w.kind = Kind::power_t;
  w.n = n;
  w.alpha = alpha;
  w.c = c;
  w.declared_C_gamma = 1.0 / (1.0 - alpha);
  return w;
}

Weight Weight::step_power(int n, std::vector<double> coeffs, int cells_per_unit,
                          int period, double alpha, double c) {
  if (!(alpha >= 0 && alpha < 1)) throw std::invalid_argument("alpha outside [0,1)");
  Weight w;
  w.kind = Kind::step_power;
  w.n = n;
  w.alpha = alpha;
  w.c = c;
  w.spatial = std::move(coeffs);
  w.cells_per_unit = cells_per_unit;
  w.period = period;
  check_spatial(w);
  const auto [mn, mx] = std::minmax_element(w.spatial.begin(), w.spatial.end());
  w.declared_C_gamma = (*mx / *mn) / (1.0 - alpha);
  return w;
}

Weight Weight::piecewise_cells(int n, std::vector<double> coeffs, int period) {
  Weight w;
  w.kind = Kind::piecewise_cells;
  w.n = n;
  w.spatial = std::move(coeffs);
  w.cells_per_unit = 1;
  w.period = period;
  check_spatial(w);
  const auto [mn, mx] = std::minmax_element(w.spatial.begin(), w.spatial.end());
  w.declared_C_gamma = *mx / *mn;
  return w;
}

Weight Weight::generic(int n,
                       std::function<double(const std::vector<double>&, double)> fn,
                       std::optional<double> declared) {
  Weight w;
  w.kind = Kind::generic;
  w.n = n;
  w.fn = std::move(fn);
  w.has_exact_box_integral = false;
  w.has_exact_essinf = false;
  w.declared_C_gamma = declared;
  return w;
}

double Weight::operator()(const std::vector<double>& x, double t) const {
  if (kind == Kind::generic) return fn(x, t);
  double v = c * (alpha == 0.0 ? 1.0 : std::pow(t, -alpha));
  if (!spatial.empty()) {
    const i64 cpa = i64(period) * cells_per_unit;
    i64 idx = 0;
    for (int i = 0; i < n; ++i)
      idx = idx * cpa + imod(i64(std::floor(x[std::size_t(i)] * cells_per_unit)), cpa);
    v *= spatial[std::size_t(idx)];
  }
  return v;
}

// --- exact paths ------------------------------------------------------------

// Integral of c*t^{-alpha} over (a,b), alpha in [0,1).
static double time_integral(const Weight& w, double a, double b) {
  const double e = 1.0 - w.alpha;
  return w.c * (std::pow(b, e) - std::pow(a, e)) / e;
}

// Per-axis overlap (lattice units, counted with multiplicity for boxes longer
// than the weight period) between the box and each spatial grid cell class.
static std::vector<std::vector<i64>> axis_overlaps(const Lattice& lat, const Weight& w,
                                                   const Box& b) {
  const i64 cpa = i64(w.period) * w.cells_per_unit;
  const i64 pu = lat.S / w.cells_per_unit;
  const i64 PS = i64(w.period) * lat.S;
  std::vector<std::vector<i64>> out(std::size_t(lat.n));
  for (int i = 0; i < lat.n; ++i) {
    auto& o = out[std::size_t(i)];
    o.assign(std::size_t(cpa), 0);
    const i64 full = b.len[i] / PS, rem = b.len[i] % PS;
    const i64 a = imod(b.lo[i], PS);
    for (i64 c2 = 0; c2 < cpa; ++c2) {
      i64 v = full * pu;
      for (i64 j = -1; j <= 1; ++j) {
        const i64 lo = std::max(a, c2 * pu + j * PS);
        const i64 hi = std::min(a + rem, (c2 + 1) * pu + j * PS);
        if (hi > lo) v += hi - lo;
      }
      o[std::size_t(c2)] = v;
    }
  }
  return out;
}

// Spatial integral in length^n units over the (possibly wrapping) box.
static double exact_spatial_integral(const Lattice& lat, const Weight& w, const Box& b) {
  if (w.spatial.empty()) {
    double v = 1.0;
    for (int i = 0; i < lat.n; ++i) v *= double(b.len[i]) / double(lat.S);
    return v;
  }
  const auto ov = axis_overlaps(lat, w, b);
  const i64 cpa = i64(w.period) * w.cells_per_unit;
  double total = 0.0;
  std::vector<i64> idx(std::size_t(lat.n), 0);
  for (;;) {
    double f = 1.0;
    i64 lin = 0;
    for (int i = 0; i < lat.n; ++i) {
      f *= double(ov[std::size_t(i)][std::size_t(idx[std::size_t(i)])]) / double(lat.S);
      lin = lin * cpa + idx[std::size_t(i)];
    }
    total += f * w.spatial[std::size_t(lin)];
    int ax = lat.n - 1;
    while (ax >= 0 && ++idx[std::size_t(ax)] == cpa) idx[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }
  return total;
}

static double exact_spatial_min(const Lattice& lat, const Weight& w, const Box& b) {
  if (w.spatial.empty()) return 1.0;
  const auto ov = axis_overlaps(lat, w, b);
  const i64 cpa = i64(w.period) * w.cells_per_unit;
  double best = std::numeric_limits<double>::infinity();
  std::vector<i64> idx(std::size_t(lat.n), 0);
  for (;;) {
    bool touch = true;
    i64 lin = 0;
    for (int i = 0; i < lat.n; ++i) {
      touch = touch && ov[std::size_t(i)][std::size_t(idx[std::size_t(i)])] > 0;
      lin = lin * cpa + idx[std::size_t(i)];
    }
    if (touch) best = std::min(best, w.spatial[std::size_t(lin)]);
    int ax = lat.n - 1;
    while (ax >= 0 && ++idx[std::size_t(ax)] == cpa) idx[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }
  return best;
}

// --- adaptive quadrature ------------------------------------------------------

namespace {
constexpr double kG8x[4] = {0.1834346424956498, 0.5255324099163290,
                            0.7966664774136267, 0.9602898564975363};
constexpr double kG8w[4] = {0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss8(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    s += kG8w[i] * (f(c - h * kG8x[i]) + f(c + h * kG8x[i]));
  return s * h;
}

template <class F>
double adapt_rec(const F& f, double a, double b, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double l = gauss8(f, a, m), r = gauss8(f, m, b);
  if (std::fabs(l + r - whole) <= eps || depth == 0) return l + r;
  return adapt_rec(f, a, m, l, 0.5 * eps, depth - 1) +
         adapt_rec(f, m, b, r, 0.5 * eps, depth - 1);
}

template <class F>
double adapt(const F& f, double a, double b, double rel) {
  const double whole = gauss8(f, a, b);
  const double eps = rel * std::max(std::fabs(whole), 1e-300);
  return adapt_rec(f, a, b, whole, eps, 36);
}
}  // namespace

// Integral of w(.,t) over the box in unwrapped coordinates (length^n).
// Piecewise-constant spatial factors jump at cell boundaries, so the axis
// integral is split there; adaptive refinement alone can miss a narrow cell
// whose nodes never land inside it.
static double quad_spatial(const Lattice& lat, const Weight& w, const Box& b, double t,
                           double rel) {
  std::vector<double> x(std::size_t(w.n), 0.0);
  auto rec = [&](auto&& self, int axis) -> double {
    if (axis == lat.n) return w(x, t);
    const double lo = double(b.lo[axis]) / double(lat.S);
    const double hi = lo + double(b.len[axis]) / double(lat.S);
    auto panel = [&](double a, double c) {
      return adapt(
          [&](double v) {
            x[std::size_t(axis)] = v;
            return self(self, axis + 1);
          },
          a, c, rel);
    };
    if (w.spatial.empty()) return panel(lo, hi);
    const double pitch = 1.0 / w.cells_per_unit;
    double acc = 0.0, a = lo;
    for (double cut = (std::floor(lo / pitch) + 1.0) * pitch; cut < hi;
         cut += pitch) {
      if (cut > a) acc += panel(a, cut);
      a = cut;
    }
    return acc + panel(a, hi);
  };
  return rec(rec, 0);
}

static double quad_box_integral(const Lattice& lat, const Weight& w, const Box& b,
                                double t0, double t1, double rel) {
  auto band = [&](double a, double c) {
    return adapt([&](double t) { return quad_spatial(lat, w, b, t, rel); }, a, c, rel);
  };
  if (t0 > 0) return band(t0, t1);
  // integrable singularity allowed at t=0: geometric bands
  double acc = 0.0, hi = t1;
  for (int j = 0; j < 60; ++j) {
    const double lo = 0.5 * hi;
    const double term = band(lo, hi);
    acc += term;
    if (std::fabs(term) < 1e-12 * std::fabs(acc) && j > 2) break;
    hi = lo;
  }
  return acc;
}

static double box_volume_len(const Lattice& lat, const Box& b, double t0, double t1) {
  double v = t1 - t0;
  for (int i = 0; i < lat.n; ++i) v *= double(b.len[i]) / double(lat.S);
  return v;
}

double box_average(const Lattice& lat, const Weight& w, const Box& space, double t0,
                   double t1) {
  if (w.has_exact_box_integral) {
    return exact_spatial_integral(lat, w, space) * time_integral(w, t0, t1) /
           box_volume_len(lat, space, t0, t1);
  }
  return box_average_quadrature(lat, w, space, t0, t1);
}

double box_average_quadrature(const Lattice& lat, const Weight& w, const Box& space,
                              double t0, double t1) {
  const double v = quad_box_integral(lat, w, space, t0, t1, 1e-9);
  if (!std::isfinite(v)) throw std::runtime_error("quadrature failure: non-finite integral");
  return v / box_volume_len(lat, space, t0, t1);
}

EssInf essinf_estimate(const Lattice& lat, const Weight& w, const Box& space, double t0,
                       double t1) {
  if (w.has_exact_essinf) {
    // built-ins decrease in t, so the infimum sits at t = t1
    const double tf = w.c * (w.alpha == 0.0 ? 1.0 : std::pow(t1, -w.alpha));
    return {exact_spatial_min(lat, w, space) * tf, true};
  }
  // refined grid minimum; not a certified lower bound
  double prev = std::numeric_limits<double>::infinity();
  for (int L = 1; L <= 8; ++L) {
    const i64 g = i64(1) << L;
    double best = std::numeric_limits<double>::infinity();
    std::vector<i64> idx(std::size_t(lat.n) + 1, 0);
    std::vector<double> x(std::size_t(lat.n));
    for (;;) {
      for (int i = 0; i < lat.n; ++i)
        x[std::size_t(i)] = (double(space.lo[i]) +
                             double(space.len[i]) * (double(idx[std::size_t(i)]) + 0.5) /
                                 double(g)) /
                            double(lat.S);
      const double t =
          t0 + (t1 - t0) * (double(idx[std::size_t(lat.n)]) + 0.5) / double(g);
      best = std::min(best, w(x, t));
      int ax = lat.n;
      while (ax >= 0 && ++idx[std::size_t(ax)] == g) idx[std::size_t(ax--)] = 0;
      if (ax < 0) break;
    }
    if (L >= 3 && std::fabs(best - prev) <= 1e-3 * std::fabs(best)) return {best, false};
    prev = best;
  }
  return {prev, false};
}

// --- A1-type constants ----------------------------------------------------------

static double empirical_c_gamma(const Lattice& lat, const Weight& w, int depth) {
  double worst = 1.0;
  for (int k = 0; k <= depth; ++k) {
    const double side = std::ldexp(1.0, -k);
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(k);
    const i64 tslots = i64(Window::T) << k;
    for (i64 lin = 0; lin < cells; ++lin) {
      const Box b = cube_box(lat, cube_from_linear(lat, k, lin));
      for (i64 j = 0; j < tslots; ++j) {
        const double t0 = double(j) * side, t1 = double(j + 1) * side;
        const double avg = box_average(lat, w, b, t0, t1);
        const double ess = essinf_estimate(lat, w, b, t0, t1).value;
        worst = std::max(worst, avg / ess);
      }
    }
  }
  return worst;
}

double a1loc_constant(const Lattice& lat, const Weight& w, int depth) {
  const double worst = empirical_c_gamma(lat, w, depth);
  if (w.declared_C_gamma && worst > *w.declared_C_gamma * (1.0 + 1e-9))
    throw std::runtime_error("weight misdeclaration: empirical A1 constant " +
                             std::to_string(worst) + " exceeds declared " +
                             std::to_string(*w.declared_C_gamma));
  return worst;
}

// --- scale tables -----------------------------------------------------------------

double WeightScales::gamma_integral(const Lattice& lat, int k, i64 lin) const {
  return std::ldexp(hat_gamma(k, lin), -k * (lat.n + 1));
}

double WeightScales::gamma3(const Lattice& lat, int k, i64 lin, int l) const {
  return std::ldexp(hat_gamma(k, lin), k * (l - lat.n - 1));
}

WeightScales populate_scales(const Lattice& lat, const Weight& w, int depth,
                             bool parallel) {
  if (depth > lat.d_max) throw std::invalid_argument("depth exceeds d_max");
  WeightScales sc;
  sc.depth = depth;
  sc.hat.resize(std::size_t(depth) + 1);
  for (int k = 0; k <= depth; ++k) {
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(k);
    auto& row = sc.hat[std::size_t(k)];
    row.resize(std::size_t(cells));
    const double side = std::ldexp(1.0, -k);
    if (parallel) {
#pragma omp parallel for schedule(static)
      for (i64 lin = 0; lin < cells; ++lin)
        row[std::size_t(lin)] =
            box_average(lat, w, cube_box(lat, cube_from_linear(lat, k, lin)), 0.0, side);
    } else {
      for (i64 lin = 0; lin < cells; ++lin)
        row[std::size_t(lin)] =
            box_average(lat, w, cube_box(lat, cube_from_linear(lat, k, lin)), 0.0, side);
    }
    for (double v : row)
      if (!(v > 0)) throw std::runtime_error("nonpositive scale entry");
  }
  return sc;
}

QParams q_parameters(const Lattice& lat, const Weight& w, const WeightScales& scales) {
  const double cg = w.declared_C_gamma ? *w.declared_C_gamma
                                       : empirical_c_gamma(lat, w, scales.depth);
  double qt = 1.0;
  for (int k = 0; k <= scales.depth; ++k) {
    const i64 cpa = lat.cells_per_axis(k);
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= cpa;
    const double side = std::ldexp(1.0, -k);
    for (i64 lin = 0; lin < cells; ++lin) {
      const DyadicCube q = cube_from_linear(lat, k, lin);
      const double avg8 = box_average(lat, w, dilate_int(lat, q, 8), 0.0, side);
      // level-k cubes inside 8Q: index offsets -3..3 per axis
      double hmin = std::numeric_limits<double>::infinity();
      std::vector<i64> off(std::size_t(lat.n), -3);
      for (;;) {
        DyadicCube q2{k, q.m};
        for (int i = 0; i < lat.n; ++i) q2.m[std::size_t(i)] += off[std::size_t(i)];
        reduce_index(lat, q2);
        hmin = std::min(hmin, scales.hat_gamma(k, linear_index(lat, q2)));
        int ax = lat.n - 1;
        while (ax >= 0 && ++off[std::size_t(ax)] == 4) off[std::size_t(ax--)] = -3;
        if (ax < 0) break;
      }
      qt = std::max(qt, avg8 / hmin);
    }
  }
  const double q = 16.0 * qt * cg * std::ldexp(1.0, lat.n + 1);
  return {qt, q};
}

A1Report verify_a1_inequalities(const Lattice& lat, const Weight& w, int depth) {
  const double cg =
      w.declared_C_gamma ? *w.declared_C_gamma : empirical_c_gamma(lat, w, depth);
  const double two_np1 = std::ldexp(1.0, lat.n + 1);
  const auto scales = populate_scales(lat, w, depth);
  const double q = q_parameters(lat, w, scales).q;

  IneqCheck halving{"halving (2.2)", true, 0.0};
  IneqCheck adjacency{"adjacency (2.3)", true, 0.0};
  IneqCheck dil_essinf{"dilation vs essinf (2.4)", true, 0.0};
  IneqCheck dil_integral{"dilation integral (2.5)", true, 0.0};
  IneqCheck eqq{"scale adjacency (eq.q)", true, 0.0};
  IneqCheck eqqp{"scale succession (eq.q')", true, 0.0};

  for (int k = 0; k <= depth; ++k) {
    const double side = std::ldexp(1.0, -k);
    const i64 cpa = lat.cells_per_axis(k);
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= cpa;
    const i64 tslots = i64(Window::T) << k;
    for (i64 lin = 0; lin < cells; ++lin) {
      const DyadicCube cq = cube_from_linear(lat, k, lin);
      const Box b = cube_box(lat, cq);
      for (i64 j = 0; j < tslots; ++j) {
        const double t0 = double(j) * side, t1 = double(j + 1) * side;
        const double avg = box_average(lat, w, b, t0, t1);

        if (k < depth) {
          // halving: parent average vs each child average, constant 2^{n+1}C
          const double h = 0.5 * side;
          for (const auto& ch : children_of(lat, cq)) {
            const Box cb = cube_box(lat, ch);
            for (int jt = 0; jt < 2; ++jt) {
              const double ca =
                  box_average(lat, w, cb, t0 + jt * h, t0 + (jt + 1) * h);
              halving.worst_ratio = std::max(halving.worst_ratio, avg / (cg * ca));
            }
          }
        }

        if (k >= 1) {
          // touching same-level cubes, constant 2^{n+1}C (equal volumes)
          std::vector<i64> off(std::size_t(lat.n) + 1, -1);
          for (;;) {
            const i64 j2 = j + off[std::size_t(lat.n)];
            bool self = off[std::size_t(lat.n)] == 0;
            if (j2 >= 0 && j2 < tslots) {
              DyadicCube q2{k, cq.m};
              for (int i = 0; i < lat.n; ++i) {
                q2.m[std::size_t(i)] += off[std::size_t(i)];
                self = self && off[std::size_t(i)] == 0;
              }
              if (!self) {
                reduce_index(lat, q2);
                const double a2 = box_average(lat, w, cube_box(lat, q2),
                                              double(j2) * side, double(j2 + 1) * side);
                adjacency.worst_ratio =
                    std::max(adjacency.worst_ratio, avg / (two_np1 * cg * a2));
              }
            }
            int ax = lat.n;
            while (ax >= 0 && ++off[std::size_t(ax)] == 2) off[std::size_t(ax--)] = -1;
            if (ax < 0) break;
          }
        }

        // dilation checks on 2Q when it stays inside t in (0,T]
        if (k >= 1 && j >= 1 && double(j + 1) * side + 0.5 * side <= double(Window::T)) {
          const Box b2 = dilate_int(lat, cq, 2);
          const double s0 = t0 - 0.5 * side, s1 = t1 + 0.5 * side;
          const double avg2 = box_average(lat, w, b2, s0, s1);
          const double ess2 = essinf_estimate(lat, w, b2, s0, s1).value;
          const double c24 =
              std::pow(1.5, lat.n + 1) * cg * (two_np1 * cg) * (two_np1 * cg);
          dil_essinf.worst_ratio =
              std::max(dil_essinf.worst_ratio, avg2 / (c24 * ess2));
          // integrals: |2Q| = 2^{n+1}|Q|
          const double c25 = std::pow(3.0, lat.n + 1) * cg;
          dil_integral.worst_ratio =
              std::max(dil_integral.worst_ratio, avg2 / (c25 * avg));
        }
      }

      // scale comparisons
      const double hg = scales.hat_gamma(k, lin);
      std::vector<i64> off(std::size_t(lat.n), -1);
      for (;;) {
        bool self = true;
        DyadicCube q2{k, cq.m};
        for (int i = 0; i < lat.n; ++i) {
          q2.m[std::size_t(i)] += off[std::size_t(i)];
          self = self && off[std::size_t(i)] == 0;
        }
        if (!self) {
          reduce_index(lat, q2);
          const double h2 = scales.hat_gamma(k, linear_index(lat, q2));
          eqq.worst_ratio = std::max(eqq.worst_ratio, hg / (0.5 * q * h2));
        }
        int ax = lat.n - 1;
        while (ax >= 0 && ++off[std::size_t(ax)] == 2) off[std::size_t(ax--)] = -1;
        if (ax < 0) break;
      }
      if (k < depth) {
        for (const auto& ch : children_of(lat, cq)) {
          const double hc = scales.hat_gamma(k + 1, linear_index(lat, ch));
          eqqp.worst_ratio = std::max(eqqp.worst_ratio, hg / (0.5 * q * hc));
          eqqp.worst_ratio = std::max(eqqp.worst_ratio, hc / (0.5 * q * hg));
        }
      }
    }
  }

  A1Report rep;
  rep.ok = true;
  for (auto* c : {&halving, &adjacency, &dil_essinf, &dil_integral, &eqq, &eqqp}) {
    c->pass = c->worst_ratio <= 1.0 + 1e-9;
    rep.ok = rep.ok && c->pass;
    rep.checks.push_back(*c);
  }
  return rep;
}

}  // namespace tracelab
