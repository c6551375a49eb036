#include "tracelab/grid_function.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tracelab {

static i64 imod(i64 v, i64 m) {
  i64 r = v % m;
  return r < 0 ? r + m : r;
}

// --- GridFunction -----------------------------------------------------------

i64 GridFunction::size() const {
  i64 s = 1;
  for (int i = 0; i < n; ++i) s *= cells_per_axis();
  return s;
}

double& GridFunction::at(const std::vector<i64>& idx) {
  const i64 cpa = cells_per_axis();
  i64 lin = 0;
  for (int i = 0; i < n; ++i) lin = lin * cpa + imod(idx[std::size_t(i)], cpa);
  return v[std::size_t(lin)];
}

double GridFunction::at(const std::vector<i64>& idx) const {
  return const_cast<GridFunction*>(this)->at(idx);
}

GridFunction sample_grid(int n, int M, int d,
                         const std::function<double(const std::vector<double>&)>& fn) {
  GridFunction g;
  g.n = n;
  g.M = M;
  g.d = d;
  g.v.resize(std::size_t(g.size()));
  const i64 cpa = g.cells_per_axis();
  const double pitch = double(M) / double(cpa);
  std::vector<i64> idx(std::size_t(n), 0);
  std::vector<double> x(std::size_t(n), 0);
  for (i64 lin = 0; lin < g.size(); ++lin) {
    for (int i = 0; i < n; ++i) x[std::size_t(i)] = (double(idx[std::size_t(i)]) + 0.5) * pitch;
    g.v[std::size_t(lin)] = fn(x);
    if (!std::isfinite(g.v[std::size_t(lin)])) throw std::runtime_error("non-finite sample");
    int ax = n - 1;
    while (ax >= 0 && ++idx[std::size_t(ax)] == cpa) idx[std::size_t(ax--)] = 0;
  }
  return g;
}

void write_grid_csv(std::ostream& os, const GridFunction& g) {
  os << "n,M,d\n" << g.n << ',' << g.M << ',' << g.d << '\n';
  char buf[40];
  for (double x : g.v) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x);
    os << buf;
  }
}

GridFunction read_grid_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "n,M,d")
    throw std::runtime_error("bad grid csv header");
  if (!std::getline(is, line)) throw std::runtime_error("bad grid csv header");
  GridFunction g;
  char comma;
  std::istringstream hs(line);
  if (!(hs >> g.n >> comma >> g.M >> comma >> g.d))
    throw std::runtime_error("bad grid csv header");
  g.v.reserve(std::size_t(g.size()));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    g.v.push_back(std::stod(line));
  }
  if (i64(g.v.size()) != g.size()) throw std::runtime_error("grid csv size mismatch");
  return g;
}

// --- derivatives ---------------------------------------------------------------

double HalfSpaceFunction::partial(const std::vector<double>& x, double t, int axis) const {
  if (df) return df(x, t, axis);
  if (axis == n) {
    const double h = std::min(fd_h, 0.25 * t);
    return (f(x, t + h) - f(x, t - h)) / (2 * h);
  }
  std::vector<double> xp = x, xm = x;
  xp[std::size_t(axis)] += fd_h;
  xm[std::size_t(axis)] -= fd_h;
  return (f(xp, t) - f(xm, t)) / (2 * fd_h);
}

namespace {

struct StencilPt {
  int off;
  double c;  // coefficient times h^{-order}
};

// central difference stencils per order, coefficients to be scaled by h^-order
const std::vector<StencilPt>& stencil(int order) {
  static const std::vector<StencilPt> s0 = {{0, 1.0}};
  static const std::vector<StencilPt> s1 = {{-1, -0.5}, {1, 0.5}};
  static const std::vector<StencilPt> s2 = {{-1, 1.0}, {0, -2.0}, {1, 1.0}};
  static const std::vector<StencilPt> s3 = {{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}};
  switch (order) {
    case 0: return s0;
    case 1: return s1;
    case 2: return s2;
    default: return s3;
  }
}

// D^alpha f at (x,t) via tensor-product central differences; analytic first
// partials are used when present.
double mixed_derivative(const HalfSpaceFunction& f, const std::vector<double>& x,
                        double t, const std::vector<int>& alpha) {
  const int n = f.n;
  int total = 0, one_axis = -1;
  for (int i = 0; i <= n; ++i) {
    total += alpha[std::size_t(i)];
    if (alpha[std::size_t(i)] == 1) one_axis = i;
  }
  if (total == 0) return f.value(x, t);
  if (total == 1 && f.df) return f.partial(x, t, one_axis);

  std::vector<double> h(std::size_t(n) + 1, f.fd_h);
  // keep the t stencil strictly above 0
  int tmax = 0;
  for (const auto& p : stencil(alpha[std::size_t(n)])) tmax = std::max(tmax, std::abs(p.off));
  if (tmax > 0) h[std::size_t(n)] = std::min(f.fd_h, 0.4 * t / tmax);

  double sum = 0.0;
  std::vector<std::size_t> pos(std::size_t(n) + 1, 0);
  std::vector<double> xx(std::size_t(n), 0);
  for (;;) {
    double coef = 1.0;
    double tt = t;
    for (int i = 0; i <= n; ++i) {
      const auto& st = stencil(alpha[std::size_t(i)]);
      const auto& p = st[pos[std::size_t(i)]];
      coef *= p.c / std::pow(h[std::size_t(i)], alpha[std::size_t(i)]);
      if (i < n)
        xx[std::size_t(i)] = x[std::size_t(i)] + p.off * h[std::size_t(i)];
      else
        tt = t + p.off * h[std::size_t(i)];
    }
    sum += coef * f.value(xx, tt);
    int ax = n;
    while (ax >= 0 && ++pos[std::size_t(ax)] == stencil(alpha[std::size_t(ax)]).size())
      pos[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }
  return sum;
}

constexpr double kG4x[2] = {0.3399810435848563, 0.8611363115940526};
constexpr double kG4w[2] = {0.6521451548625461, 0.3478548451374538};

std::vector<std::vector<int>> multi_indices(int n, int l) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(std::size_t(n) + 1, 0);
  for (;;) {
    int s = 0;
    for (int v : a) s += v;
    if (s <= l) out.push_back(a);
    int ax = n;
    while (ax >= 0 && ++a[std::size_t(ax)] > l) a[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }
  std::sort(out.begin(), out.end(), [](const auto& u, const auto& v) {
    int su = 0, sv = 0;
    for (int q : u) su += q;
    for (int q : v) sv += q;
    return su != sv ? su < sv : u < v;
  });
  return out;
}

std::string alpha_name(const std::vector<int>& a) {
  std::string s = "D(";
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(a[i]);
  }
  return s + ")";
}

}  // namespace

// --- weighted Sobolev norm ---------------------------------------------------

NormReport weighted_sobolev_norm(const Lattice& lat, const HalfSpaceFunction& f,
                                 const Weight& w, const Box& space, double t0,
                                 double t1, int l, bool parallel) {
  if (l < 1 || l > 3) throw std::invalid_argument("l outside {1,2,3}");
  const int n = lat.n;
  const auto alphas = multi_indices(n, l);
  const std::size_t nt = alphas.size();

  // one refinement pass at spatial/temporal resolution R
  int trunc = 0;
  auto pass = [&](int R, std::vector<double>& terms) {
    terms.assign(nt, 0.0);
    std::vector<i64> cells(std::size_t(n), 0);
    std::vector<double> lo(std::size_t(n), 0), pitch(std::size_t(n), 0);
    i64 ncells = 1;
    for (int i = 0; i < n; ++i) {
      const double len = double(space.len[i]) / double(lat.S);
      cells[std::size_t(i)] = std::max<i64>(1, i64(std::ceil(len * double(i64(1) << R))));
      lo[std::size_t(i)] = double(space.lo[i]) / double(lat.S);
      pitch[std::size_t(i)] = len / double(cells[std::size_t(i)]);
      ncells *= cells[std::size_t(i)];
    }

    // temporal intervals: graded bands toward 0 when t0 == 0
    std::vector<std::pair<double, double>> tiv;
    if (t0 > 0) {
      const i64 c = std::max<i64>(1, i64(std::ceil((t1 - t0) * double(i64(1) << std::min(R, 4)))));
      for (i64 j = 0; j < c; ++j)
        tiv.push_back({t0 + (t1 - t0) * double(j) / double(c),
                       t0 + (t1 - t0) * double(j + 1) / double(c)});
    }

    auto band_terms = [&](double a, double b, std::vector<double>& out) {
      out.assign(nt, 0.0);
      const int subs = 1 << std::min(R, 2);
      std::vector<std::vector<double>> cell_part(std::size_t(ncells),
                                                 std::vector<double>(nt, 0.0));
      auto do_cell = [&](i64 lin) {
        std::vector<i64> ci(std::size_t(n), 0);
        i64 rest = lin;
        for (int i = n - 1; i >= 0; --i) {
          ci[std::size_t(i)] = rest % cells[std::size_t(i)];
          rest /= cells[std::size_t(i)];
        }
        std::vector<double> x(std::size_t(n), 0);
        std::vector<int> gi(std::size_t(n) + 1, 0);  // 4 Gauss nodes per axis
        for (int sub = 0; sub < subs; ++sub) {
          const double ta = a + (b - a) * double(sub) / subs;
          const double tb = a + (b - a) * double(sub + 1) / subs;
          std::fill(gi.begin(), gi.end(), 0);
          for (;;) {
            double wt = 1.0;
            for (int i = 0; i <= n; ++i) {
              const int g = gi[std::size_t(i)];
              const double node = (g < 2 ? -kG4x[g] : kG4x[g - 2]);
              const double gw = (g < 2 ? kG4w[g] : kG4w[g - 2]);
              if (i < n) {
                const double c0 = lo[std::size_t(i)] +
                                  pitch[std::size_t(i)] * (double(ci[std::size_t(i)]) + 0.5);
                x[std::size_t(i)] = c0 + 0.5 * pitch[std::size_t(i)] * node;
                wt *= gw * 0.5 * pitch[std::size_t(i)];
              } else {
                wt *= gw * 0.5 * (tb - ta);
              }
            }
            const double tt = 0.5 * (ta + tb) +
                              0.5 * (tb - ta) *
                                  ((gi[std::size_t(n)] < 2 ? -kG4x[gi[std::size_t(n)]]
                                                           : kG4x[gi[std::size_t(n)] - 2]));
            const double gm = w(x, tt);
            for (std::size_t q = 0; q < nt; ++q) {
              const double dv = mixed_derivative(f, x, tt, alphas[q]);
              if (!std::isfinite(dv))
                throw std::runtime_error("non-finite derivative near t=" + std::to_string(tt));
              cell_part[std::size_t(lin)][q] += wt * gm * std::fabs(dv);
            }
            int ax = n;
            while (ax >= 0 && ++gi[std::size_t(ax)] == 4) gi[std::size_t(ax--)] = 0;
            if (ax < 0) break;
          }
        }
      };
      if (parallel) {
#pragma omp parallel for schedule(static)
        for (i64 lin = 0; lin < ncells; ++lin) do_cell(lin);
      } else {
        for (i64 lin = 0; lin < ncells; ++lin) do_cell(lin);
      }
      // ordered reduction: identical result for both paths
      for (i64 lin = 0; lin < ncells; ++lin)
        for (std::size_t q = 0; q < nt; ++q) out[q] += cell_part[std::size_t(lin)][q];
    };

    std::vector<double> bt;
    if (t0 > 0) {
      for (auto [a, b] : tiv) {
        band_terms(a, b, bt);
        for (std::size_t q = 0; q < nt; ++q) terms[q] += bt[q];
      }
    } else {
      double hi = t1, acc = 0.0;
      int quiet = 0;
      for (int k = 0; k < 60; ++k) {
        band_terms(0.5 * hi, hi, bt);
        double tot = 0.0;
        for (std::size_t q = 0; q < nt; ++q) {
          terms[q] += bt[q];
          tot += bt[q];
        }
        acc += tot;
        trunc = k;
        quiet = (tot < 1e-10 * acc) ? quiet + 1 : 0;
        if (quiet >= 3 && k >= 6) break;
        hi *= 0.5;
      }
    }
  };

  const int rmax = n == 1 ? 8 : 5;
  std::vector<double> cur, next;
  pass(2, cur);
  double delta = 0.0;
  for (int R = 3; R <= rmax; ++R) {
    pass(R, next);
    double a = 0.0, b = 0.0;
    for (std::size_t q = 0; q < nt; ++q) {
      a += cur[q];
      b += next[q];
    }
    delta = std::fabs(b - a);
    cur.swap(next);
    if (delta <= 1e-4 * std::fabs(b)) break;
  }

  NormReport rep;
  rep.truncation_level = trunc;
  rep.refinement_delta = delta;
  for (std::size_t q = 0; q < nt; ++q) {
    rep.breakdown.push_back({alpha_name(alphas[q]), cur[q]});
    rep.value += cur[q];
  }
  return rep;
}

// --- trace ------------------------------------------------------------------------

TraceResult trace_of(const Lattice& lat, const HalfSpaceFunction& f, const DyadicCube& Q,
                     int d, const std::vector<double>& t_seq, double tol) {
  if (t_seq.empty()) throw std::invalid_argument("empty t sequence");
  for (std::size_t i = 1; i < t_seq.size(); ++i)
    if (!(t_seq[i] < t_seq[i - 1] && t_seq[i] > 0))
      throw std::invalid_argument("t sequence not strictly decreasing positive");
  if (Q.k > d) throw std::invalid_argument("cube finer than grid");

  TraceResult out;
  out.trace.n = lat.n;
  out.trace.M = lat.M;
  out.trace.d = d;
  out.trace.v.assign(std::size_t(out.trace.size()), 0.0);

  const i64 span = i64(1) << (d - Q.k);
  const i64 cpa = out.trace.cells_per_axis();
  const double pitch = std::ldexp(1.0, -d);
  const double cellvol = std::pow(pitch, lat.n);

  std::vector<i64> off(std::size_t(lat.n), 0);
  std::vector<i64> idx(std::size_t(lat.n));
  std::vector<double> x(std::size_t(lat.n));
  double l1_last = 0.0;
  out.decreasing = true;
  double prev_gap = std::numeric_limits<double>::infinity();
  std::vector<double> gaps(t_seq.size() - 1, 0.0);
  for (;;) {
    for (int i = 0; i < lat.n; ++i) {
      idx[std::size_t(i)] = imod(Q.m[std::size_t(i)] * span + off[std::size_t(i)], cpa);
      x[std::size_t(i)] = (double(idx[std::size_t(i)]) + 0.5) * pitch;
    }
    double prev = f.value(x, t_seq.front());
    for (std::size_t i = 1; i < t_seq.size(); ++i) {
      const double curv = f.value(x, t_seq[i]);
      gaps[i - 1] += std::fabs(curv - prev) * cellvol;
      prev = curv;
    }
    out.trace.at(idx) = prev;
    l1_last += std::fabs(prev) * cellvol;
    int ax = lat.n - 1;
    while (ax >= 0 && ++off[std::size_t(ax)] == span) off[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }
  for (double g : gaps) {
    out.residual = std::max(out.residual, g);
    if (g > prev_gap * (1 + 1e-12)) out.decreasing = false;
    prev_gap = g;
  }
  if (tol < 0) tol = 1e-2 * l1_last;
  out.converged = out.residual < tol;
  return out;
}

// --- difference modulus --------------------------------------------------------

double delta_modulus(const GridFunction& phi, const DyadicCube& Q, int l) {
  if (l < 1 || l > 3) throw std::invalid_argument("l outside {1,2,3}");
  if (Q.k > phi.d) throw std::invalid_argument("cube finer than grid");
  const int n = phi.n;
  const i64 Nq = i64(1) << (phi.d - Q.k);
  const i64 cpa = phi.cells_per_axis();
  double binom[4] = {1, 0, 0, 0};
  for (int i = 1; i <= l; ++i) binom[i] = binom[i - 1] * double(l - i + 1) / double(i);

  std::vector<double> partial(std::size_t(Nq) * (n == 2 ? std::size_t(Nq) : 1), 0.0);
  const i64 nx = i64(partial.size());
#pragma omp parallel for schedule(static)
  for (i64 xl = 0; xl < nx; ++xl) {
    std::vector<i64> xi(std::size_t(n), 0), hi(std::size_t(n), -Nq), pt(std::size_t(n), 0);
    i64 rest = xl;
    for (int i = n - 1; i >= 0; --i) {
      xi[std::size_t(i)] = Q.m[std::size_t(i)] * Nq + rest % Nq;
      rest /= Nq;
    }
    double acc = 0.0;
    for (;;) {
      double diff = 0.0;
      for (int i = 0; i <= l; ++i) {
        for (int a = 0; a < n; ++a)
          pt[std::size_t(a)] = imod(xi[std::size_t(a)] + i64(i) * hi[std::size_t(a)], cpa);
        diff += (i % 2 ? -1.0 : 1.0) * binom[i] * phi.at(pt);
      }
      acc += std::fabs(diff);
      int ax = n - 1;
      while (ax >= 0 && ++hi[std::size_t(ax)] == Nq) hi[std::size_t(ax--)] = -Nq;
      if (ax < 0) break;
    }
    partial[std::size_t(xl)] = acc;
  }
  double sum = 0.0;
  for (double p : partial) sum += p;
  return sum * std::pow(std::ldexp(1.0, -2 * phi.d) * std::ldexp(1.0, 2 * Q.k), n);
}

// --- best L1 polynomial approximation ---------------------------------------------

static void solve_small(std::vector<std::vector<double>>& A, std::vector<double>& b) {
  const std::size_t m = b.size();
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r2 = c + 1; r2 < m; ++r2)
      if (std::fabs(A[r2][c]) > std::fabs(A[piv][c])) piv = r2;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    if (std::fabs(A[c][c]) < 1e-300) throw std::runtime_error("singular fit system");
    for (std::size_t r2 = 0; r2 < m; ++r2) {
      if (r2 == c) continue;
      const double fmul = A[r2][c] / A[c][c];
      for (std::size_t c2 = c; c2 < m; ++c2) A[r2][c2] -= fmul * A[c][c2];
      b[r2] -= fmul * b[c];
    }
  }
  for (std::size_t c = 0; c < m; ++c) b[c] /= A[c][c];
}

double best_l1_poly_error(const GridFunction& phi, const DyadicCube& Q, int l) {
  if (l < 1 || l > 2) throw std::invalid_argument("l outside {1,2}");
  if (Q.k > phi.d) throw std::invalid_argument("cube finer than grid");
  const int n = phi.n;
  const i64 Nq = i64(1) << (phi.d - Q.k);
  const double pitch = std::ldexp(1.0, -phi.d);
  const double cellvol = std::pow(pitch, n);

  // gather samples and local (unwrapped) coordinates
  std::vector<double> vals;
  std::vector<std::vector<double>> xs;
  std::vector<i64> off(std::size_t(n), 0), idx(std::size_t(n), 0);
  for (;;) {
    std::vector<double> x(std::size_t(n), 0);
    for (int i = 0; i < n; ++i) {
      idx[std::size_t(i)] = Q.m[std::size_t(i)] * Nq + off[std::size_t(i)];
      x[std::size_t(i)] = (double(off[std::size_t(i)]) + 0.5) * pitch;
    }
    vals.push_back(phi.at(idx));
    xs.push_back(std::move(x));
    int ax = n - 1;
    while (ax >= 0 && ++off[std::size_t(ax)] == Nq) off[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }

  if (l == 1) {
    std::vector<double> s = vals;
    std::sort(s.begin(), s.end());
    const double med = s[(s.size() - 1) / 2];  // lower of two central samples
    double e = 0.0;
    for (double vv : vals) e += std::fabs(vv - med);
    return e * cellvol;
  }

  // IRLS over affine p(x) = a0 + sum a_i x_i
  const std::size_t m = std::size_t(n) + 1;
  std::vector<double> coef(m, 0.0), resid(vals.size(), 1.0);
  double scale = 0.0;
  for (double vv : vals) scale = std::max(scale, std::fabs(vv));
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    std::vector<std::vector<double>> A(m, std::vector<double>(m, 0.0));
    std::vector<double> b(m, 0.0);
    for (std::size_t s2 = 0; s2 < vals.size(); ++s2) {
      const double wr = it == 0 ? 1.0 : 1.0 / std::max(std::fabs(resid[s2]), 1e-9 * (scale + 1e-300));
      double basis[3] = {1.0, 0.0, 0.0};
      for (int i = 0; i < n; ++i) basis[i + 1] = xs[s2][std::size_t(i)];
      for (std::size_t r2 = 0; r2 < m; ++r2) {
        for (std::size_t c2 = 0; c2 < m; ++c2) A[r2][c2] += wr * basis[r2] * basis[c2];
        b[r2] += wr * basis[r2] * vals[s2];
      }
    }
    solve_small(A, b);
    coef = b;
    double obj = 0.0;
    for (std::size_t s2 = 0; s2 < vals.size(); ++s2) {
      double p = coef[0];
      for (int i = 0; i < n; ++i) p += coef[std::size_t(i) + 1] * xs[s2][std::size_t(i)];
      resid[s2] = vals[s2] - p;
      obj += std::fabs(resid[s2]);
    }
    if (it > 0 && std::fabs(obj - prev_obj) <= 1e-6 * std::max(obj, 1e-300)) {
      prev_obj = obj;
      break;
    }
    prev_obj = obj;
  }
  return prev_obj * cellvol;
}

// --- cell average and cube L1 ----------------------------------------------------

double cell_average(const Lattice& lat, const GridFunction& phi, const Box& b) {
  if (lat.M != phi.M || lat.n != phi.n) throw std::invalid_argument("window mismatch");
  if (phi.d > lat.shift) throw std::invalid_argument("grid finer than lattice");
  const i64 pu = lat.S >> phi.d;  // lattice units per grid cell
  const i64 cpa = phi.cells_per_axis();
  // sparse per-axis overlaps (lattice units, with multiplicity)
  std::vector<std::vector<std::pair<i64, i64>>> ov(std::size_t(lat.n));
  for (int i = 0; i < lat.n; ++i) {
    const i64 full = b.len[i] / lat.W, rem = b.len[i] % lat.W;
    const i64 a = imod(b.lo[i], lat.W);
    for (i64 c2 = 0; c2 < cpa; ++c2) {
      i64 v2 = full * pu;
      for (i64 j = -1; j <= 1; ++j) {
        const i64 s0 = std::max(a, c2 * pu + j * lat.W);
        const i64 s1 = std::min(a + rem, (c2 + 1) * pu + j * lat.W);
        if (s1 > s0) v2 += s1 - s0;
      }
      if (v2 > 0) ov[std::size_t(i)].push_back({c2, v2});
    }
  }
  double total = 0.0, vol = 0.0;
  std::vector<std::size_t> pos(std::size_t(lat.n), 0);
  std::vector<i64> idx(std::size_t(lat.n));
  for (;;) {
    double fcell = 1.0;
    for (int i = 0; i < lat.n; ++i) {
      const auto& pr = ov[std::size_t(i)][pos[std::size_t(i)]];
      idx[std::size_t(i)] = pr.first;
      fcell *= double(pr.second);
    }
    total += fcell * phi.at(idx);
    vol += fcell;
    int ax = lat.n - 1;
    while (ax >= 0 && ++pos[std::size_t(ax)] == ov[std::size_t(ax)].size())
      pos[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }
  return total / vol;
}

double l1_on_cube(const GridFunction& phi, const DyadicCube& Q) {
  if (Q.k > phi.d) throw std::invalid_argument("cube finer than grid");
  const i64 Nq = i64(1) << (phi.d - Q.k);
  const double cellvol = std::pow(std::ldexp(1.0, -phi.d), phi.n);
  double sum = 0.0;
  std::vector<i64> off(std::size_t(phi.n), 0), idx(std::size_t(phi.n));
  for (;;) {
    for (int i = 0; i < phi.n; ++i)
      idx[std::size_t(i)] = Q.m[std::size_t(i)] * Nq + off[std::size_t(i)];
    sum += std::fabs(phi.at(idx)) * cellvol;
    int ax = phi.n - 1;
    while (ax >= 0 && ++off[std::size_t(ax)] == Nq) off[std::size_t(ax--)] = 0;
    if (ax < 0) break;
  }
  return sum;
}

}  // namespace tracelab
