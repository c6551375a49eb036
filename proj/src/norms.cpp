#include "tracelab/norms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tracelab {

namespace {

// dense Gaussian elimination with partial pivoting (tiny systems)
std::vector<double> solve_dense(std::vector<std::vector<double>> A,
                                std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    if (std::fabs(A[c][c]) < 1e-300) return std::vector<double>(n, 0.0);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t j = c; j < n; ++j) A[r][j] -= f * A[c][j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t j = c + 1; j < n; ++j) s -= A[c][j] * x[j];
    x[c] = s / A[c][c];
  }
  return x;
}

// monomials of total degree < l in n variables
std::vector<std::vector<int>> poly_basis(int n, int l) {
  std::vector<std::vector<int>> basis;
  std::vector<int> e(std::size_t(n), 0);
  // lexicographic enumeration over bounded exponents, filtered by degree
  while (true) {
    int deg = 0;
    for (int v : e) deg += v;
    if (deg < l) basis.push_back(e);
    int ax = n - 1;
    while (ax >= 0 && ++e[std::size_t(ax)] == l) e[std::size_t(ax)] = 0, --ax;
    if (ax < 0) break;
  }
  std::sort(basis.begin(), basis.end(), [](const auto& a, const auto& b) {
    int da = 0, db = 0;
    for (int v : a) da += v;
    for (int v : b) db += v;
    if (da != db) return da < db;
    return a < b;
  });
  return basis;
}

struct CellSample {
  std::vector<double> x;  // coordinates relative to the box corner, box scale
  double v = 0.0;
};

// grid cells with centers in the open periodic box; coordinates unwrapped
void gather_cells(const Lattice& lat, const GridFunction& phi, const Box& b,
                  std::vector<CellSample>& out) {
  out.clear();
  const i64 cpa = phi.cells_per_axis();
  const i64 U = lat.W / cpa;  // lattice units per grid cell
  std::vector<std::vector<std::pair<i64, double>>> axis(std::size_t(lat.n));
  for (int i = 0; i < lat.n; ++i) {
    const i64 lo = b.lo[std::size_t(i)], len = b.len[std::size_t(i)];
    const double scale = double(std::min(len, lat.W));
    for (i64 c = 0; c < cpa; ++c) {
      const double ctr = (double(c) + 0.5) * double(U);
      if (len >= lat.W) {
        axis[std::size_t(i)].push_back({c, ctr / scale});
        continue;
      }
      for (int j = 0; j <= 2; ++j) {
        const double p = ctr + double(j) * double(lat.W);
        if (p > double(lo) && p < double(lo + len)) {
          axis[std::size_t(i)].push_back({c, (p - double(lo)) / scale});
          break;
        }
      }
    }
    if (axis[std::size_t(i)].empty()) return;
  }
  std::vector<std::size_t> it(std::size_t(lat.n), 0);
  std::vector<i64> idx(std::size_t(lat.n), 0);
  while (true) {
    CellSample s;
    s.x.resize(std::size_t(lat.n));
    for (int i = 0; i < lat.n; ++i) {
      s.x[std::size_t(i)] = axis[std::size_t(i)][it[std::size_t(i)]].second;
      idx[std::size_t(i)] = axis[std::size_t(i)][it[std::size_t(i)]].first;
    }
    s.v = phi.at(idx);
    out.push_back(std::move(s));
    int ax = lat.n - 1;
    while (ax >= 0 && ++it[std::size_t(ax)] == axis[std::size_t(ax)].size())
      it[std::size_t(ax)] = 0, --ax;
    if (ax < 0) break;
  }
}

double eval_poly(const std::vector<std::vector<int>>& basis,
                 const std::vector<double>& coef, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    double m = coef[j];
    for (std::size_t i = 0; i < x.size(); ++i)
      for (int p = 0; p < basis[j][i]; ++p) m *= x[i];
    s += m;
  }
  return s;
}

}  // namespace

double best_l1_box_error(const Lattice& lat, const GridFunction& phi, const Box& b,
                         int l) {
  if (l < 1) throw std::invalid_argument("order must be positive");
  std::vector<CellSample> cells;
  gather_cells(lat, phi, b, cells);
  if (cells.empty()) return 0.0;
  const double cell_vol = std::pow(std::ldexp(1.0, -phi.d), phi.n);

  if (l == 1) {  // best constant: lower sample median
    std::vector<double> v;
    v.reserve(cells.size());
    for (const auto& c : cells) v.push_back(c.v);
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t((v.size() - 1) / 2),
                     v.end());
    const double med = v[(v.size() - 1) / 2];
    double e = 0.0;
    for (const auto& c : cells) e += std::fabs(c.v - med);
    return e * cell_vol;
  }

  const auto basis = poly_basis(phi.n, l);
  const std::size_t B = basis.size(), N = cells.size();
  std::vector<std::vector<double>> X(N, std::vector<double>(B, 1.0));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < B; ++j)
      for (int ax = 0; ax < phi.n; ++ax)
        for (int p = 0; p < basis[j][std::size_t(ax)]; ++p)
          X[i][j] *= cells[i].x[std::size_t(ax)];

  // IRLS toward the least-absolute-deviations fit
  std::vector<double> wgt(N, 1.0), coef(B, 0.0);
  double prev_obj = -1.0;
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::vector<double>> A(B, std::vector<double>(B, 0.0));
    std::vector<double> rhs(B, 0.0);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < B; ++j) {
        rhs[j] += wgt[i] * X[i][j] * cells[i].v;
        for (std::size_t k = j; k < B; ++k) A[j][k] += wgt[i] * X[i][j] * X[i][k];
      }
    for (std::size_t j = 0; j < B; ++j)
      for (std::size_t k = 0; k < j; ++k) A[j][k] = A[k][j];
    coef = solve_dense(std::move(A), std::move(rhs));
    double obj = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double r = cells[i].v - eval_poly(basis, coef, cells[i].x);
      obj += std::fabs(r);
      scale = std::max(scale, std::fabs(cells[i].v));
      wgt[i] = 1.0 / std::max(std::fabs(r), 1e-9 * std::max(scale, 1.0));
    }
    if (prev_obj >= 0 && std::fabs(obj - prev_obj) <=
                             1e-6 * std::max(prev_obj, 1e-12 * std::max(scale, 1.0)))
      break;
    prev_obj = obj;
  }
  double e = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    e += std::fabs(cells[i].v - eval_poly(basis, coef, cells[i].x));
  return e * cell_vol;
}

NormReport besov_variable_norm(const Lattice& lat, const GridFunction& phi,
                               const WeightScales& scales, const BesovParams& p) {
  if (p.k_max < 1) throw std::invalid_argument("k_max must be at least 1");
  if (p.l < 1 || p.l > 3) throw std::invalid_argument("order must be 1, 2 or 3");
  if (scales.depth < p.k_max) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "scale table missing hat_gamma(k=%d,m=0)",
                  scales.depth + 1);
    throw std::runtime_error(buf);
  }

  NormReport rep;
  rep.truncation_level = p.k_max;
  char name[64];
  for (int k = 0; k <= p.k_max; ++k) {
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(k);
    const std::ptrdiff_t NC = std::ptrdiff_t(cells);
    std::vector<double> terms(std::size_t(cells), 0.0);
#pragma omp parallel for
    for (std::ptrdiff_t li = 0; li < NC; ++li) {
      const DyadicCube q = cube_from_linear(lat, k, i64(li));
      double t;
      if (k == 0) {
        t = scales.gamma_integral(lat, 0, i64(li)) * l1_on_cube(phi, q);
      } else {
        const double g3 = scales.gamma3(lat, k, i64(li), p.l);
        if (p.use_E) {
          t = g3 * std::ldexp(1.0, k * lat.n) *
              best_l1_box_error(lat, phi, dilate_int(lat, q, 2), p.l);
        } else {
          t = g3 * delta_modulus(phi, q, p.l);
        }
      }
      terms[std::size_t(li)] = t;
    }
    double level = 0.0;
    for (i64 li = 0; li < cells; ++li) {
      level += terms[std::size_t(li)];
      std::snprintf(name, sizeof name, "k=%d m=%lld", k, (long long)li);
      rep.breakdown.push_back({name, terms[std::size_t(li)]});
      rep.value += terms[std::size_t(li)];
    }
    if (k == p.k_max) rep.refinement_delta = level;  // tail estimate
  }
  return rep;
}

NormReport z_functional(const Lattice& lat, const GridFunction& phi,
                        const TilingSystem& sys, const WeightScales& scales) {
  if (sys.selected.size() != sys.stages.size())
    throw std::invalid_argument("system lacks selected covers");
  auto adm = check_admissible(lat, scales, sys, sys.c1, sys.c2);
  if (!adm.ok) {
    for (const auto& c : adm.conds)
      if (!c.pass)
        throw std::invalid_argument("inadmissible system: " + c.name);
  }

  NormReport rep;
  char name[96];
  {  // level-0 weighted L1 terms over the full grid
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(0);
    for (i64 li = 0; li < cells; ++li) {
      const double t =
          scales.hat_gamma(0, li) * l1_on_cube(phi, cube_from_linear(lat, 0, li));
      std::snprintf(name, sizeof name, "k=0 m=%lld", (long long)li);
      rep.breakdown.push_back({name, t});
      rep.value += t;
    }
  }
  for (std::size_t s = 1; s < sys.stages.size(); ++s) {
    const auto& keep = sys.selected[s];
    const std::ptrdiff_t NK = std::ptrdiff_t(keep.size());
    std::vector<double> terms(keep.size(), 0.0);
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < NK; ++i) {
      const DyadicCube& q = sys.stages[s][keep[std::size_t(i)]].cube;
      terms[std::size_t(i)] = scales.hat_gamma(q.k, linear_index(lat, q)) *
                              best_l1_box_error(lat, phi, dilate(lat, q), 1);
    }
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const DyadicCube& q = sys.stages[s][keep[i]].cube;
      std::snprintf(name, sizeof name, "s=%zu k=%d m=%lld", s, q.k,
                    (long long)linear_index(lat, q));
      rep.breakdown.push_back({name, terms[i]});
      rep.value += terms[i];
    }
  }
  rep.truncation_level = int(sys.stages.size()) - 1;
  return rep;
}

NormReport z_functional_best(const Lattice& lat, const GridFunction& phi,
                             const std::vector<TilingSystem>& library,
                             const WeightScales& scales) {
  if (library.empty()) throw std::invalid_argument("empty system library");
  NormReport best;
  bool have = false;
  for (const auto& sys : library) {
    auto r = z_functional(lat, phi, sys, scales);
    if (!have || r.value < best.value) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace tracelab
