#include "tracelab/extension.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tracelab {

namespace {

constexpr double kG4x[4] = {-0.8611363115940526, -0.3399810435848563,
                            0.3399810435848563, 0.8611363115940526};
constexpr double kG4w[4] = {0.3478548451374538, 0.6521451548625461,
                            0.6521451548625461, 0.3478548451374538};

i64 floor_div(i64 a, i64 b) {
  i64 q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

i64 imod(i64 a, i64 b) {
  i64 r = a % b;
  return r < 0 ? r + b : r;
}

double bexp(double z) { return z > 0 ? std::exp(-1.0 / z) : 0.0; }

// smooth ramp: 1 for s <= a, 0 for s >= b
double ramp(double s, double a, double b) {
  if (s <= a) return 1.0;
  if (s >= b) return 0.0;
  const double w1 = bexp(b - s), w2 = bexp(s - a);
  return w1 / (w1 + w2);
}

std::vector<double> solve_dense(std::vector<std::vector<double>> A,
                                std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
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

// tensor panel-Gauss integral of fn over [-1,1]^n
double ball_integral(int n, int panels,
                     const std::function<double(const std::vector<double>&)>& fn) {
  std::vector<double> nodes, wts;
  const double h = 2.0 / panels;
  for (int p = 0; p < panels; ++p)
    for (int g = 0; g < 4; ++g) {
      nodes.push_back(-1.0 + (p + 0.5 + 0.5 * kG4x[g]) * h);
      wts.push_back(0.5 * h * kG4w[g]);
    }
  const std::size_t N = nodes.size();
  std::vector<std::size_t> it(std::size_t(n), 0);
  std::vector<double> u(std::size_t(n), 0.0);
  double acc = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      u[std::size_t(i)] = nodes[it[std::size_t(i)]];
      w *= wts[it[std::size_t(i)]];
    }
    acc += w * fn(u);
    int ax = n - 1;
    while (ax >= 0 && ++it[std::size_t(ax)] == N) it[std::size_t(ax)] = 0, --ax;
    if (ax < 0) break;
  }
  return acc;
}

double raw_bump(const std::vector<double>& u) {
  double r2 = 0.0;
  for (double v : u) r2 += v * v;
  return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
}

}  // namespace

double MollifierSpec::theta(const std::vector<double>& u) const {
  return norm_c * raw_bump(u);
}

double MollifierSpec::integral_quadrature() const {
  return norm_c * ball_integral(n, 24, raw_bump);
}

MollifierSpec MollifierSpec::make(int n, int l) {
  if (l < 1 || l > 3) throw std::invalid_argument("order must be 1, 2 or 3");
  MollifierSpec s;
  s.n = n;
  s.l = l;
  s.norm_c = 1.0 / ball_integral(n, 24, raw_bump);
  for (int p = 0; p <= 2 * (l - 1); p += 2) {
    auto f = [p](const std::vector<double>& u) {
      return std::pow(u[0], p) * raw_bump(u);
    };
    s.moments.push_back(s.norm_c * ball_integral(n, 24, f));
  }
  // even axis moments of Theta_1 * Theta_j at unit scale, via the binomial
  // expansion; solve sum_j mu_j M_{2p}(j) = [p == 0]
  double binom[5][5] = {};
  for (int i = 0; i <= 4; ++i) {
    binom[i][0] = 1;
    for (int j = 1; j <= i; ++j) binom[i][j] = binom[i - 1][j - 1] + binom[i - 1][j];
  }
  auto mom = [&](int order) { return s.moments[std::size_t(order / 2)]; };
  std::vector<std::vector<double>> A(std::size_t(l),
                                     std::vector<double>(std::size_t(l), 0.0));
  std::vector<double> rhs(std::size_t(l), 0.0);
  rhs[0] = 1.0;
  for (int p = 0; p < l; ++p)
    for (int j = 1; j <= l; ++j) {
      double m2p = 0.0;
      for (int i = 0; i <= 2 * p; i += 2)
        m2p += binom[2 * p][i] * mom(i) * mom(2 * p - i) * std::pow(double(j), 2 * p - i);
      A[std::size_t(p)][std::size_t(j - 1)] = m2p;
    }
  s.mu = solve_dense(std::move(A), std::move(rhs));
  return s;
}

double mollify_E_eps(const Lattice& lat, const GridFunction& phi, double eps,
                     const MollifierSpec& spec, const std::vector<double>& x) {
  if (spec.n != phi.n || lat.n != phi.n)
    throw std::invalid_argument("dimension mismatch");
  const double pitch = std::ldexp(1.0, -phi.d);
  if (eps < 2.0 * pitch)
    throw std::invalid_argument("mollifier radius below grid resolution");
  const int n = phi.n;
  const i64 cpa = phi.cells_per_axis();

  // one axis of outer quadrature nodes on [-eps, eps]
  std::vector<double> onode, owt;
  const int panels = 24;
  const double ph = 2.0 * eps / panels;
  for (int p = 0; p < panels; ++p)
    for (int g = 0; g < 4; ++g) {
      onode.push_back(-eps + (p + 0.5 + 0.5 * kG4x[g]) * ph);
      owt.push_back(0.5 * ph * kG4w[g]);
    }
  const double g2 = 0.5 / std::sqrt(3.0);  // Gauss-2 offsets in cell fractions

  double total = 0.0;
  std::vector<double> u(std::size_t(n), 0.0), y(std::size_t(n), 0.0), z(std::size_t(n), 0.0);
  std::vector<i64> ci(std::size_t(n), 0);
  for (int j = 1; j <= spec.l; ++j) {
    const double R = j * eps;
    double acc = 0.0, mass = 0.0;
    std::vector<std::size_t> it(std::size_t(n), 0);
    while (true) {  // outer nodes y
      double wy = 1.0;
      for (int i = 0; i < n; ++i) {
        y[std::size_t(i)] = x[std::size_t(i)] + onode[it[std::size_t(i)]];
        wy *= owt[it[std::size_t(i)]];
        u[std::size_t(i)] = onode[it[std::size_t(i)]] / eps;
      }
      const double outer_k = spec.theta(u) / std::pow(eps, n);
      if (outer_k > 0.0) {
        // G_j(y): per-cell Gauss-2 against the inner kernel
        double gj = 0.0, mj = 0.0;
        std::vector<i64> c0(std::size_t(n), 0), c1(std::size_t(n), 0);
        for (int i = 0; i < n; ++i) {
          c0[std::size_t(i)] = i64(std::floor((y[std::size_t(i)] - R) / pitch));
          c1[std::size_t(i)] = i64(std::floor((y[std::size_t(i)] + R) / pitch));
        }
        std::vector<i64> cc(c0);
        while (true) {
          for (int i = 0; i < n; ++i) ci[std::size_t(i)] = imod(cc[std::size_t(i)], cpa);
          const double pv = phi.at(ci);
          // tensor Gauss-2 over the cell
          double cell = 0.0;
          for (int mask = 0; mask < (1 << n); ++mask) {
            for (int i = 0; i < n; ++i) {
              const double ctr = (double(cc[std::size_t(i)]) + 0.5) * pitch;
              const double off = ((mask >> i) & 1 ? g2 : -g2) * pitch;
              u[std::size_t(i)] = (ctr + off - y[std::size_t(i)]) / R;
            }
            cell += spec.theta(u);
          }
          cell *= std::pow(pitch, n) / double(1 << n) / std::pow(R, n);
          gj += pv * cell;
          mj += cell;
          int ax = n - 1;
          while (ax >= 0 && ++cc[std::size_t(ax)] > c1[std::size_t(ax)])
            cc[std::size_t(ax)] = c0[std::size_t(ax)], --ax;
          if (ax < 0) break;
        }
        acc += wy * outer_k * gj;
        mass += wy * outer_k * mj;
      }
      int ax = n - 1;
      while (ax >= 0 && ++it[std::size_t(ax)] == onode.size())
        it[std::size_t(ax)] = 0, --ax;
      if (ax < 0) break;
    }
    // each composite kernel has unit mass; divide out the quadrature mass so
    // constants reproduce exactly
    total += spec.mu[std::size_t(j - 1)] * acc / mass;
  }
  return total;
}

// --- smooth extension -----------------------------------------------------------

namespace {

// antiderivative tables of the 1-d composite kernels Theta_eps * Theta_{j eps}
struct SmoothTables {
  int d = 0, K = 0, l = 1;
  std::vector<double> mu;
  double norm1 = 1.0;  // 1-d bump normalization
  // A[k-1][j-1]: cumulative integral on [-R, R], R = (1+j) 2^{-k}
  std::vector<std::vector<std::vector<double>>> A;
  static constexpr int N = 2048;

  double bump1(double r) const { return norm1 * (std::fabs(r) < 1 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0); }

  double kernel(double v, double eps, int j) const {  // composite at offset v
    // integrate over the support of the first factor
    double acc = 0.0;
    const int panels = 32;
    const double h = 2.0 * eps / panels;
    for (int p = 0; p < panels; ++p)
      for (int g = 0; g < 4; ++g) {
        const double w = -eps + (p + 0.5 + 0.5 * kG4x[g]) * h;
        acc += 0.5 * h * kG4w[g] * bump1(w / eps) * bump1((v - w) / (j * eps));
      }
    return acc / (eps * (j * eps));
  }

  void build() {
    A.assign(std::size_t(K), {});
    for (int k = 1; k <= K; ++k) {
      const double eps = std::ldexp(1.0, -k);
      auto& Ak = A[std::size_t(k - 1)];
      Ak.assign(std::size_t(l), std::vector<double>(N + 1, 0.0));
      for (int j = 1; j <= l; ++j) {
        const double R = (1 + j) * eps, step = 2.0 * R / N;
        auto& t = Ak[std::size_t(j - 1)];
        for (int i = 1; i <= N; ++i) {
          const double u0 = -R + (i - 1) * step;
          double seg = 0.0;
          for (int g = 0; g < 4; ++g)
            seg += 0.5 * step * kG4w[g] * kernel(u0 + (0.5 + 0.5 * kG4x[g]) * step, eps, j);
          t[std::size_t(i)] = t[std::size_t(i - 1)] + seg;
        }
        // the composite kernel has unit mass: scale the table so constants
        // reproduce exactly
        const double total = t.back();
        for (auto& v : t) v /= total;
      }
    }
  }

  double interp(const std::vector<double>& t, double R, double u) const {
    if (u <= -R) return 0.0;
    if (u >= R) return t.back();
    const double s = (u + R) / (2.0 * R) * N;
    const i64 i = std::min<i64>(i64(s), N - 1);
    const double f = s - double(i);
    // Catmull-Rom with clamped neighbours
    const double p0 = t[std::size_t(std::max<i64>(i - 1, 0))];
    const double p1 = t[std::size_t(i)];
    const double p2 = t[std::size_t(i + 1)];
    const double p3 = t[std::size_t(std::min<i64>(i + 2, N))];
    return p1 + 0.5 * f * (p2 - p0 + f * (2 * p0 - 5 * p1 + 4 * p2 - p3 +
                                          f * (3 * (p1 - p2) + p3 - p0)));
  }

  double smooth_at(const GridFunction& phi, int k, double x) const {
    const double eps = std::ldexp(1.0, -k);
    const double h = std::ldexp(1.0, -phi.d);
    const i64 cpa = phi.cells_per_axis();
    double total = 0.0;
    for (int j = 1; j <= l; ++j) {
      const double R = (1 + j) * eps;
      const auto& t = A[std::size_t(k - 1)][std::size_t(j - 1)];
      const i64 c0 = i64(std::floor((x - R) / h)), c1 = i64(std::floor((x + R) / h));
      double acc = 0.0;
      double hi = interp(t, R, x - double(c0) * h);
      for (i64 c = c0; c <= c1; ++c) {
        const double lo = interp(t, R, x - double(c + 1) * h);
        acc += phi.at({imod(c, cpa)}) * (hi - lo);
        hi = lo;
      }
      total += mu[std::size_t(j - 1)] * acc;
    }
    return total;
  }
};

}  // namespace

HalfSpaceFunction extend_smooth(const Lattice& lat, const GridFunction& phi, int l,
                                const MollifierSpec& spec) {
  if (spec.n != phi.n || spec.l != l)
    throw std::invalid_argument("mollifier spec mismatch");
  if (phi.d < 2) throw std::invalid_argument("grid too coarse to mollify");
  const int K = phi.d - 1;

  HalfSpaceFunction f;
  f.n = phi.n;
  if (phi.n == 1) {
    auto tab = std::make_shared<SmoothTables>();
    tab->d = phi.d;
    tab->K = K;
    tab->l = l;
    tab->mu = spec.mu;
    tab->norm1 = spec.n == 1 ? spec.norm_c : MollifierSpec::make(1, l).norm_c;
    tab->build();
    auto g = std::make_shared<GridFunction>(phi);
    f.f = [tab, g, K](const std::vector<double>& x, double t) {
      double val = 0.0;
      double chi_prev = ramp(t, 0.75, 1.0);  // chi_0
      if (t >= 1.0) return 0.0;
      for (int k = 1; k <= K; ++k) {
        const double chi_k = k == K ? 0.0 : ramp(std::ldexp(t, k), 0.75, 1.0);
        const double coef = chi_prev - chi_k;
        if (coef > 0.0) val += coef * tab->smooth_at(*g, k, x[0]);
        chi_prev = chi_k;
        if (chi_prev == 0.0) break;
      }
      return val;
    };
  } else {
    auto g = std::make_shared<GridFunction>(phi);
    auto sp = std::make_shared<MollifierSpec>(spec);
    const Lattice lt = lat;
    f.f = [g, sp, lt, K](const std::vector<double>& x, double t) {
      if (t >= 1.0) return 0.0;
      double val = 0.0;
      double chi_prev = ramp(t, 0.75, 1.0);
      for (int k = 1; k <= K; ++k) {
        const double chi_k = k == K ? 0.0 : ramp(std::ldexp(t, k), 0.75, 1.0);
        const double coef = chi_prev - chi_k;
        if (coef > 0.0)
          val += coef * mollify_E_eps(lt, *g, std::ldexp(1.0, -k), *sp, x);
        chi_prev = chi_k;
        if (chi_prev == 0.0) break;
      }
      return val;
    };
  }
  return f;
}

// --- partition of unity and the limiting extension ---------------------------------

double PartitionFamily::psi(int k, double t) const {
  if (t <= 0.0 || t >= 2.25) return 0.0;
  auto chi = [&](int kk) { return ramp(std::ldexp(t, kk), 7.0 / 8.0, 9.0 / 8.0); };
  if (k == K) return K >= 1 ? chi(K - 1) : 1.0;
  if (k == 0) return 1.0 - chi(0);
  return chi(k - 1) - chi(k);
}

namespace {

double axis_profile(double u) {  // 1 on the core, 0 beyond the doubled cube
  return ramp(u, 0.5, 1.0);
}

}  // namespace

double PartitionFamily::theta(int k, const std::vector<i64>& m,
                              const std::vector<double>& x) const {
  const double side = std::ldexp(1.0, -k);
  const i64 cpa = lat.cells_per_axis(k);
  const double Md = double(lat.M);
  auto eta1 = [&](i64 mi, double xi) {
    double dx = std::fabs(xi - (double(mi) + 0.5) * side);
    dx = std::min(dx, Md - dx);
    return axis_profile(dx / side);
  };
  double num = 1.0;
  for (int i = 0; i < lat.n; ++i)
    num *= eta1(imod(m[std::size_t(i)], cpa), x[std::size_t(i)]);
  if (num == 0.0) return 0.0;
  // denominator over the 3^n candidate window around x
  double den = 0.0;
  std::vector<i64> base(std::size_t(lat.n), 0);
  for (int i = 0; i < lat.n; ++i)
    base[std::size_t(i)] = i64(std::floor(x[std::size_t(i)] / side));
  std::vector<int> it(std::size_t(lat.n), -1);
  while (true) {
    double e = 1.0;
    for (int i = 0; i < lat.n; ++i)
      e *= eta1(imod(base[std::size_t(i)] + it[std::size_t(i)], cpa), x[std::size_t(i)]);
    den += e;
    int ax = lat.n - 1;
    while (ax >= 0 && ++it[std::size_t(ax)] == 2) it[std::size_t(ax)] = -1, --ax;
    if (ax < 0) break;
  }
  return num / den;
}

double PartitionFamily::big_theta(int k, const std::vector<i64>& m,
                                  const std::vector<double>& x, double t) const {
  const double p = psi(k, t);
  return p > 0.0 ? p * theta(k, m, x) : 0.0;
}

namespace {

// visit every (k, m-window cell) pair active at (x,t), with its Theta value
template <typename Fn>
void for_active(const PartitionFamily& fam, const std::vector<double>& x, double t,
                Fn&& fn) {
  const int n = fam.lat.n;
  std::vector<i64> m(std::size_t(n), 0);
  for (int k = 0; k <= fam.K; ++k) {
    const double p = fam.psi(k, t);
    if (p <= 0.0) continue;
    const double side = std::ldexp(1.0, -k);
    const i64 cpa = fam.lat.cells_per_axis(k);
    std::vector<i64> base(std::size_t(n), 0);
    for (int i = 0; i < n; ++i)
      base[std::size_t(i)] = i64(std::floor(x[std::size_t(i)] / side));
    std::vector<int> it(std::size_t(n), -1);
    while (true) {
      for (int i = 0; i < n; ++i)
        m[std::size_t(i)] = imod(base[std::size_t(i)] + it[std::size_t(i)], cpa);
      const double th = fam.theta(k, m, x);
      if (th > 0.0) {
        DyadicCube q{k, m};
        fn(k, linear_index(fam.lat, q), th * p);
      }
      int ax = n - 1;
      while (ax >= 0 && ++it[std::size_t(ax)] == 2) it[std::size_t(ax)] = -1, --ax;
      if (ax < 0) break;
    }
  }
}

}  // namespace

double PartitionFamily::g(std::size_t pair, const std::vector<double>& x,
                          double t) const {
  double acc = 0.0;
  for_active(*this, x, t, [&](int k, i64 lin, double v) {
    if (owner[std::size_t(k)][std::size_t(lin)] == int(pair)) acc += v;
  });
  return acc;
}

double PartitionFamily::g_sum(const std::vector<double>& x, double t) const {
  double acc = 0.0;
  for_active(*this, x, t, [&](int, i64, double v) { acc += v; });
  return acc;
}

int PartitionFamily::support_count(const std::vector<double>& x, double t) const {
  std::vector<int> seen;
  for_active(*this, x, t, [&](int k, i64 lin, double) {
    const int o = owner[std::size_t(k)][std::size_t(lin)];
    if (std::find(seen.begin(), seen.end(), o) == seen.end()) seen.push_back(o);
  });
  return int(seen.size());
}

std::vector<double> PartitionFamily::grad_g(std::size_t pair,
                                            const std::vector<double>& x,
                                            double t) const {
  const double h = 1e-6;
  std::vector<double> gr(std::size_t(lat.n) + 1, 0.0);
  std::vector<double> xp(x), xm(x);
  for (int i = 0; i < lat.n; ++i) {
    xp[std::size_t(i)] = x[std::size_t(i)] + h;
    xm[std::size_t(i)] = x[std::size_t(i)] - h;
    gr[std::size_t(i)] = (g(pair, xp, t) - g(pair, xm, t)) / (2 * h);
    xp[std::size_t(i)] = x[std::size_t(i)];
    xm[std::size_t(i)] = x[std::size_t(i)];
  }
  const double ht = std::min(h, 0.5 * t);
  gr[std::size_t(lat.n)] = (g(pair, x, t + ht) - g(pair, x, t - ht)) / (2 * ht);
  return gr;
}

namespace {

// all levels <= K of closed dyadic cubes inside the open periodic box
void contained_cubes(const Lattice& lat, const Box& b, int K,
                     std::vector<std::pair<int, i64>>& out) {
  out.clear();
  std::vector<std::vector<i64>> axis{std::size_t(lat.n)};
  for (int k = 0; k <= K; ++k) {
    const i64 side = lat.side_units(k);
    const i64 cpa = lat.cells_per_axis(k);
    bool empty = false;
    for (int i = 0; i < lat.n; ++i) {
      auto& ids = axis[std::size_t(i)];
      ids.clear();
      const i64 lo = b.lo[std::size_t(i)], len = b.len[std::size_t(i)];
      if (len > lat.W) {
        for (i64 m = 0; m < cpa; ++m) ids.push_back(m);
      } else {
        const i64 mf = floor_div(lo, side);
        for (i64 m = mf; m <= mf + len / side + 1; ++m) {
          const i64 mr = imod(m, cpa);
          bool in = false;
          for (i64 j = 0; j <= 2 && !in; ++j)
            in = (mr * side + j * lat.W > lo) &&
                 ((mr + 1) * side + j * lat.W < lo + len);
          if (in && std::find(ids.begin(), ids.end(), mr) == ids.end())
            ids.push_back(mr);
        }
      }
      if (ids.empty()) empty = true;
    }
    if (empty) continue;
    std::vector<std::size_t> it(std::size_t(lat.n), 0);
    DyadicCube q;
    q.k = k;
    q.m.resize(std::size_t(lat.n));
    while (true) {
      for (int i = 0; i < lat.n; ++i)
        q.m[std::size_t(i)] = axis[std::size_t(i)][it[std::size_t(i)]];
      out.push_back({k, linear_index(lat, q)});
      int ax = lat.n - 1;
      while (ax >= 0 && ++it[std::size_t(ax)] == axis[std::size_t(ax)].size())
        it[std::size_t(ax)] = 0, --ax;
      if (ax < 0) break;
    }
  }
}

}  // namespace

PartitionFamily build_partition_g(const Lattice& lat, const TilingSystem& sys) {
  if (lat.k0 != 0)
    throw std::invalid_argument("partition requires factor-2 dilation (k0 = 0)");
  if (sys.stages.empty() || sys.selected.size() != sys.stages.size())
    throw std::invalid_argument("system lacks selected covers");

  PartitionFamily fam;
  fam.lat = lat;
  fam.K = lat.d_max;

  // flatten the (stage, selected cube) pairs
  std::vector<std::vector<int>> stage_pairs(sys.stages.size());
  for (std::size_t s = 0; s < sys.stages.size(); ++s)
    for (auto idx : sys.selected[s]) {
      stage_pairs[s].push_back(int(fam.cubes.size()));
      fam.cubes.push_back(sys.stages[s][idx].cube);
      fam.stage.push_back(int(s));
    }
  const std::size_t NP = fam.cubes.size();

  // B-sets and the per-(k,m) container lists
  std::vector<std::vector<std::pair<int, i64>>> b_set(NP);
  std::vector<std::vector<std::vector<int>>> containers(std::size_t(fam.K) + 1);
  for (int k = 0; k <= fam.K; ++k) {
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(k);
    containers[std::size_t(k)].resize(std::size_t(cells));
  }
  for (std::size_t p = 0; p < NP; ++p) {
    contained_cubes(lat, dilate(lat, fam.cubes[p]), fam.K, b_set[p]);
    for (auto [k, lin] : b_set[p])
      containers[std::size_t(k)][std::size_t(lin)].push_back(int(p));
  }

  // D-sets: per stage, claim in side-ascending (level-descending) then
  // lexicographic order; exclusion is cumulative within the stage only
  std::vector<std::vector<int>> claim_stage(std::size_t(fam.K) + 1);
  for (int k = 0; k <= fam.K; ++k)
    claim_stage[std::size_t(k)].assign(containers[std::size_t(k)].size(), -1);
  std::vector<std::vector<int>> d_owners(std::size_t(fam.K) + 1);
  for (int k = 0; k <= fam.K; ++k)
    d_owners[std::size_t(k)].resize(containers[std::size_t(k)].size());
  std::vector<std::vector<std::vector<int>>> d_list(std::size_t(fam.K) + 1);
  for (int k = 0; k <= fam.K; ++k)
    d_list[std::size_t(k)].resize(containers[std::size_t(k)].size());

  for (std::size_t s = 0; s < sys.stages.size(); ++s) {
    auto order = stage_pairs[s];
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (fam.cubes[std::size_t(a)].k != fam.cubes[std::size_t(b)].k)
        return fam.cubes[std::size_t(a)].k > fam.cubes[std::size_t(b)].k;
      return linear_index(lat, fam.cubes[std::size_t(a)]) <
             linear_index(lat, fam.cubes[std::size_t(b)]);
    });
    for (int p : order)
      for (auto [k, lin] : b_set[std::size_t(p)])
        if (claim_stage[std::size_t(k)][std::size_t(lin)] != int(s)) {
          claim_stage[std::size_t(k)][std::size_t(lin)] = int(s);
          d_list[std::size_t(k)][std::size_t(lin)].push_back(p);
        }
  }

  // E-sets: evict a D-membership when a strictly smaller cube at the same or
  // a later stage also contains the pair; exactly one membership survives
  fam.e_set.assign(NP, {});
  fam.owner.resize(std::size_t(fam.K) + 1);
  for (int k = 0; k <= fam.K; ++k) {
    fam.owner[std::size_t(k)].assign(containers[std::size_t(k)].size(), -1);
    for (std::size_t lin = 0; lin < containers[std::size_t(k)].size(); ++lin) {
      for (int p : d_list[std::size_t(k)][lin]) {
        bool evicted = false;
        for (int q : containers[std::size_t(k)][lin])
          if (fam.stage[std::size_t(q)] >= fam.stage[std::size_t(p)] &&
              fam.cubes[std::size_t(q)].k > fam.cubes[std::size_t(p)].k) {
            evicted = true;
            break;
          }
        if (!evicted) {
          if (fam.owner[std::size_t(k)][lin] != -1)
            throw std::logic_error("index sets overlap");
          fam.owner[std::size_t(k)][lin] = p;
          fam.e_set[std::size_t(p)].push_back({k, i64(lin)});
        }
      }
      if (fam.owner[std::size_t(k)][lin] == -1)
        throw std::logic_error("index sets fail to cover the range");
    }
  }
  return fam;
}

double partition_gradient_constant(const Lattice& lat, const PartitionFamily& fam,
                                   const Weight& w, const WeightScales& scales) {
  double worst = 0.0;
  std::vector<double> xs;
  for (std::size_t p = 0; p < fam.cubes.size(); ++p) {
    double integral = 0.0;
    for (auto [k, lin] : fam.e_set[p]) {
      const DyadicCube q = cube_from_linear(lat, k, lin);
      const double side = std::ldexp(1.0, -k);
      // spatial nodes over the doubled cube: 2 panels x Gauss-4 per axis
      std::vector<std::vector<std::pair<double, double>>> ax{std::size_t(lat.n)};
      for (int i = 0; i < lat.n; ++i) {
        const double lo = (double(q.m[std::size_t(i)]) - 0.5) * side;
        for (int pp = 0; pp < 2; ++pp)
          for (int g = 0; g < 4; ++g) {
            double xv = lo + (pp + 0.5 + 0.5 * kG4x[g]) * side;
            xv -= double(lat.M) * std::floor(xv / double(lat.M));
            ax[std::size_t(i)].push_back({xv, 0.25 * side * kG4w[g]});
          }
      }
      // time bands of psi_k; the tail band is graded toward zero
      std::vector<std::pair<double, double>> tb;  // (t, weight)
      auto add_band = [&](double a, double b) {
        for (int pp = 0; pp < 2; ++pp)
          for (int g = 0; g < 4; ++g)
            tb.push_back({a + (pp + 0.5 + 0.5 * kG4x[g]) * (b - a) / 2,
                          0.25 * (b - a) * kG4w[g]});
      };
      if (k < fam.K) {
        add_band(7.0 / 8.0 * side, 9.0 / 8.0 * 2.0 * side);
      } else {
        double hi = 9.0 / 8.0 * 2.0 * side;
        double lo2 = 7.0 / 8.0 * side;
        add_band(lo2, hi);
        for (int bband = 0; bband < 24 && lo2 > 1e-9; ++bband) {
          add_band(lo2 / 2, lo2);
          lo2 /= 2;
        }
      }
      std::vector<std::size_t> it(std::size_t(lat.n), 0);
      std::vector<double> xv(std::size_t(lat.n), 0.0);
      while (true) {
        double wx = 1.0;
        for (int i = 0; i < lat.n; ++i) {
          xv[std::size_t(i)] = ax[std::size_t(i)][it[std::size_t(i)]].first;
          wx *= ax[std::size_t(i)][it[std::size_t(i)]].second;
        }
        for (auto [t, wt] : tb) {
          auto gr = fam.grad_g(p, xv, t);
          double mag = 0.0;
          for (double v : gr) mag += v * v;
          mag = std::sqrt(mag);
          if (mag > 0.0) integral += wx * wt * mag * w(xv, t);
        }
        int axn = lat.n - 1;
        while (axn >= 0 && ++it[std::size_t(axn)] == ax[std::size_t(axn)].size())
          it[std::size_t(axn)] = 0, --axn;
        if (axn < 0) break;
      }
    }
    const DyadicCube& qc = fam.cubes[p];
    const double denom = scales.hat_gamma(qc.k, linear_index(lat, qc)) *
                         std::pow(std::ldexp(1.0, -qc.k), lat.n);
    worst = std::max(worst, integral / denom);
  }
  return worst;
}

HalfSpaceFunction extend_limiting(const Lattice& lat, const GridFunction& phi,
                                  const TilingSystem& sys) {
  auto fam = std::make_shared<PartitionFamily>(build_partition_g(lat, sys));
  auto avg = std::make_shared<std::vector<double>>();
  avg->reserve(fam->cubes.size());
  for (const auto& q : fam->cubes)
    avg->push_back(cell_average(lat, phi, dilate(lat, q)));

  HalfSpaceFunction f;
  f.n = lat.n;
  const double Md = double(lat.M);
  f.f = [fam, avg, Md](const std::vector<double>& x, double t) {
    std::vector<double> xr(x);
    for (auto& v : xr) v -= Md * std::floor(v / Md);
    double acc = 0.0;
    for_active(*fam, xr, t, [&](int k, i64 lin, double v) {
      acc += v * (*avg)[std::size_t(fam->owner[std::size_t(k)][std::size_t(lin)])];
    });
    return acc;
  };
  return f;
}

}  // namespace tracelab
