#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "tracelab/grid_function.hpp"

using namespace tracelab;
using doctest::Approx;

static Lattice lat1(int M = 4, int d = 6, int k0 = 0) {
  return Lattice(Window{1, M, d}, DilationParam{k0});
}

static HalfSpaceFunction hsf1(std::function<double(double, double)> f) {
  HalfSpaceFunction h;
  h.n = 1;
  h.f = [f](const std::vector<double>& x, double t) { return f(x[0], t); };
  return h;
}

TEST_CASE("grid csv round trips bit-exactly") {
  auto g = sample_grid(1, 2, 4, [](const std::vector<double>& x) {
    return std::sin(3.1 * x[0]) + 1.0 / 3.0;
  });
  std::ostringstream os;
  write_grid_csv(os, g);
  std::istringstream is(os.str());
  auto back = read_grid_csv(is);
  CHECK(back.n == g.n);
  CHECK(back.M == g.M);
  CHECK(back.d == g.d);
  REQUIRE(back.v.size() == g.v.size());
  for (std::size_t i = 0; i < g.v.size(); ++i) CHECK(back.v[i] == g.v[i]);
}

TEST_CASE("finite-difference partials match analytic ones") {
  auto f = hsf1([](double x, double t) { return std::sin(2 * x) * std::exp(-t); });
  std::vector<double> x{0.37};
  CHECK(f.partial(x, 0.5, 0) == Approx(2 * std::cos(2 * 0.37) * std::exp(-0.5)).epsilon(1e-8));
  CHECK(f.partial(x, 0.5, 1) == Approx(-std::sin(2 * 0.37) * std::exp(-0.5)).epsilon(1e-8));
}

TEST_CASE("weighted Sobolev norm closed forms") {
  auto lat = lat1(2, 5);
  Box unit{{0}, {lat.S}};
  auto zero = hsf1([](double, double) { return 0.0; });
  auto ft = hsf1([](double, double t) { return t; });

  CHECK(weighted_sobolev_norm(lat, zero, Weight::constant(1, 1.0), unit, 0.0, 1.0, 1)
            .value == Approx(0.0));
  auto r1 = weighted_sobolev_norm(lat, ft, Weight::constant(1, 1.0), unit, 0.0, 1.0, 1);
  CHECK(r1.value == Approx(1.5).epsilon(1e-3));
  auto r2 = weighted_sobolev_norm(lat, ft, Weight::power_t(1, 0.5), unit, 0.0, 1.0, 1);
  CHECK(r2.value == Approx(8.0 / 3.0).epsilon(2e-3));
  double s = 0.0;
  for (const auto& [name, v] : r2.breakdown) s += v;
  CHECK(r2.value == Approx(s).epsilon(1e-12));
}

TEST_CASE("Sobolev norm: parallel equals serial bitwise, norm axioms hold") {
  auto lat = lat1(2, 5);
  Box unit{{0}, {lat.S}};
  auto f = hsf1([](double x, double t) { return std::sin(3.14159 * x) * t; });
  auto g = hsf1([](double x, double t) { return std::cos(3.14159 * x) + t * t; });
  auto w = Weight::power_t(1, 0.25);

  auto p = weighted_sobolev_norm(lat, f, w, unit, 0.25, 1.0, 1, true);
  auto sref = weighted_sobolev_norm(lat, f, w, unit, 0.25, 1.0, 1, false);
  CHECK(p.value == sref.value);  // bitwise

  auto f3 = hsf1([](double x, double t) { return 3.0 * (std::sin(3.14159 * x) * t); });
  CHECK(weighted_sobolev_norm(lat, f3, w, unit, 0.25, 1.0, 1).value ==
        Approx(3.0 * p.value).epsilon(1e-12));

  auto fg = hsf1([](double x, double t) {
    return std::sin(3.14159 * x) * t + std::cos(3.14159 * x) + t * t;
  });
  const double nf = p.value;
  const double ng = weighted_sobolev_norm(lat, g, w, unit, 0.25, 1.0, 1).value;
  const double nfg = weighted_sobolev_norm(lat, fg, w, unit, 0.25, 1.0, 1).value;
  CHECK(nfg <= nf + ng + 1e-9);
}

TEST_CASE("second-order norm includes mixed and pure second derivatives") {
  auto lat = lat1(2, 5);
  Box unit{{0}, {lat.S}};
  auto f = hsf1([](double x, double t) { return x * t; });  // d2/dxdt = 1
  auto r = weighted_sobolev_norm(lat, f, Weight::constant(1, 1.0), unit, 0.25, 0.75, 2);
  double mixed = -1.0;
  for (const auto& [name, v] : r.breakdown)
    if (name == "D(1,1)") mixed = v;
  CHECK(mixed == Approx(0.5).epsilon(1e-6));  // integral of 1 over (0,1)x(.25,.75)
}

TEST_CASE("trace of explicit functions") {
  auto lat = lat1(4, 6);
  auto f = hsf1([](double x, double t) { return x + t; });
  auto tr = trace_of(lat, f, DyadicCube{0, {1}}, 6, {1e-3, 5e-4, 2.5e-4});
  CHECK(tr.converged);
  CHECK(tr.decreasing);
  CHECK(tr.residual == Approx(5e-4).epsilon(1e-6));
  // values are x at cell centers inside (1,2), zero elsewhere
  CHECK(tr.trace.at({64}) == Approx(1.0 + 0.5 / 64 + 2.5e-4));
  CHECK(tr.trace.at({0}) == 0.0);

  auto g = hsf1([](double x, double t) { return std::exp(-t) * std::sin(x); });
  auto tr2 = trace_of(lat, g, DyadicCube{1, {3}}, 6, {1e-4, 5e-5});
  const double xc = 1.5 + 0.5 / 64;
  CHECK(tr2.trace.at({i64(xc * 64)}) == Approx(std::sin(xc)).epsilon(1e-4));
}

TEST_CASE("difference modulus worked values") {
  auto saw = sample_grid(1, 4, 6, [](const std::vector<double>& x) { return x[0]; });
  // on the translated unit cube no periodic wrap occurs: exactly 1
  CHECK(delta_modulus(saw, DyadicCube{0, {1}}, 1) == Approx(1.0).epsilon(1e-12));
  auto cst = sample_grid(1, 4, 6, [](const std::vector<double>&) { return 7.0; });
  CHECK(delta_modulus(cst, DyadicCube{0, {1}}, 1) == Approx(0.0));
  CHECK(delta_modulus(cst, DyadicCube{1, {3}}, 2) == Approx(0.0));
  // second difference annihilates affine data (away from the wrap seam)
  auto aff = sample_grid(1, 4, 6, [](const std::vector<double>& x) { return 2 * x[0] + 1; });
  CHECK(delta_modulus(aff, DyadicCube{2, {6}}, 2) == Approx(0.0).epsilon(1e-12));
  // homogeneity of degree 1
  auto saw2 = saw;
  for (auto& v : saw2.v) v *= 3.0;
  CHECK(delta_modulus(saw2, DyadicCube{0, {1}}, 1) ==
        Approx(3.0 * delta_modulus(saw, DyadicCube{0, {1}}, 1)));
}

TEST_CASE("difference modulus in two dimensions") {
  auto g2 = sample_grid(2, 4, 4, [](const std::vector<double>& x) { return x[0]; });
  // integrand |h_1| over x in Q, h in [-1,1)^2: the h_2 axis contributes its
  // length 2, the h_1 axis the discrete sum of |h_1|
  const double v = delta_modulus(g2, DyadicCube{0, {1, 1}}, 1);
  double h1sum = 0.0;
  const i64 N = 16;
  for (i64 j = -N; j < N; ++j) h1sum += std::fabs(double(j) / double(N)) / double(N);
  CHECK(v == Approx(2.0 * h1sum).epsilon(1e-12));
}

TEST_CASE("best L1 approximation by constants and affine") {
  auto saw = sample_grid(1, 4, 6, [](const std::vector<double>& x) { return x[0]; });
  CHECK(best_l1_poly_error(saw, DyadicCube{0, {1}}, 1) == Approx(0.25).epsilon(1e-12));
  auto cst = sample_grid(1, 4, 6, [](const std::vector<double>&) { return 2.5; });
  CHECK(best_l1_poly_error(cst, DyadicCube{0, {2}}, 1) == Approx(0.0));
  CHECK(best_l1_poly_error(saw, DyadicCube{0, {1}}, 2) == Approx(0.0).epsilon(1e-9));

  // E <= int |phi - phi_Q| <= 2E on random data
  std::mt19937 rng(5);
  auto lat = lat1(4, 6);
  for (int it = 0; it < 20; ++it) {
    GridFunction phi;
    phi.n = 1;
    phi.M = 4;
    phi.d = 6;
    phi.v.resize(std::size_t(phi.size()));
    for (auto& v : phi.v) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    DyadicCube Q{1, {i64(rng() % 8)}};
    const double E = best_l1_poly_error(phi, Q, 1);
    const double avg = cell_average(lat, phi, cube_box(lat, Q));
    double dev = 0.0;
    const i64 Nq = 32, base = Q.m[0] * Nq;
    for (i64 i = 0; i < Nq; ++i) dev += std::fabs(phi.at({base + i}) - avg) / 64.0;
    CHECK(E <= dev * (1 + 1e-12));
    CHECK(dev <= 2 * E * (1 + 1e-12));
  }
}

TEST_CASE("cell averages with boundary fractions and wrap multiplicity") {
  auto lat = lat1(4, 6);
  auto saw = sample_grid(1, 4, 6, [](const std::vector<double>& x) { return x[0]; });
  auto cst = sample_grid(1, 4, 6, [](const std::vector<double>&) { return 3.25; });
  CHECK(cell_average(lat, cst, Box{{5}, {77}}) == Approx(3.25));
  // aligned box away from the seam: mean of cell centers
  CHECK(cell_average(lat, saw, cube_box(lat, DyadicCube{1, {2}})) == Approx(1.25));
  // half-cell offsets weight boundary cells by exact fractions
  const i64 pu = lat.S >> 6;
  Box b{{lat.S + pu / 2}, {lat.S}};
  double manual = 0.0, volw = 0.0;
  for (i64 c = 64; c <= 128; ++c) {
    const double wgt = (c == 64 || c == 128) ? 0.5 : 1.0;
    manual += wgt * saw.at({c});
    volw += wgt;
  }
  CHECK(cell_average(lat, saw, b) == Approx(manual / volw).epsilon(1e-12));
  // a full double wrap averages the whole function
  double all = 0.0;
  for (double v : saw.v) all += v;
  CHECK(cell_average(lat, saw, Box{{13}, {2 * lat.W}}) ==
        Approx(all / double(saw.v.size())).epsilon(1e-12));
  // linearity
  GridFunction mix = saw;
  for (std::size_t i = 0; i < mix.v.size(); ++i) mix.v[i] = 2 * saw.v[i] + cst.v[i];
  Box rb{{37}, {501}};
  CHECK(cell_average(lat, mix, rb) ==
        Approx(2 * cell_average(lat, saw, rb) + cell_average(lat, cst, rb)).epsilon(1e-12));
}

TEST_CASE("L1 norm over a cube") {
  auto g = sample_grid(1, 4, 4, [](const std::vector<double>& x) { return x[0] - 2.0; });
  // |x-2| over (1,2): cell centers symmetric, integral 1/2
  CHECK(l1_on_cube(g, DyadicCube{0, {1}}) == Approx(0.5).epsilon(1e-12));
}
