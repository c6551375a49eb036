#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tracelab/extension.hpp"

using namespace tracelab;
using doctest::Approx;

namespace {

GridFunction grid1(int M, int d, std::function<double(double)> f) {
  return sample_grid(1, M, d, [f](const std::vector<double>& x) { return f(x[0]); });
}

TilingSystem uniform_system(const Lattice& lat, const WeightScales& sc,
                            std::vector<int> levels) {
  LevelSchedule sched;
  sched.l = std::move(levels);
  return build_admissible_system(lat, sc, sched, 64.0, 1);
}

i64 imod(i64 a, i64 b) {
  i64 r = a % b;
  return r < 0 ? r + b : r;
}

// closed level-k cube strictly inside the open (periodic) box
bool closed_in_open(const Lattice& lat, int k, const std::vector<i64>& m,
                    const Box& b) {
  const i64 side = lat.side_units(k);
  for (int i = 0; i < lat.n; ++i) {
    if (b.len[std::size_t(i)] > lat.W) continue;
    bool ok = false;
    const i64 mr = imod(m[std::size_t(i)], lat.cells_per_axis(k));
    for (i64 j = 0; j <= 2 && !ok; ++j)
      ok = mr * side + j * lat.W > b.lo[std::size_t(i)] &&
           (mr + 1) * side + j * lat.W < b.lo[std::size_t(i)] + b.len[std::size_t(i)];
    if (!ok) return false;
  }
  return true;
}

void brute_force_owner_check(const Lattice& lat, const PartitionFamily& fam) {
  for (int k = 0; k <= fam.K; ++k) {
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(k);
    REQUIRE(i64(fam.owner[std::size_t(k)].size()) == cells);
    for (i64 lin = 0; lin < cells; ++lin) {
      const int p = fam.owner[std::size_t(k)][std::size_t(lin)];
      REQUIRE(p >= 0);
      const DyadicCube q = cube_from_linear(lat, k, lin);
      // the owner contains the pair...
      CHECK(closed_in_open(lat, k, q.m, dilate(lat, fam.cubes[std::size_t(p)])));
      // ...and no strictly smaller cube at the same or a later stage does
      for (std::size_t o = 0; o < fam.cubes.size(); ++o)
        if (fam.stage[o] >= fam.stage[std::size_t(p)] &&
            fam.cubes[o].k > fam.cubes[std::size_t(p)].k)
          CHECK_FALSE(closed_in_open(lat, k, q.m, dilate(lat, fam.cubes[o])));
    }
  }
  // the stored index sets agree with the owner map and are disjoint
  i64 total = 0;
  for (std::size_t p = 0; p < fam.e_set.size(); ++p)
    for (auto [k, lin] : fam.e_set[p]) {
      CHECK(fam.owner[std::size_t(k)][std::size_t(lin)] == int(p));
      ++total;
    }
  i64 expect = 0;
  for (int k = 0; k <= fam.K; ++k) {
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(k);
    expect += cells;
  }
  CHECK(total == expect);
}

}  // namespace

TEST_CASE("mollifier bump normalizes and solves the moment system") {
  for (int n : {1, 2}) {
    auto s1 = MollifierSpec::make(n, 1);
    CHECK(s1.integral_quadrature() == Approx(1.0).epsilon(1e-10));
    REQUIRE(s1.mu.size() == 1);
    CHECK(s1.mu[0] == Approx(1.0).epsilon(1e-12));

    // the order-2 weights are 5/3, -2/3 independently of the bump moments
    auto s2 = MollifierSpec::make(n, 2);
    REQUIRE(s2.mu.size() == 2);
    CHECK(s2.mu[0] == Approx(5.0 / 3.0).epsilon(1e-9));
    CHECK(s2.mu[1] == Approx(-2.0 / 3.0).epsilon(1e-9));
  }
  auto s3 = MollifierSpec::make(1, 3);
  REQUIRE(s3.mu.size() == 3);
  CHECK(s3.mu[0] + s3.mu[1] + s3.mu[2] == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("two-stage mollification reproduces low-degree polynomials") {
  Lattice lat(Window{1, 1, 7}, DilationParam{0});
  auto cst = grid1(1, 8, [](double) { return 3.25; });
  auto aff = grid1(1, 8, [](double x) { return 0.4 + 1.3 * x; });
  auto sq = grid1(1, 8, [](double x) { return x * x - 0.5 * x; });

  auto s2 = MollifierSpec::make(1, 2);
  for (double x : {0.05, 0.31, 0.5, 0.73, 0.99})
    CHECK(mollify_E_eps(lat, cst, 1.0 / 16, s2, {x}) == Approx(3.25).epsilon(1e-9));
  for (double x : {0.31, 0.5, 0.73})
    CHECK(mollify_E_eps(lat, aff, 1.0 / 16, s2, {x}) ==
          Approx(0.4 + 1.3 * x).epsilon(1e-6));

  auto s3 = MollifierSpec::make(1, 3);
  for (double x : {0.35, 0.5, 0.62})
    CHECK(mollify_E_eps(lat, sq, 1.0 / 16, s3, {x}) ==
          Approx(x * x - 0.5 * x).epsilon(1e-5));
}

TEST_CASE("two-stage mollification in two dimensions") {
  Lattice lat(Window{2, 1, 4}, DilationParam{0});
  auto cst = sample_grid(2, 1, 4, [](const std::vector<double>&) { return 1.5; });
  auto aff = sample_grid(2, 1, 4, [](const std::vector<double>& x) {
    return x[0] - 0.5 * x[1];
  });
  auto s1 = MollifierSpec::make(2, 1);
  CHECK(mollify_E_eps(lat, cst, 0.25, s1, {0.5, 0.5}) == Approx(1.5).epsilon(1e-8));
  CHECK(mollify_E_eps(lat, aff, 0.25, s1, {0.5, 0.4}) ==
        Approx(0.5 - 0.5 * 0.4).epsilon(1e-4));
}

TEST_CASE("mollifier rejects radii below the grid resolution") {
  Lattice lat(Window{1, 1, 4}, DilationParam{0});
  auto phi = grid1(1, 4, [](double x) { return x; });
  auto s1 = MollifierSpec::make(1, 1);
  CHECK_THROWS_AS((void)mollify_E_eps(lat, phi, 1.0 / 16, s1, {0.5}),
                  std::invalid_argument);
}

TEST_CASE("smooth extension blends down to the data and vanishes above one") {
  Lattice lat(Window{1, 1, 6}, DilationParam{0});
  auto spec = MollifierSpec::make(1, 2);
  auto cst = grid1(1, 7, [](double) { return 2.5; });
  auto f = extend_smooth(lat, cst, 2, spec);
  for (double t : {0.01, 0.2, 0.5, 0.74})
    CHECK(f.value({0.3}, t) == Approx(2.5).epsilon(1e-8));
  CHECK(f.value({0.3}, 1.0) == 0.0);
  CHECK(f.value({0.9}, 1.4) == 0.0);
  const double mid = f.value({0.3}, 0.9);  // inside the top ramp
  CHECK(mid > 0.0);
  CHECK(mid < 2.5);

  // at t = 0.5 only the eps = 1/2 term is active: the table path must agree
  // with the direct quadrature path
  auto phi = grid1(1, 7, [](double x) { return 1.0 + 0.3 * std::sin(6.2831853 * x); });
  auto g = extend_smooth(lat, phi, 2, spec);
  for (double x : {0.2, 0.55})
    CHECK(g.value({x}, 0.5) ==
          Approx(mollify_E_eps(lat, phi, 0.5, spec, {x})).epsilon(2e-6));
}

TEST_CASE("smooth extension recovers its boundary data and is linear") {
  Lattice lat(Window{1, 1, 6}, DilationParam{0});
  auto spec = MollifierSpec::make(1, 2);
  auto phi = grid1(1, 7, [](double x) { return 1.0 + 0.3 * std::sin(6.2831853 * x); });
  auto psi = grid1(1, 7, [](double x) { return x < 0.5 ? 0.4 : -0.1; });
  auto both = phi;
  for (std::size_t i = 0; i < both.v.size(); ++i) both.v[i] += psi.v[i];

  auto fp = extend_smooth(lat, phi, 2, spec);
  auto fq = extend_smooth(lat, psi, 2, spec);
  auto fb = extend_smooth(lat, both, 2, spec);
  for (double x : {0.1, 0.45, 0.8})
    for (double t : {0.001, 0.3, 0.85})
      CHECK(fb.value({x}, t) ==
            Approx(fp.value({x}, t) + fq.value({x}, t)).epsilon(1e-12));

  // near t = 0 only the finest mollification is active; L1 recovery
  double err = 0.0, mass = 0.0;
  for (int c = 0; c < 128; ++c) {
    const double x = (c + 0.5) / 128.0;
    err += std::fabs(fp.value({x}, 1e-5) - phi.at({c}));
    mass += std::fabs(phi.at({c}));
  }
  CHECK(err <= 1e-2 * mass);
}

TEST_CASE("partition family sums to one with bounded support") {
  Lattice lat(Window{1, 2, 4}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 4);
  auto sys = uniform_system(lat, sc, {0, 1, 2});
  auto fam = build_partition_g(lat, sys);

  // time bumps alone form a partition of unity on (0,2)
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ut(1e-6, 2.0), ux(0.0, 2.0);
  for (int it = 0; it < 100; ++it) {
    const double t = ut(rng);
    double s = 0.0;
    for (int k = 0; k <= fam.K; ++k) s += fam.psi(k, t);
    CHECK(s == Approx(1.0).epsilon(1e-12));
  }
  for (int it = 0; it < 400; ++it) {
    const std::vector<double> x{ux(rng)};
    const double t = ut(rng);
    CHECK(fam.g_sum(x, t) == Approx(1.0).epsilon(1e-10));
    CHECK(fam.support_count(x, t) <= 6);
  }
  // per-pair pieces add back up to one
  for (int it = 0; it < 20; ++it) {
    const std::vector<double> x{ux(rng)};
    const double t = ut(rng);
    double s = 0.0;
    for (std::size_t p = 0; p < fam.cubes.size(); ++p) s += fam.g(p, x, t);
    CHECK(s == Approx(1.0).epsilon(1e-10));
  }

  Lattice bad(Window{1, 2, 4}, DilationParam{1});
  CHECK_THROWS_AS((void)build_partition_g(bad, sys), std::invalid_argument);
}

TEST_CASE("index sets partition every level, brute-force verified") {
  Lattice lat(Window{1, 2, 4}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 4);
  auto fam = build_partition_g(lat, uniform_system(lat, sc, {0, 1, 2}));
  brute_force_owner_check(lat, fam);

  Lattice lat2(Window{2, 1, 3}, DilationParam{0});
  auto sc2 = populate_scales(lat2, Weight::constant(2, 1.0), 3);
  auto fam2 = build_partition_g(lat2, uniform_system(lat2, sc2, {0, 1}));
  brute_force_owner_check(lat2, fam2);

  // mixed-level stages from a weight that freezes cubes early
  Lattice lat3(Window{1, 1, 5}, DilationParam{0});
  auto w3 = Weight::power_t(1, 0.75);
  auto sc3 = populate_scales(lat3, w3, 5);
  LevelSchedule sched;
  sched.l = {0, 4, 5};
  auto sys3 = build_admissible_system(lat3, sc3, sched, 4.0, 1);
  auto fam3 = build_partition_g(lat3, sys3);
  brute_force_owner_check(lat3, fam3);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ut(1e-6, 2.0), ux(0.0, 1.0);
  for (int it = 0; it < 100; ++it)
    CHECK(fam3.g_sum({ux(rng)}, ut(rng)) == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("partition gradient mass stays comparable to the weighted cube mass") {
  Lattice lat(Window{1, 1, 3}, DilationParam{0});
  for (double alpha : {0.0, 0.5}) {
    auto w = alpha == 0.0 ? Weight::constant(1, 1.0) : Weight::power_t(1, alpha);
    auto sc = populate_scales(lat, w, 3);
    auto fam = build_partition_g(lat, uniform_system(lat, sc, {0, 1}));
    const double c = partition_gradient_constant(lat, fam, w, sc);
    CHECK(std::isfinite(c));
    CHECK(c > 0.0);
    CHECK(c <= 64.0);  // measured headroom
  }
}

TEST_CASE("limiting extension reproduces constants and recovers its trace") {
  Lattice lat(Window{1, 1, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 6);
  auto sys = uniform_system(lat, sc, {0, 1, 2, 3, 4, 5, 6});

  auto cst = grid1(1, 6, [](double) { return 1.7; });
  auto fc = extend_limiting(lat, cst, sys);
  for (double t : {1e-4, 0.3, 0.9, 1.7})
    CHECK(fc.value({0.37}, t) == Approx(1.7).epsilon(1e-12));

  auto phi = grid1(1, 6, [](double x) { return 1.5 + 0.05 * std::sin(6.2831853 * x); });
  auto fp = extend_limiting(lat, phi, sys);
  double err = 0.0, mass = 0.0;
  for (int c = 0; c < 64; ++c) {
    const double x = (c + 0.5) / 64.0;
    err += std::fabs(fp.value({x}, 1e-6) - phi.at({c}));
    mass += std::fabs(phi.at({c}));
  }
  CHECK(err <= 1e-2 * mass);
}

TEST_CASE("limiting extension depends on the tiling system") {
  Lattice lat(Window{1, 1, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 6);
  auto sysA = uniform_system(lat, sc, {0, 1, 2});
  auto sysB = uniform_system(lat, sc, {0, 2, 4});
  auto phi = grid1(1, 6, [](double x) { return std::sin(6.2831853 * x); });
  auto fa = extend_limiting(lat, phi, sysA);
  auto fb = extend_limiting(lat, phi, sysB);
  double diff = 0.0;
  for (double x : {0.1, 0.3, 0.55, 0.8})
    for (double t : {0.1, 0.4, 0.9})
      diff = std::max(diff, std::fabs(fa.value({x}, t) - fb.value({x}, t)));
  CHECK(diff > 1e-6);

  // for a fixed system the operator is linear
  auto psi = grid1(1, 6, [](double x) { return x < 0.5 ? 0.2 : -0.3; });
  auto both = phi;
  for (std::size_t i = 0; i < both.v.size(); ++i) both.v[i] += psi.v[i];
  auto fs = extend_limiting(lat, psi, sysA);
  auto fboth = extend_limiting(lat, both, sysA);
  for (double x : {0.15, 0.6})
    for (double t : {0.05, 0.7})
      CHECK(fboth.value({x}, t) ==
            Approx(fa.value({x}, t) + fs.value({x}, t)).epsilon(1e-12));
}
