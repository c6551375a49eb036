#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tracelab/norms.hpp"

using namespace tracelab;
using doctest::Approx;

namespace {

GridFunction grid1(int M, int d, std::function<double(double)> f) {
  return sample_grid(1, M, d, [f](const std::vector<double>& x) { return f(x[0]); });
}

// exhaustive best-constant L1 error over cells of a (possibly wrapping)
// 1-d box, trying every sample value as the constant
double oracle_const_error(const Lattice& lat, const GridFunction& phi, const Box& b) {
  const i64 cpa = phi.cells_per_axis();
  const i64 U = lat.W / cpa;
  std::vector<double> vals;
  for (i64 c = 0; c < cpa; ++c) {
    const double ctr = (double(c) + 0.5) * double(U);
    for (int j = 0; j <= 2; ++j)
      if (b.len[0] >= lat.W ||
          (ctr + j * double(lat.W) > double(b.lo[0]) &&
           ctr + j * double(lat.W) < double(b.lo[0] + b.len[0]))) {
        vals.push_back(phi.at({c}));
        break;
      }
  }
  double best = 0.0;
  bool first = true;
  for (double cand : vals) {
    double e = 0.0;
    for (double v : vals) e += std::fabs(v - cand);
    if (first || e < best) best = e, first = false;
  }
  return best * std::ldexp(1.0, -phi.d);
}

TilingSystem uniform_system(const Lattice& lat, const WeightScales& sc,
                            std::vector<int> levels) {
  LevelSchedule sched;
  sched.l = std::move(levels);
  return build_admissible_system(lat, sc, sched, 64.0, 1);
}

}  // namespace

TEST_CASE("best L1 box errors: worked values and polynomial reproduction") {
  Lattice lat(Window{1, 2, 6}, DilationParam{0});
  auto saw = grid1(2, 6, [](double x) { return x; });
  auto sq = grid1(2, 6, [](double x) { return x * x; });
  auto cst = grid1(2, 6, [](double) { return 4.5; });
  const Box unit{{0}, {lat.S}};
  CHECK(best_l1_box_error(lat, saw, unit, 1) == Approx(0.25).epsilon(1e-12));
  for (int l : {1, 2, 3}) CHECK(best_l1_box_error(lat, cst, unit, l) == Approx(0.0));
  CHECK(best_l1_box_error(lat, saw, unit, 2) == Approx(0.0).epsilon(1e-9));
  CHECK(best_l1_box_error(lat, sq, unit, 3) == Approx(0.0).epsilon(1e-9));
  CHECK(best_l1_box_error(lat, sq, unit, 2) > 1e-3);
}

TEST_CASE("best L1 box errors agree with the exhaustive oracle, wrap included") {
  std::mt19937 rng(31);
  Lattice lat(Window{1, 2, 5}, DilationParam{0});
  GridFunction phi;
  phi.n = 1;
  phi.M = 2;
  phi.d = 5;
  phi.v.resize(std::size_t(phi.size()));
  for (int it = 0; it < 12; ++it) {
    for (auto& v : phi.v) v = std::uniform_real_distribution<double>(-2, 2)(rng);
    const i64 lo = i64(rng() % std::uint64_t(lat.W));
    const i64 len = 8 * (1 + i64(rng() % 70));
    const Box b{{lo / 8 * 8}, {std::min(len, lat.W + 8)}};
    CHECK(best_l1_box_error(lat, phi, b, 1) ==
          Approx(oracle_const_error(lat, phi, b)).epsilon(1e-12));
  }
}

TEST_CASE("Besov norm: zero, constant, and affine worked values") {
  Lattice lat(Window{1, 2, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 4);
  auto zero = grid1(2, 6, [](double) { return 0.0; });
  auto c3 = grid1(2, 6, [](double) { return 3.0; });

  for (bool use_E : {false, true}) {
    BesovParams p{2, 3, use_E};
    CHECK(besov_variable_norm(lat, zero, sc, p).value == Approx(0.0));
    // second differences and best-affine errors vanish: level-0 term only
    CHECK(besov_variable_norm(lat, c3, sc, p).value == Approx(6.0).epsilon(1e-9));
  }

  // affine data: every interior-safe cube contributes zero
  auto aff = grid1(2, 6, [](double x) { return 2 * x + 1; });
  auto rep = besov_variable_norm(lat, aff, sc, BesovParams{2, 3, false});
  for (const auto& [name, v] : rep.breakdown) {
    int k = 0;
    long long m = 0;
    REQUIRE(std::sscanf(name.c_str(), "k=%d m=%lld", &k, &m) == 2);
    if (k >= 1 && m >= 2 && m + 3 <= (2LL << k))
      CHECK(v == Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("Besov norm: homogeneity and monotone truncation") {
  Lattice lat(Window{1, 2, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::power_t(1, 0.5), 4);
  auto phi = grid1(2, 6, [](double x) { return std::sin(3 * x) + 0.2 * x; });
  auto phi3 = phi;
  for (auto& v : phi3.v) v *= 3.0;
  for (int l : {1, 2}) {
    const double b1 = besov_variable_norm(lat, phi, sc, BesovParams{l, 3}).value;
    CHECK(besov_variable_norm(lat, phi3, sc, BesovParams{l, 3}).value ==
          Approx(3.0 * b1).epsilon(1e-12));
    double prev = 0.0;
    for (int kmax = 1; kmax <= 4; ++kmax) {
      const double v = besov_variable_norm(lat, phi, sc, BesovParams{l, kmax}).value;
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("Besov norm rejects bad parameters naming the missing entry") {
  Lattice lat(Window{1, 2, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 2);
  auto phi = grid1(2, 6, [](double x) { return x; });
  CHECK_THROWS_AS((void)besov_variable_norm(lat, phi, sc, BesovParams{2, 0}),
                  std::invalid_argument);
  CHECK_THROWS_WITH_AS((void)besov_variable_norm(lat, phi, sc, BesovParams{2, 3}),
                       "scale table missing hat_gamma(k=3,m=0)", std::runtime_error);
}

TEST_CASE("Z-functional of a constant is the weighted level-0 mass") {
  Lattice lat(Window{1, 2, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 4);
  auto sys = uniform_system(lat, sc, {0, 1, 2});
  auto c = grid1(2, 6, [](double) { return 2.5; });
  CHECK(z_functional(lat, c, sys, sc).value == Approx(5.0).epsilon(1e-12));
}

TEST_CASE("Z-functional matches a brute-force evaluation of the saw function") {
  Lattice lat(Window{1, 1, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 4);
  auto sys = uniform_system(lat, sc, {0, 1, 2});
  auto saw = grid1(1, 6, [](double x) { return x; });

  double expect = l1_on_cube(saw, DyadicCube{0, {0}});  // hat = 1 everywhere
  for (std::size_t s = 1; s < sys.stages.size(); ++s)
    for (auto i : sys.selected[s])
      expect += oracle_const_error(lat, saw, dilate(lat, sys.stages[s][i].cube));
  auto rep = z_functional(lat, saw, sys, sc);
  CHECK(rep.value == Approx(expect).epsilon(1e-12));
  CHECK(rep.value > 0.0);
}

TEST_CASE("Z-functional homogeneity and library minimum") {
  Lattice lat(Window{1, 2, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 5);
  std::vector<TilingSystem> lib;
  lib.push_back(uniform_system(lat, sc, {0, 1, 2}));
  lib.push_back(uniform_system(lat, sc, {0, 2, 4}));
  lib.push_back(uniform_system(lat, sc, {0, 1, 2, 3, 4, 5}));
  auto phi = grid1(2, 6, [](double x) { return std::cos(2 * x) + 0.3 * x; });
  auto best = z_functional_best(lat, phi, lib, sc);
  for (const auto& sys : lib) {
    const double v = z_functional(lat, phi, sys, sc).value;
    CHECK(best.value <= v * (1 + 1e-12));
  }
  auto phi2 = phi;
  for (auto& v : phi2.v) v *= 2.0;
  auto sys = lib[0];
  CHECK(z_functional(lat, phi2, sys, sc).value ==
        Approx(2.0 * z_functional(lat, phi, sys, sc).value).epsilon(1e-12));
}

TEST_CASE("Z-functional rejects inadmissible systems with the failing condition") {
  Lattice lat(Window{1, 2, 4}, DilationParam{1});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 2);
  TilingSystem sys;
  std::vector<ColoredCube> stage;
  for (i64 m = 0; m < lat.cells_per_axis(1); ++m)
    stage.push_back({DyadicCube{1, {m}}, CubeColor::yellow});
  sys.stages = {stage, stage};
  sys.stage_level = {1, 1};
  sys.selected = {select_cover(lat, stage), select_cover(lat, stage)};
  sys.c1 = sys.c2 = 8.0;
  auto phi = grid1(2, 4, [](double x) { return x; });
  CHECK_THROWS_WITH_AS((void)z_functional(lat, phi, sys, sc),
                       "inadmissible system: dilated successor sides halve",
                       std::invalid_argument);
}

TEST_CASE("measured embedding constants stay bounded on a small corpus") {
  Lattice lat(Window{1, 2, 6}, DilationParam{0});
  auto sc = populate_scales(lat, Weight::constant(1, 1.0), 5);
  std::vector<TilingSystem> lib;
  lib.push_back(uniform_system(lat, sc, {0, 1, 2, 3}));
  lib.push_back(uniform_system(lat, sc, {0, 2, 4}));
  std::vector<GridFunction> corpus;
  corpus.push_back(grid1(2, 6, [](double x) { return x; }));
  corpus.push_back(grid1(2, 6, [](double x) { return std::sin(3.14159 * x); }));
  corpus.push_back(grid1(2, 6, [](double x) { return x < 1.0 ? 1.0 : -1.0; }));
  double c_embed = 0.0, c_gag = 0.0;
  for (const auto& phi : corpus) {
    const double z = z_functional_best(lat, phi, lib, sc).value;
    const double b1 = besov_variable_norm(lat, phi, sc, BesovParams{1, 5}).value;
    double l1 = 0.0;
    for (i64 m = 0; m < 2; ++m) l1 += l1_on_cube(phi, DyadicCube{0, {m}});
    REQUIRE(b1 > 0.0);
    REQUIRE(l1 > 0.0);
    c_embed = std::max(c_embed, z / b1);
    c_gag = std::max(c_gag, z / l1);
  }
  CHECK(std::isfinite(c_embed));
  CHECK(c_embed <= 4.0);  // measured headroom over the corpus
  CHECK(std::isfinite(c_gag));
  CHECK(c_gag <= 16.0);
}
