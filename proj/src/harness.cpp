#include "tracelab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

namespace tracelab {

namespace {

using nlohmann::json;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

// --- function catalog -------------------------------------------------------------

std::function<double(const std::vector<double>&)> catalog_evaluator(
    const std::string& name, int M, unsigned seed) {
  const double tau = 6.283185307179586;
  if (name == "constant")
    return [](const std::vector<double>&) { return 1.5; };
  if (name == "saw")
    return [](const std::vector<double>& x) {
      double s = 0.0;
      for (double v : x) s += v;
      return s;
    };
  if (name == "step")
    return [M](const std::vector<double>& x) { return x[0] < 0.5 * M ? 1.0 : -1.0; };
  if (name == "sin")
    return [tau, M](const std::vector<double>& x) {
      double p = 1.0;
      for (double v : x) p *= std::sin(tau * v / M);
      return 1.0 + p;
    };
  if (name == "sin2")
    return [tau, M](const std::vector<double>& x) {
      double p = 1.0;
      for (double v : x) p *= std::sin(2 * tau * v / M + 0.3);
      return 0.5 + p;
    };
  if (name == "bump")
    return [M](const std::vector<double>& x) {
      double r2 = 0.0;
      for (double v : x) r2 += (v - 0.5 * M) * (v - 0.5 * M);
      return std::exp(-4.0 * r2);
    };
  if (name.rfind("ripple", 0) == 0 && name.size() > 6) {
    // low-oscillation family: large mean, gentle seeded harmonics, so the
    // amplitude-to-mass ratio stays small
    const int id = std::atoi(name.c_str() + 6);
    if (id <= 0) throw ConfigError("unknown catalog function: " + name);
    std::mt19937 rng(seed * 2003u + unsigned(id));
    std::uniform_real_distribution<double> ph(0.0, tau);
    std::vector<double> phase;
    for (int i = 0; i < 8; ++i) phase.push_back(ph(rng));
    return [tau, M, id, phase](const std::vector<double>& x) {
      double s = 1.5;
      for (std::size_t i = 0; i < x.size(); ++i) {
        s += 0.04 * std::sin(tau * x[i] / M + phase[2 * i]);
        s += 0.02 * std::sin(tau * (1 + id % 2) * x[i] / M + phase[2 * i + 1]);
      }
      return s;
    };
  }
  if (name == "quad")
    return [M](const std::vector<double>& x) {
      double s = 0.0;
      for (double v : x) s += (v - 0.5 * M) * (v - 0.5 * M);
      return s;
    };
  if (name.rfind("mix", 0) == 0) {
    const int id = std::atoi(name.c_str() + 3);
    if (id <= 0) throw ConfigError("unknown catalog function: " + name);
    std::mt19937 rng(seed * 1009u + unsigned(id));
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    // coefficients drawn once; evaluation stays cheap
    std::vector<double> as, bs;
    for (int i = 0; i < 9; ++i) {
      as.push_back(amp(rng));
      bs.push_back(amp(rng));
    }
    return [tau, M, as, bs](const std::vector<double>& x) {
      double s = 0.3;
      for (std::size_t i = 0; i < x.size(); ++i)
        for (int j = 1; j <= 3; ++j) {
          const std::size_t c = 3 * i + std::size_t(j - 1);
          s += as[c] * std::sin(tau * j * x[i] / M + bs[c]);
        }
      return s;
    };
  }
  throw ConfigError("unknown catalog function: " + name);
}

double catalog_value(const std::string& name, const std::vector<double>& x, int M,
                     unsigned seed) {
  return catalog_evaluator(name, M, seed)(x);
}

double smooth_decay(double t) {
  if (t >= 1.0) return 0.0;
  const double c = std::cos(1.5707963267948966 * t);
  return c * c;
}

}  // namespace

GridFunction catalog_grid(const std::string& name, int n, int M, int d,
                          unsigned seed) {
  return sample_grid(n, M, d, catalog_evaluator(name, M, seed));
}

HalfSpaceFunction catalog_halfspace(const std::string& name, int n, int M,
                                    unsigned seed) {
  auto eval = catalog_evaluator(name, M, seed);
  HalfSpaceFunction f;
  f.n = n;
  f.f = [eval](const std::vector<double>& x, double t) {
    return eval(x) * smooth_decay(t);
  };
  return f;
}

// --- configuration -----------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.suite = j.value("suite", cfg.suite);
    cfg.n = j.value("n", cfg.n);
    cfg.M = j.value("M", cfg.M);
    cfg.depth = j.value("depth", cfg.depth);
    cfg.k0 = j.value("k0", cfg.k0);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.r = j.value("r", cfg.r);
    cfg.q = j.value("q", cfg.q);
    cfg.bound_c = j.value("bound_c", cfg.bound_c);
    cfg.tolerance = j.value("tolerance", cfg.tolerance);
    cfg.cases = j.value("cases", cfg.cases);
    cfg.grid_depth = j.value("grid_depth", cfg.grid_depth);
    if (j.contains("functions"))
      cfg.functions = j["functions"].get<std::vector<std::string>>();
    if (j.contains("weight")) {
      const auto& w = j["weight"];
      cfg.weight_kind = w.value("kind", cfg.weight_kind);
      cfg.alpha = w.value("alpha", cfg.alpha);
      cfg.c = w.value("c", cfg.c);
      if (w.contains("coefficients"))
        cfg.coefficients = w["coefficients"].get<std::vector<double>>();
      cfg.cells_per_unit = w.value("cells_per_unit", cfg.cells_per_unit);
      cfg.period = w.value("period", cfg.period);
    }
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  if (cfg.n < 1 || cfg.n > 3) throw ConfigError("n must be 1, 2 or 3");
  if (cfg.M < 1 || cfg.M > 8) throw ConfigError("M must be in 1..8");
  if (cfg.depth < 1 || cfg.depth > 10) throw ConfigError("depth must be in 1..10");
  if (cfg.r < 1) throw ConfigError("r must be positive");
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

Weight weight_from_config(const ExperimentConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.alpha >= 1.0)
    throw ConfigError("alpha must lie in [0,1)");
  if (cfg.weight_kind == "constant") return Weight::constant(cfg.n, cfg.c);
  if (cfg.weight_kind == "power_t") return Weight::power_t(cfg.n, cfg.alpha, cfg.c);
  if (cfg.weight_kind == "step_power" || cfg.weight_kind == "piecewise_cells") {
    if (cfg.coefficients.empty())
      throw ConfigError("weight kind needs coefficients");
    for (double v : cfg.coefficients)
      if (!(v > 0.0)) throw ConfigError("weight coefficients must be positive");
    if (cfg.weight_kind == "step_power")
      return Weight::step_power(cfg.n, cfg.coefficients, cfg.cells_per_unit,
                                cfg.period, cfg.alpha, cfg.c);
    return Weight::piecewise_cells(cfg.n, cfg.coefficients, cfg.period);
  }
  throw ConfigError("unknown weight kind: " + cfg.weight_kind);
}

// --- exports -----------------------------------------------------------------------

void write_scales_csv(std::ostream& os, const Lattice& lat, const WeightScales& sc) {
  os << "k";
  for (int i = 0; i < lat.n; ++i) os << ",m" << i + 1;
  os << ",hat_gamma\n";
  for (int k = 0; k <= sc.depth; ++k) {
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(k);
    for (i64 lin = 0; lin < cells; ++lin) {
      const DyadicCube q = cube_from_linear(lat, k, lin);
      os << k;
      for (int i = 0; i < lat.n; ++i) os << ',' << q.m[std::size_t(i)];
      os << ',' << fmt(sc.hat_gamma(k, lin)) << '\n';
    }
  }
}

void write_norm_csv(std::ostream& os, const NormReport& rep) {
  os << "term,value\n";
  for (const auto& [name, v] : rep.breakdown) os << name << ',' << fmt(v) << '\n';
  os << "total," << fmt(rep.value) << '\n';
}

void write_tiling_svg(std::ostream& os, const Lattice& lat, const TilingSystem& sys) {
  const double px = 420.0 / lat.M;               // pixels per unit length
  const double bandh = lat.n == 1 ? 48.0 : lat.M * px + 16.0;
  const double width = lat.M * px + 40.0;
  const double height = bandh * double(sys.stages.size()) + 24.0;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  for (std::size_t s = 0; s < sys.stages.size(); ++s) {
    os << "<g id=\"stage-" << s << "\" transform=\"translate(20,"
       << 12.0 + bandh * double(s) << ")\">\n";
    for (std::size_t i = 0; i < sys.stages[s].size(); ++i) {
      const auto& cc = sys.stages[s][i];
      const double side = px * std::ldexp(1.0, -cc.cube.k);
      const bool kept = std::find(sys.selected[s].begin(), sys.selected[s].end(),
                                  i) != sys.selected[s].end();
      const char* fill = cc.color == CubeColor::blue ? "#4c7df7" : "#f7d34c";
      os << "<rect x=\"" << double(cc.cube.m[0]) * side << "\" y=\""
         << (lat.n == 1 ? 0.0 : double(cc.cube.m[1]) * side) << "\" width=\""
         << side << "\" height=\"" << (lat.n == 1 ? 32.0 : side) << "\" fill=\""
         << fill << "\" stroke=\"#333\" stroke-width=\"1\" fill-opacity=\""
         << (kept ? "0.9" : "0.3") << "\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
}

void write_norm_svg(std::ostream& os, const NormReport& rep) {
  const std::size_t nb = rep.breakdown.size();
  double vmax = 0.0;
  for (const auto& [name, v] : rep.breakdown) vmax = std::max(vmax, std::fabs(v));
  if (vmax <= 0.0) vmax = 1.0;
  const double bw = 12.0, h = 220.0;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
     << 20.0 + bw * double(nb) << "\" height=\"" << h + 30.0 << "\">\n";
  for (std::size_t i = 0; i < nb; ++i) {
    const double bh = h * std::fabs(rep.breakdown[i].second) / vmax;
    os << "<rect x=\"" << 10.0 + bw * double(i) << "\" y=\"" << 10.0 + h - bh
       << "\" width=\"" << bw - 2.0 << "\" height=\"" << bh
       << "\" fill=\"#4c7df7\"><title>" << rep.breakdown[i].first << " = "
       << fmt(rep.breakdown[i].second) << "</title></rect>\n";
  }
  os << "</svg>\n";
}

void write_system(std::ostream& os, const Lattice& lat, const TilingSystem& sys) {
  os << "system " << sys.r << ' ' << fmt(sys.q) << ' ' << fmt(sys.c1) << ' '
     << fmt(sys.c2) << ' ' << (sys.truncated ? 1 : 0) << '\n';
  os << "schedule " << sys.schedule.l.size();
  for (int l : sys.schedule.l) os << ' ' << l;
  os << '\n';
  os << "stagelevels " << sys.stage_level.size();
  for (int l : sys.stage_level) os << ' ' << l;
  os << '\n';
  os << "stages " << sys.stages.size() << '\n';
  for (std::size_t s = 0; s < sys.stages.size(); ++s) {
    os << "stage\n";
    write_tiling(os, lat, sys.stages[s]);
    os << "selected " << sys.selected[s].size();
    for (auto i : sys.selected[s]) os << ' ' << i;
    os << '\n';
  }
  os << "end\n";
}

TilingSystem read_system(std::istream& is, Lattice& lat_out) {
  auto expect = [&](const char* kw) {
    std::string tok;
    if (!(is >> tok) || tok != kw)
      throw std::runtime_error(std::string("bad system file: expected ") + kw);
  };
  TilingSystem sys;
  expect("system");
  int trunc = 0;
  if (!(is >> sys.r >> sys.q >> sys.c1 >> sys.c2 >> trunc))
    throw std::runtime_error("bad system header");
  sys.truncated = trunc != 0;
  expect("schedule");
  std::size_t len = 0;
  is >> len;
  sys.schedule.l.resize(len);
  for (auto& l : sys.schedule.l) is >> l;
  sys.schedule.truncated = sys.truncated;
  expect("stagelevels");
  is >> len;
  sys.stage_level.resize(len);
  for (auto& l : sys.stage_level) is >> l;
  expect("stages");
  std::size_t S = 0;
  is >> S;
  for (std::size_t s = 0; s < S; ++s) {
    expect("stage");
    sys.stages.push_back(read_tiling(is, lat_out));
    is.clear();  // read_tiling stops at the next keyword
    expect("selected");
    std::size_t cnt = 0;
    is >> cnt;
    std::vector<std::size_t> sel(cnt);
    for (auto& i : sel) is >> i;
    sys.selected.push_back(std::move(sel));
  }
  expect("end");
  if (!is) throw std::runtime_error("bad system file");
  return sys;
}

void export_report(const SuiteReport& rep, const std::string& path,
                   const std::string& format) {
  auto os = open_out(path);
  if (format == "csv") {
    // byte-deterministic: no runtimes
    os << "check,pass,measured,limit\n";
    for (const auto& c : rep.checks)
      os << c.name << ',' << (c.pass ? 1 : 0) << ',' << fmt(c.measured) << ','
         << fmt(c.limit) << '\n';
  } else if (format == "text") {
    os << "suite " << rep.suite << (rep.ok ? " PASS" : " FAIL") << '\n';
    for (const auto& c : rep.checks) {
      char line[256];
      std::snprintf(line, sizeof line, "%-4s %-52s measured=%-12.6g limit=%-12.6g %.2fs\n",
                    c.pass ? "PASS" : "FAIL", c.name.c_str(), c.measured, c.limit,
                    c.seconds);
      os << line;
    }
  } else if (format == "svg") {
    const double bw = 26.0, h = 200.0;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
       << 20.0 + bw * double(rep.checks.size()) << "\" height=\"" << h + 30.0
       << "\">\n";
    for (std::size_t i = 0; i < rep.checks.size(); ++i) {
      const auto& c = rep.checks[i];
      const double ratio =
          c.limit > 0.0 ? std::min(1.0, std::fabs(c.measured) / c.limit) : 1.0;
      os << "<rect x=\"" << 10.0 + bw * double(i) << "\" y=\""
         << 10.0 + h * (1.0 - ratio) << "\" width=\"" << bw - 4.0 << "\" height=\""
         << h * ratio << "\" fill=\"" << (c.pass ? "#3cb371" : "#d9534f")
         << "\"><title>" << c.name << "</title></rect>\n";
    }
    os << "</svg>\n";
  } else {
    throw std::invalid_argument("unknown report format: " + format);
  }
}

// --- suites -------------------------------------------------------------------------

namespace {

struct Timer {
  double start = now_seconds();
  double lap() { return now_seconds() - start; }
};

CheckResult check(const std::string& name, double measured, double limit,
                  bool pass, double secs) {
  return CheckResult{name, pass, measured, limit, secs};
}

std::vector<ColoredCube> random_tiling(const Lattice& lat, std::mt19937& rng,
                                       int splits) {
  std::vector<DyadicCube> cur;
  i64 cells = 1;
  for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(0);
  for (i64 lin = 0; lin < cells; ++lin) cur.push_back(cube_from_linear(lat, 0, lin));
  for (int s = 0; s < splits; ++s) {
    const std::size_t pick = rng() % cur.size();
    if (cur[pick].k >= lat.d_max) continue;
    auto kids = children_of(lat, cur[pick]);
    cur.erase(cur.begin() + std::ptrdiff_t(pick));
    cur.insert(cur.end(), kids.begin(), kids.end());
  }
  std::vector<ColoredCube> out;
  for (auto& q : cur) out.push_back({std::move(q), CubeColor::yellow});
  return out;
}

Box window_box(const Lattice& lat) {
  Box b;
  b.lo.assign(std::size_t(lat.n), 0);
  b.len.assign(std::size_t(lat.n), lat.W);
  return b;
}

double measured_q(const Lattice& lat, const Weight& w, const WeightScales& sc,
                  const ExperimentConfig& cfg) {
  if (cfg.q > 0.0) return cfg.q;
  return 2.0 * q_parameters(lat, w, sc).q;  // safety factor on the finite estimate
}

LevelSchedule full_schedule(int depth) {
  LevelSchedule s;
  for (int l = 0; l <= depth; ++l) s.l.push_back(l);
  return s;
}

SuiteReport suite_lemma41(const ExperimentConfig& cfg, const std::string&) {
  SuiteReport rep;
  rep.suite = "lemma4.1";
  const Lattice lat(Window{cfg.n, cfg.M, std::min(cfg.depth, 6)},
                    DilationParam{cfg.k0});
  const int mult_limit = (lat.n + 1) * (1 << lat.n);
  int worst_mult = 0, worst_min = 1;
  i64 worst_overlap_margin = 0;
  bool nonredundant = true;
  const int cases = std::max(1, cfg.cases);
  std::vector<int> mx(std::size_t(cases), 0), mn(std::size_t(cases), 1);
  std::vector<i64> om(std::size_t(cases), 0);
  std::vector<int> nr(std::size_t(cases), 1);
  Timer t;
#pragma omp parallel for schedule(dynamic)
  for (int cse = 0; cse < cases; ++cse) {
    std::mt19937 rng(cfg.seed + unsigned(cse) * 7919u);
    auto tiling = random_tiling(lat, rng, 3 + int(rng() % 40));
    auto kept = select_cover(lat, tiling);
    std::vector<Box> dil;
    for (auto i : kept) dil.push_back(dilate(lat, tiling[i].cube));
    auto [lo, hi] = overlap_range(lat, dil);
    mn[std::size_t(cse)] = lo;
    mx[std::size_t(cse)] = hi;
    // pairwise overlap floor for intersecting dilated pairs
    i64 margin = 0;
    for (std::size_t a = 0; a < dil.size(); ++a)
      for (std::size_t b = a + 1; b < dil.size(); ++b) {
        const i64 inter = intersection_measure(lat, dil[a], dil[b]);
        if (inter <= 0) continue;
        i64 floorv = 1;
        const int kmax = std::max(tiling[kept[a]].cube.k, tiling[kept[b]].cube.k);
        for (int i = 0; i < lat.n; ++i)
          floorv *= lat.side_units(kmax) >> (lat.k0 + 1);
        margin = std::min(margin == 0 ? inter - floorv : margin, inter - floorv);
      }
    om[std::size_t(cse)] = margin;
    // non-redundancy
    for (std::size_t a = 0; a < dil.size() && nr[std::size_t(cse)]; ++a) {
      std::vector<Box> others;
      for (std::size_t b = 0; b < dil.size(); ++b)
        if (b != a) others.push_back(dil[b]);
      if (covered_by_union(lat, dil[a], others)) nr[std::size_t(cse)] = 0;
    }
  }
  for (int cse = 0; cse < cases; ++cse) {
    worst_mult = std::max(worst_mult, mx[std::size_t(cse)]);
    worst_min = std::min(worst_min, mn[std::size_t(cse)]);
    worst_overlap_margin = std::min(worst_overlap_margin, om[std::size_t(cse)]);
    nonredundant = nonredundant && nr[std::size_t(cse)] != 0;
  }
  const double secs = t.lap();
  rep.checks.push_back(check("covering: minimum multiplicity at least one",
                             worst_min, 1, worst_min >= 1, secs));
  rep.checks.push_back(check("multiplicity bounded by (n+1)2^n", worst_mult,
                             mult_limit, worst_mult <= mult_limit, secs));
  rep.checks.push_back(check("pairwise overlap above the lattice floor",
                             double(worst_overlap_margin), 0.0,
                             worst_overlap_margin >= 0, secs));
  rep.checks.push_back(
      check("kept cubes are non-redundant", nonredundant ? 1.0 : 0.0, 1.0,
            nonredundant, secs));
  return rep;
}

SuiteReport suite_admissibility(const ExperimentConfig& cfg,
                                const std::string& out_dir) {
  SuiteReport rep;
  rep.suite = "admissibility";
  const Lattice lat(Window{cfg.n, cfg.M, cfg.depth}, DilationParam{cfg.k0});
  const Weight w = weight_from_config(cfg);
  Timer t;
  auto sc = populate_scales(lat, w, cfg.depth);
  const double q = measured_q(lat, w, sc, cfg);
  auto sys = build_admissible_system(lat, sc, full_schedule(cfg.depth), q, cfg.r);
  auto ad = check_admissible(lat, sc, sys, sys.c1, sys.c2);
  const double secs = t.lap();
  for (const auto& c : ad.conds)
    rep.checks.push_back(check(c.name, c.worst, c.limit, c.pass, secs));
  if (!out_dir.empty()) {
    auto os = open_out(out_dir + "/system.txt");
    write_system(os, lat, sys);
    auto ov = open_out(out_dir + "/system.svg");
    write_tiling_svg(ov, lat, sys);
    auto oc = open_out(out_dir + "/scales.csv");
    write_scales_csv(oc, lat, sc);
  }
  return rep;
}

SuiteReport suite_a1_checks(const ExperimentConfig& cfg, const std::string& out_dir) {
  SuiteReport rep;
  rep.suite = "a1-checks";
  const Lattice lat(Window{cfg.n, cfg.M, cfg.depth}, DilationParam{cfg.k0});
  const Weight w = weight_from_config(cfg);
  Timer t;
  const double a1 = a1loc_constant(lat, w, std::min(cfg.depth, 4));
  rep.checks.push_back(
      check("empirical A1 constant is finite", a1, 1e6, std::isfinite(a1), t.lap()));
  auto report = verify_a1_inequalities(lat, w, std::min(cfg.depth, 4));
  const double secs = t.lap();
  for (const auto& c : report.checks)
    rep.checks.push_back(check(c.name, c.worst_ratio, 1.0, c.pass, secs));
  if (!out_dir.empty()) {
    auto sc = populate_scales(lat, w, cfg.depth);
    auto oc = open_out(out_dir + "/scales.csv");
    write_scales_csv(oc, lat, sc);
  }
  return rep;
}

std::vector<std::string> corpus_or(const ExperimentConfig& cfg,
                                   std::vector<std::string> def) {
  return cfg.functions.empty() ? def : cfg.functions;
}

// largest ratio of the trace-side functional to the Sobolev norm over a corpus
double trace_constant(const ExperimentConfig& cfg, int depth, int grid_depth,
                      std::vector<std::pair<std::string, double>>* rows) {
  const Lattice lat(Window{cfg.n, cfg.M, depth}, DilationParam{cfg.k0});
  const Weight w = weight_from_config(cfg);
  auto sc = populate_scales(lat, w, depth);
  const double q = measured_q(lat, w, sc, cfg);
  double worst = 0.0;
  const auto names = corpus_or(cfg, {"sin", "sin2", "bump", "quad", "mix1", "mix2",
                                     "mix3", "mix4", "mix5", "mix6"});
  for (const auto& name : names) {
    auto f = catalog_halfspace(name, cfg.n, cfg.M, cfg.seed);
    auto sched = build_lj_sequence(lat, f, w, cfg.r + 1);
    auto sys = build_admissible_system(lat, sc, sched, q, cfg.r);
    auto phi = catalog_grid(name, cfg.n, cfg.M, grid_depth, cfg.seed);
    const double left = z_functional(lat, phi, sys, sc).value;
    const double right =
        weighted_sobolev_norm(lat, f, w, window_box(lat), 0.0, 2.0, 1).value;
    if (!(right > 0.0)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, left / right);
    if (rows) rows->push_back({name, left / right});
  }
  return worst;
}

SuiteReport suite_trace_ineq(const ExperimentConfig& cfg, const std::string& out_dir) {
  SuiteReport rep;
  rep.suite = "trace-ineq";
  const int gd = cfg.grid_depth > 0 ? cfg.grid_depth : cfg.depth;
  Timer t;
  std::vector<std::pair<std::string, double>> rows;
  const double c0 = trace_constant(cfg, cfg.depth, gd, &rows);
  const double s0 = t.lap();
  Timer t2;
  const double c1 = trace_constant(cfg, cfg.depth + 1, gd + 1, nullptr);
  const double s1 = t2.lap();
  const double drift = c0 > 0.0 ? c1 / c0 : 0.0;
  rep.checks.push_back(check("trace constant finite over the corpus", c0, 1e6,
                             std::isfinite(c0) && c0 > 0.0, s0));
  rep.checks.push_back(check("trace constant stable under one refinement", drift,
                             2.0, drift <= 2.0 && drift >= 0.5, s1));
  if (!out_dir.empty()) {
    auto os = open_out(out_dir + "/trace_ratios.csv");
    os << "function,ratio\n";
    for (const auto& [n, v] : rows) os << n << ',' << fmt(v) << '\n';
  }
  return rep;
}

double extension_constant(const ExperimentConfig& cfg, int depth, int grid_depth,
                          double* trace_err) {
  const Lattice lat(Window{cfg.n, cfg.M, depth}, DilationParam{0});
  const Weight w = weight_from_config(cfg);
  auto sc = populate_scales(lat, w, depth);
  const double q = measured_q(lat, w, sc, cfg);
  // the limiting extension needs a stage at every level to resolve the data,
  // so the schedule is kept unthinned here
  auto sys = build_admissible_system(lat, sc, full_schedule(depth), q, 1);
  double worst = 0.0;
  if (trace_err) *trace_err = 0.0;
  const auto names =
      corpus_or(cfg, {"constant", "ripple1", "ripple2", "ripple3"});
  for (const auto& name : names) {
    auto phi = catalog_grid(name, cfg.n, cfg.M, grid_depth, cfg.seed);
    auto f = extend_limiting(lat, phi, sys);
    const double right = z_functional(lat, phi, sys, sc).value;
    const double left =
        weighted_sobolev_norm(lat, f, w, window_box(lat), 0.0, 2.0, 1).value;
    if (!(right > 0.0)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, left / right);
    if (trace_err) {
      // trace recovery over every level-0 cube
      std::vector<double> tseq;
      for (int j = 2; j <= grid_depth + 2; ++j) tseq.push_back(std::ldexp(1.0, -j));
      GridFunction tr;
      tr.n = lat.n;
      tr.M = lat.M;
      tr.d = grid_depth;
      tr.v.assign(std::size_t(tr.size()), 0.0);
      i64 cells = 1;
      for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(0);
      for (i64 lin = 0; lin < cells; ++lin) {
        auto res =
            trace_of(lat, f, cube_from_linear(lat, 0, lin), grid_depth, tseq);
        for (std::size_t i = 0; i < tr.v.size(); ++i) tr.v[i] += res.trace.v[i];
      }
      double err = 0.0, mass = 0.0;
      for (std::size_t i = 0; i < tr.v.size(); ++i) {
        err += std::fabs(tr.v[i] - phi.v[i]);
        mass += std::fabs(phi.v[i]);
      }
      *trace_err = std::max(*trace_err, err / mass);
    }
  }
  return worst;
}

SuiteReport suite_extension_ineq(const ExperimentConfig& cfg,
                                 const std::string& out_dir) {
  SuiteReport rep;
  rep.suite = "extension-ineq";
  const int gd = cfg.grid_depth > 0 ? cfg.grid_depth : cfg.depth;
  Timer t;
  double trace_err = 0.0;
  const double c0 = extension_constant(cfg, cfg.depth, gd, &trace_err);
  const double s0 = t.lap();
  Timer t2;
  const double c1 = extension_constant(cfg, cfg.depth + 1, gd + 1, nullptr);
  const double s1 = t2.lap();
  const double drift = c0 > 0.0 ? c1 / c0 : 0.0;
  rep.checks.push_back(check("extension constant finite over the corpus", c0, 1e6,
                             std::isfinite(c0) && c0 > 0.0, s0));
  rep.checks.push_back(check("extension constant stable under one refinement",
                             drift, 2.0, drift <= 2.0 && drift >= 0.5, s1));
  rep.checks.push_back(check("trace of the extension recovers the data",
                             trace_err, 1e-2, trace_err <= 1e-2, s0));
  (void)out_dir;
  return rep;
}

SuiteReport suite_smooth_l2(const ExperimentConfig& cfg, const std::string& out_dir) {
  SuiteReport rep;
  rep.suite = "smooth-l2";
  if (cfg.n != 1) throw ConfigError("smooth-l2 suite runs in one dimension");
  const Lattice lat(Window{cfg.n, cfg.M, cfg.depth}, DilationParam{cfg.k0});
  const Weight w = weight_from_config(cfg);
  auto sc = populate_scales(lat, w, cfg.depth);
  const int gd = cfg.grid_depth > 0 ? cfg.grid_depth : cfg.depth;
  auto spec = MollifierSpec::make(cfg.n, 2);

  // mollifier reproduces affine data
  Timer tm;
  double aff_err = 0.0;
  {
    const int d = std::max(gd, 8);
    auto aff = sample_grid(cfg.n, cfg.M, d, [&](const std::vector<double>& x) {
      return 0.7 + 0.4 * x[0];
    });
    for (double x : {0.3 * cfg.M, 0.5 * cfg.M, 0.7 * cfg.M})
      aff_err = std::max(aff_err, std::fabs(mollify_E_eps(lat, aff, 1.0 / 16, spec,
                                                          {x}) -
                                            (0.7 + 0.4 * x)));
  }
  rep.checks.push_back(check("mollifier reproduces affine data", aff_err, 1e-6,
                             aff_err <= 1e-6, tm.lap()));

  const auto names = corpus_or(cfg, {"sin", "bump", "mix1", "mix2"});
  const BesovParams bp{2, std::max(1, cfg.depth - 1), false};

  auto direction = [&](int depth, int grid_d, double& ext_c, double& trc_c) {
    const Lattice lt(Window{cfg.n, cfg.M, depth}, DilationParam{cfg.k0});
    auto scl = populate_scales(lt, w, depth);
    BesovParams p{2, std::max(1, depth - 1), false};
    ext_c = 0.0;
    trc_c = 0.0;
    for (const auto& name : names) {
      auto phi = catalog_grid(name, cfg.n, cfg.M, grid_d, cfg.seed);
      const double bnorm = besov_variable_norm(lt, phi, scl, p).value;
      auto f = extend_smooth(lt, phi, 2, spec);
      const double wnorm =
          weighted_sobolev_norm(lt, f, w, window_box(lt), 0.0, 2.0, 2).value;
      if (bnorm > 0.0) ext_c = std::max(ext_c, wnorm / bnorm);
      // trace direction on the analytic catalog member
      auto g = catalog_halfspace(name, cfg.n, cfg.M, cfg.seed);
      const double gnorm =
          weighted_sobolev_norm(lt, g, w, window_box(lt), 0.0, 2.0, 2).value;
      const double gbesov = besov_variable_norm(lt, phi, scl, p).value;
      if (gnorm > 0.0) trc_c = std::max(trc_c, gbesov / gnorm);
    }
  };
  Timer t0;
  double ext0 = 0.0, trc0 = 0.0, ext1 = 0.0, trc1 = 0.0;
  direction(cfg.depth, gd, ext0, trc0);
  const double s0 = t0.lap();
  Timer t1;
  direction(cfg.depth + 1, gd + 1, ext1, trc1);
  const double s1 = t1.lap();
  rep.checks.push_back(check("extension direction constant finite", ext0, 1e6,
                             std::isfinite(ext0) && ext0 > 0.0, s0));
  rep.checks.push_back(check("trace direction constant finite", trc0, 1e6,
                             std::isfinite(trc0) && trc0 > 0.0, s0));
  const double de = ext0 > 0 ? ext1 / ext0 : 0.0, dt = trc0 > 0 ? trc1 / trc0 : 0.0;
  rep.checks.push_back(check("extension constant stable under one refinement", de,
                             2.0, de >= 0.5 && de <= 2.0, s1));
  rep.checks.push_back(check("trace constant stable under one refinement", dt, 2.0,
                             dt >= 0.5 && dt <= 2.0, s1));

  // trace of the smooth extension recovers the data
  Timer t2;
  double rec = 0.0;
  for (const auto& name : names) {
    auto phi = catalog_grid(name, cfg.n, cfg.M, gd, cfg.seed);
    auto f = extend_smooth(lat, phi, 2, spec);
    std::vector<double> tseq;
    for (int j = 2; j <= gd + 2; ++j) tseq.push_back(std::ldexp(1.0, -j));
    GridFunction tr;
    tr.n = lat.n;
    tr.M = lat.M;
    tr.d = gd;
    tr.v.assign(std::size_t(tr.size()), 0.0);
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(0);
    for (i64 lin = 0; lin < cells; ++lin) {
      auto res = trace_of(lat, f, cube_from_linear(lat, 0, lin), gd, tseq);
      for (std::size_t i = 0; i < tr.v.size(); ++i) tr.v[i] += res.trace.v[i];
    }
    double err = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < tr.v.size(); ++i) {
      err += std::fabs(tr.v[i] - phi.v[i]);
      mass += std::fabs(phi.v[i]);
    }
    rec = std::max(rec, err / mass);
  }
  rep.checks.push_back(check("trace of the smooth extension recovers the data",
                             rec, 1e-2, rec <= 1e-2, t2.lap()));
  if (!out_dir.empty()) {
    auto phi = catalog_grid(names[0], cfg.n, cfg.M, gd, cfg.seed);
    auto breport = besov_variable_norm(lat, phi, sc, bp);
    auto ob = open_out(out_dir + "/besov_terms.csv");
    write_norm_csv(ob, breport);
    auto ov = open_out(out_dir + "/besov_terms.svg");
    write_norm_svg(ov, breport);
  }
  return rep;
}

SuiteReport suite_gagliardo(const ExperimentConfig& cfg, const std::string& out_dir) {
  SuiteReport rep;
  rep.suite = "gagliardo";
  const Lattice lat(Window{cfg.n, cfg.M, cfg.depth}, DilationParam{cfg.k0});
  const Weight w = Weight::constant(cfg.n, 1.0);  // the Gagliardo case
  auto sc = populate_scales(lat, w, cfg.depth);
  const double q = measured_q(lat, w, sc, cfg);
  const int gd = cfg.grid_depth > 0 ? cfg.grid_depth : cfg.depth;

  std::vector<TilingSystem> lib;
  lib.push_back(build_admissible_system(lat, sc, full_schedule(cfg.depth), q, cfg.r));
  {
    LevelSchedule s2;
    for (int l = 0; l <= cfg.depth; l += 2) s2.l.push_back(l);
    lib.push_back(build_admissible_system(lat, sc, s2, q, 1));
  }
  auto names = corpus_or(cfg, {});
  if (names.empty()) {
    names = {"constant", "saw", "step", "sin", "sin2", "bump", "quad"};
    for (int i = 1; i <= 13; ++i) names.push_back("mix" + std::to_string(i));
  }
  Timer t;
  double cbest = 0.0;
  bool strict = false;
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& name : names) {
    auto phi = catalog_grid(name, cfg.n, cfg.M, gd, cfg.seed);
    const double z = z_functional_best(lat, phi, lib, sc).value;
    double l1 = 0.0;
    i64 cells = 1;
    for (int i = 0; i < lat.n; ++i) cells *= lat.cells_per_axis(0);
    for (i64 lin = 0; lin < cells; ++lin)
      l1 += l1_on_cube(phi, cube_from_linear(lat, 0, lin));
    if (!(l1 > 0.0)) continue;
    cbest = std::max(cbest, z / l1);
    rows.push_back({name, z / l1});
    const double b1 =
        besov_variable_norm(lat, phi, sc, BesovParams{1, cfg.depth, false}).value;
    if (b1 > z * (1.0 + 1e-9)) strict = true;
  }
  const double secs = t.lap();
  rep.checks.push_back(check("Z functional bounded by C times the L1 norm", cbest,
                             cfg.bound_c, cbest <= cfg.bound_c, secs));
  rep.checks.push_back(check("first-order Besov expression exceeds Z somewhere",
                             strict ? 1.0 : 0.0, 1.0, strict, secs));
  if (!out_dir.empty()) {
    auto os = open_out(out_dir + "/gagliardo_ratios.csv");
    os << "function,ratio\n";
    for (const auto& [n, v] : rows) os << n << ',' << fmt(v) << '\n';
  }
  return rep;
}

}  // namespace

SuiteReport run_verification_suite(const ExperimentConfig& cfg,
                                   const std::string& out_dir) {
  // validate before any computation
  (void)weight_from_config(cfg);
  for (const auto& name : cfg.functions)
    (void)catalog_value(name, std::vector<double>(std::size_t(cfg.n), 0.0), cfg.M,
                        cfg.seed);

  SuiteReport rep;
  if (cfg.suite == "lemma4.1")
    rep = suite_lemma41(cfg, out_dir);
  else if (cfg.suite == "admissibility")
    rep = suite_admissibility(cfg, out_dir);
  else if (cfg.suite == "trace-ineq")
    rep = suite_trace_ineq(cfg, out_dir);
  else if (cfg.suite == "extension-ineq")
    rep = suite_extension_ineq(cfg, out_dir);
  else if (cfg.suite == "smooth-l2")
    rep = suite_smooth_l2(cfg, out_dir);
  else if (cfg.suite == "gagliardo")
    rep = suite_gagliardo(cfg, out_dir);
  else if (cfg.suite == "a1-checks")
    rep = suite_a1_checks(cfg, out_dir);
  else
    throw ConfigError("unknown suite: " + cfg.suite);

  rep.ok = true;
  for (const auto& c : rep.checks) rep.ok = rep.ok && c.pass;
  return rep;
}

}  // namespace tracelab
