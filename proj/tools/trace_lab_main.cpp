#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tracelab/harness.hpp"

using namespace tracelab;

namespace {

int run_suite(const std::string& suite, const std::string& config_path,
              const std::string& out_dir, int seed, int depth) {
  auto cfg = ExperimentConfig::from_json_file(config_path);
  cfg.suite = suite;
  if (seed >= 0) cfg.seed = unsigned(seed);
  if (depth > 0) cfg.depth = depth;
  std::filesystem::create_directories(out_dir);
  const auto rep = run_verification_suite(cfg, out_dir);
  export_report(rep, out_dir + "/report.csv", "csv");
  export_report(rep, out_dir + "/report.txt", "text");
  export_report(rep, out_dir + "/report.svg", "svg");
  std::ifstream txt(out_dir + "/report.txt");
  std::cout << txt.rdbuf();
  return rep.ok ? 0 : 1;
}

// utility subcommands sharing the config format
int run_tile(const std::string& config_path, const std::string& out_dir) {
  auto cfg = ExperimentConfig::from_json_file(config_path);
  const Lattice lat(Window{cfg.n, cfg.M, cfg.depth}, DilationParam{cfg.k0});
  const Weight w = weight_from_config(cfg);
  auto sc = populate_scales(lat, w, cfg.depth);
  const double q = cfg.q > 0 ? cfg.q : 2.0 * q_parameters(lat, w, sc).q;
  LevelSchedule sched;
  for (int l = 0; l <= cfg.depth; ++l) sched.l.push_back(l);
  auto sys = build_admissible_system(lat, sc, sched, q, cfg.r);
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/system.txt");
  write_system(os, lat, sys);
  std::ofstream ov(out_dir + "/system.svg");
  write_tiling_svg(ov, lat, sys);
  return 0;
}

int run_norm(const std::string& config_path, const std::string& out_dir) {
  auto cfg = ExperimentConfig::from_json_file(config_path);
  const Lattice lat(Window{cfg.n, cfg.M, cfg.depth}, DilationParam{cfg.k0});
  const Weight w = weight_from_config(cfg);
  auto sc = populate_scales(lat, w, cfg.depth);
  const int gd = cfg.grid_depth > 0 ? cfg.grid_depth : cfg.depth;
  const std::string name = cfg.functions.empty() ? "sin" : cfg.functions[0];
  auto phi = catalog_grid(name, cfg.n, cfg.M, gd, cfg.seed);
  auto rep = besov_variable_norm(lat, phi, sc,
                                 BesovParams{2, std::max(1, cfg.depth - 1), false});
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/norm.csv");
  write_norm_csv(os, rep);
  std::ofstream ov(out_dir + "/norm.svg");
  write_norm_svg(ov, rep);
  return 0;
}

int run_extend(const std::string& phi_path, const std::string& system_path,
               const std::string& out_dir) {
  std::ifstream ps(phi_path);
  if (!ps) throw ConfigError("cannot read grid file: " + phi_path);
  auto phi = read_grid_csv(ps);
  std::ifstream ss(system_path);
  if (!ss) throw ConfigError("cannot read system file: " + system_path);
  Lattice lat;
  auto sys = read_system(ss, lat);
  auto f = extend_limiting(lat, phi, sys);
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/extension.csv");
  os << "x,t,value\n";
  const int nx = 64, nt = 16;
  for (int i = 0; i < nx; ++i)
    for (int j = 1; j <= nt; ++j) {
      std::vector<double> x(std::size_t(lat.n), 0.0);
      x[0] = lat.M * (i + 0.5) / nx;
      const double t = 2.0 * j / nt;
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x[0], t, f.value(x, t));
      os << buf;
    }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-lab: verification suites for weighted trace/extension "
               "operators on a periodic window"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", phi_path, system_path;
  int seed = -1, depth = -1;

  std::vector<CLI::App*> suites;
  for (const char* s : {"lemma4.1", "admissibility", "trace-ineq", "extension-ineq",
                        "smooth-l2", "gagliardo", "a1-checks"}) {
    auto* sub = app.add_subcommand(s, std::string("run the ") + s + " suite");
    sub->add_option("--config", config_path, "config file (json)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--depth", depth, "override the config depth");
    suites.push_back(sub);
  }
  auto* tile = app.add_subcommand("tile", "emit the tiling system for the config");
  tile->add_option("--config", config_path, "config file (json)")->required();
  tile->add_option("--out", out_dir, "output directory");
  auto* norm = app.add_subcommand("norm", "emit the norm breakdown for the config");
  norm->add_option("--config", config_path, "config file (json)")->required();
  norm->add_option("--out", out_dir, "output directory");
  auto* extend = app.add_subcommand("extend", "extend a grid file over a system");
  extend->add_option("--phi", phi_path, "grid function csv")->required();
  extend->add_option("--system", system_path, "tiling system file")->required();
  extend->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (tile->parsed()) return run_tile(config_path, out_dir);
    if (norm->parsed()) return run_norm(config_path, out_dir);
    if (extend->parsed()) return run_extend(phi_path, system_path, out_dir);
    for (std::size_t i = 0; i < suites.size(); ++i)
      if (suites[i]->parsed())
        return run_suite(suites[i]->get_name(), config_path, out_dir, seed, depth);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
