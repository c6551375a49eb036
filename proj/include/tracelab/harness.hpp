#pragma once

// Configuration-driven experiment runner: named verification suites over the
// library, with deterministic CSV/text/SVG exports.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelab/extension.hpp"
#include "tracelab/norms.hpp"

namespace tracelab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string suite;

  // window
  int n = 1, M = 2, depth = 6, k0 = 0;
  unsigned seed = 1;

  // weight spec {kind, alpha, coefficients, period}
  std::string weight_kind = "constant";
  double alpha = 0.0;
  double c = 1.0;
  std::vector<double> coefficients;
  int cells_per_unit = 1;
  int period = 1;

  // knobs
  int r = 5;
  double q = 0.0;          // <= 0: measured q_parameters times the safety factor
  double bound_c = 16.0;   // gagliardo acceptance bound
  double tolerance = 1e-6;
  int cases = 100;         // randomized case count (lemma4.1)
  int grid_depth = -1;     // sampling depth; -1 means `depth`
  std::vector<std::string> functions;  // catalog selections; empty = suite default

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
};

Weight weight_from_config(const ExperimentConfig& cfg);

// named grid samples: constant, saw, step, sin, sin2, bump, quad, mix<N>
GridFunction catalog_grid(const std::string& name, int n, int M, int d,
                          unsigned seed);
// the same shapes times a smooth decay in t; trace equals the grid sample
HalfSpaceFunction catalog_halfspace(const std::string& name, int n, int M,
                                    unsigned seed);

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double limit = 0.0;
  double seconds = 0.0;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  bool ok = false;
};

// Runs the named suite, writing suite artifacts (tilings, scale tables,
// norm breakdowns, SVG renderings) under out_dir. Unresolvable configuration
// throws ConfigError before any computation.
SuiteReport run_verification_suite(const ExperimentConfig& cfg,
                                   const std::string& out_dir);

// format: "csv" (byte-deterministic, no runtimes), "text" (with runtimes),
// or "svg" (pass/fail bar chart of measured/limit ratios)
void export_report(const SuiteReport& rep, const std::string& path,
                   const std::string& format);

// deterministic renderings
void write_tiling_svg(std::ostream& os, const Lattice& lat, const TilingSystem& sys);
void write_norm_svg(std::ostream& os, const NormReport& rep);
void write_scales_csv(std::ostream& os, const Lattice& lat, const WeightScales& sc);
void write_norm_csv(std::ostream& os, const NormReport& rep);

// tiling system round trip: header (r, q, c1, c2, schedule) + per-stage
// tiling records + selected survivor indices
void write_system(std::ostream& os, const Lattice& lat, const TilingSystem& sys);
TilingSystem read_system(std::istream& is, Lattice& lat_out);

}  // namespace tracelab
