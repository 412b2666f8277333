#pragma once

#include <optional>
#include <string>

#include "acuc/adam.hpp"
#include "acuc/checker.hpp"
#include "acuc/ctg.hpp"
#include "acuc/projections.hpp"

namespace acuc {

struct PipelineConfig {
  double budget_s = 60.0;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: leave the pool as-is

  // wall-clock budget split: ED + setup, binary-fixing rounds, final polish
  double frac_setup = 0.10;
  double frac_rounds = 0.60;
  std::vector<double> round_fracs = {0.5, 0.75, 1.0};  // of remaining binaries

  // virtual-clock iteration pacing: iterations per second of budget, scaled
  // by case size; keeps runs bit-reproducible while a wall-clock guard caps
  // overruns at guard_factor * budget on slow machines
  double nominal_rate = 0.0;  // 0: derive from case size
  double guard_factor = 1.05;

  AdamConfig adam = AdamConfig::defaults();
  HomotopyConfig homotopy;
  CtgConfig ctg;
  ProjectionConfig proj;
  int trace_stride = 25;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  FlatState state;
  Solution solution;
  SolutionReport report;
  Trace trace;
  double z_ed = 0.0;
  bool fallback_used = false;
  bool guard_tripped = false;
  std::vector<StageTiming> timings;
  std::string ctg_diagnostics;  // per-period worst sets from the last pass
  std::string timing_json() const;
};

// Adds the n_plus unfixed binaries whose projected values sit closest to
// their relaxed values to the frozen set (ties by device index, then t).
// relaxed/projected are (device, t) matrices flattened d*T+t.
int fix_binaries_round(const std::vector<double>& relaxed,
                       const std::vector<double>& projected, int T,
                       std::vector<std::vector<int>>& frozen, int n_plus);

// Rounds relaxed shunt steps to integers (half away from zero) and pins them.
void snap_shunts(const Case& cs, FlatState& st);

PipelineResult run_pipeline(const Case& cs, const PipelineConfig& cfg);

// Fig-style objective trace plot (SVG polyline of z_ms over iterations).
void write_trace_svg(const std::string& csv_path, const std::string& out_path);

}  // namespace acuc
