#pragma once

#include <array>
#include <string>

#include "acuc/case.hpp"
#include "acuc/ctg.hpp"
#include "acuc/surplus.hpp"

namespace acuc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // per-family initial/final step magnitudes
  std::array<double, kNumVarFamilies> alpha0{};
  std::array<double, kNumVarFamilies> alphaf{};

  static AdamConfig defaults();
};

// Reflected-sigmoid step-size decay over normalized wall-clock time.
// t_w outside [t0, tf] clamps to the endpoints.
double schedule_step_size(double t_w, double t0, double tf, double alpha_0,
                          double alpha_f);

struct HomotopyConfig {
  double eps0 = 1e-1;
  double epsf = 1e-6;
  double rho0 = 10.0;
  double rhof = 5e3;
};

struct HomotopyState {
  double eps = 1e-1;
  double beta_scale = 0.1;
  double rho = 10.0;
};

// eps decays like the step size (more orders of magnitude), beta_scale rises
// linearly 0.1 -> 1.0, rho rises through the same sigmoid.
HomotopyState schedule_homotopy(double t_w, double t0, double tf,
                                const HomotopyConfig& cfg);

// One clipped Adam update. Frozen entries and pinned bounds (lo == hi) are
// untouched. Throws SolverError naming the first non-finite gradient entry.
void adam_step(FlatState& st, const std::vector<double>& grad,
               const AdamConfig& cfg,
               const std::array<double, kNumVarFamilies>& alpha);

struct TraceRow {
  std::int64_t iter = 0;
  double t_w = 0.0;
  double z_ms = 0.0;
  double z_ctg = 0.0;
  double alpha = 0.0;
  double eps = 0.0;
  double beta_scale = 0.0;
  double rho = 0.0;
};

struct Trace {
  std::vector<TraceRow> rows;
  void to_csv(const std::string& path) const;
};

struct AdamLoopConfig {
  AdamConfig adam = AdamConfig::defaults();
  HomotopyConfig homotopy;
  double t0 = 0.0;  // global schedule window (virtual seconds)
  double tf = 60.0;
  int trace_stride = 25;
};

struct AdamLoopResult {
  std::int64_t iterations = 0;
  bool deadline_tripped = false;
  double last_z_ms = 0.0;
};

// Runs n_iters evaluate/backprop/ctg/step rounds over the virtual-time slice
// [w0, w1]. ws may be null (no contingency engine). deadline, when positive,
// is a wall-clock guard in seconds measured from loop entry.
AdamLoopResult run_adam_loop(const Case& cs, FlatState& st, CtgWorkspace* ws,
                             const AdamLoopConfig& cfg, double w0, double w1,
                             int n_iters, Trace* trace, double deadline = 0.0);

}  // namespace acuc
