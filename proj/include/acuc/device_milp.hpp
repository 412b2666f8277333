#pragma once

#include <array>
#include <vector>

#include "acuc/case.hpp"
#include "acuc/solvers.hpp"

namespace acuc {

// One device's projection instance: find the feasible integral trajectory
// closest (weighted l1) to the relaxed target.
struct DeviceProjection {
  const Device* dev = nullptr;
  int T = 0;
  std::vector<double> u_target;  // relaxed on/off in [0,1]
  std::vector<double> p_target;  // relaxed dispatch while on
  std::vector<double> q_target;
  std::vector<std::array<double, kNumReserveProducts>> r_target;
  std::vector<int> fixed;  // per t: -1 free, else pinned binary value
};

struct DeviceSolution {
  SolveStatus status = SolveStatus::kInfeasible;
  std::vector<int> u;
  std::vector<double> p;  // dispatched power (0 when off)
  std::vector<double> q;
  std::vector<std::array<double, kNumReserveProducts>> r;
  double objective = 0.0;
  int switches = 0;
};

// Exact optimum: feasible on/off sequences are enumerated over a
// (period, state, dwell) search with min-up/down pruning; each candidate's
// continuous part collapses to a convex piecewise-linear chain in the
// dispatched power, solved exactly by interval dynamic programming.
// Ties break to fewer switches, then the lexicographically smaller sequence.
DeviceSolution solve_device_milp(const DeviceProjection& prob);

// Continuous evaluation for a fixed binary sequence (used by the search and
// exposed so alternative routes can cross-check it). Returns infeasible
// status when the ramp chain admits no trajectory.
DeviceSolution eval_device_sequence(const DeviceProjection& prob,
                                    const std::vector<int>& u);

// Binary-sequence feasibility: min up/down with the initial state's dwell
// treated as already satisfied, windows truncated at the horizon.
bool sequence_feasible(const Device& dev, const std::vector<int>& u,
                       const std::vector<int>* fixed);

}  // namespace acuc
