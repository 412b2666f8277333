#pragma once

#include <vector>

#include "acuc/case.hpp"
#include "acuc/dense.hpp"
#include "acuc/device_milp.hpp"
#include "acuc/solvers.hpp"

namespace acuc {

struct ProjectionConfig {
  // qp weights: p deviation, q deviation, voltage, angle, cost regularizer,
  // spare hook (unused by default)
  double gamma[6] = {1.0, 1.0, 1e2, 1e2, 1e-2, 0.0};
  double alpha_flow = 1.2;      // flow-limit tightening multiplier
  double alpha_shrink = 0.3;    // geometric shrink of (alpha-1) per re-solve
  int resolves = 3;
  double angle_limit = 1.2566370614359172;  // 72 degrees
  bool ed_split_time = false;   // per-period dispatch variant (heuristic)
};

struct EdResult {
  SolveStatus status = SolveStatus::kNumerical;
  double z_ed = 0.0;
};

// Copper-plate dispatch: network-free LP relaxation whose optimum upper
// bounds every feasible market surplus. Seeds device/reserve variables of
// st in place; network families are left untouched.
EdResult economic_dispatch(const Case& cs, FlatState& st,
                           const ProjectionConfig& cfg);

// Sub-Jacobians of network absorption (branch flows + shunts) and branch
// apparent power at the state's operating point for one period.
struct AcJacobians {
  int n_bus = 0, n_branch = 0;
  std::vector<double> p0, q0;          // absorption at the point
  std::vector<double> s0_fr, s0_to;    // apparent power per branch side
  DenseMat Jpv, Jpt, Jqv, Jqt;         // n_bus x n_bus
  DenseMat Jsv_fr, Jst_fr, Jsv_to, Jst_to;  // n_branch x n_bus
};
AcJacobians build_ac_jacobians(const Case& cs, const FlatState& st, int t);

// One period of the regularized linearized power-flow projection, re-solved
// cfg.resolves times with the flow tightening shrinking toward 1.
// Returns false (state unchanged) when every attempt is infeasible.
bool linearized_power_flow(const Case& cs, FlatState& st, int t,
                           const ProjectionConfig& cfg);

// Reserve cleanup LP for one period; only reserve variables move.
SolveStatus reserve_cleanup(const Case& cs, FlatState& st, int t);

// Nearest-feasible integral projection of one device's trajectory.
// frozen[t] >= 0 pins that binary. The solution is applied to st.
DeviceSolution project_device(const Case& cs, int dev_idx, FlatState& st,
                              const std::vector<int>& frozen);

struct FreezeGroups {
  std::vector<int> group;  // 0 = group a, 1 = group b per device

  // group a is frozen at even 1-based periods, group b at odd ones
  bool frozen_at(int dev, int t) const {
    int period_1based = t + 1;
    bool even = period_1based % 2 == 0;
    return group[dev] == 0 ? even : !even;
  }
};
FreezeGroups assign_freeze_groups(const Case& cs, std::uint64_t seed);

// Ramp-constrained power flow at one period; requires integral binaries and
// a globally ramp-feasible entering state. All periods may run concurrently.
bool ramp_constrained_pf(const Case& cs, FlatState& st,
                         const FlatState& entering, const FreezeGroups& groups,
                         int t, const ProjectionConfig& cfg);

}  // namespace acuc
