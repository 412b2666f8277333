#pragma once

// Exhaustive enumeration oracle for the per-device projection: every binary
// sequence is filtered by a direct min-up/down scan, and the continuous part
// is solved as an explicit lp over all reserve products with l1 splits.
// Kept independent of the production search + interval-DP path.

#include <array>
#include <cmath>
#include <vector>

#include "acuc/device_milp.hpp"
#include "acuc/solvers.hpp"

namespace acuc::testutil {

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<int> u;
};

inline bool oracle_feasible(const Device& dev, const std::vector<int>& u) {
  const int T = static_cast<int>(u.size());
  int state = dev.u0;
  int run = 1 << 20;
  for (int t = 0; t < T; ++t) {
    if (u[t] != state) {
      if (state == 1 && run < dev.min_up) return false;
      if (state == 0 && run < dev.min_down) return false;
      state = u[t];
      run = 1;
    } else {
      ++run;
    }
  }
  return true;
}

inline double oracle_continuous(const DeviceProjection& prob,
                                const std::vector<int>& u, bool& feasible) {
  const Device& dev = *prob.dev;
  const int T = prob.T;
  LpProblem lp;
  lp.tol_scale = 1e-3;  // the comparison demands 1e-9 objective agreement
  double constant = 0.0;
  std::vector<int> w(T, -1), q(T, -1);
  std::vector<std::array<int, kNumReserveProducts>> r(T);
  auto l1 = [&](int var, double target) {
    int a = lp.add_var(0.0, kInf, 1.0);
    int b = lp.add_var(0.0, kInf, 1.0);
    lp.add_eq({{var, 1.0}, {a, -1.0}, {b, 1.0}}, target);
  };
  for (int t = 0; t < T; ++t) {
    if (u[t]) {
      w[t] = lp.add_var(dev.p_min, dev.p_max, 0.0);
      l1(w[t], prob.p_target[t]);
      q[t] = lp.add_var(dev.q_min, dev.q_max, 0.0);
      l1(q[t], prob.q_target[t]);
    }
    for (int pr = 0; pr < kNumReserveProducts; ++pr) {
      double cap = (pr == kQru || pr == kQrd)
                       ? std::max(std::abs(dev.q_min), std::abs(dev.q_max))
                       : dev.p_max;
      bool allowed = u[t] ? (pr != kNsc && pr != kRruOff && pr != kRrdOff)
                          : (pr == kNsc || pr == kRruOff || pr == kRrdOff);
      if (!allowed) {
        // pinned at zero: pays its target distance outright
        r[t][pr] = -1;
        constant += std::abs(prob.r_target[t][pr]);
        continue;
      }
      r[t][pr] = lp.add_var(0.0, cap, 0.0);
      l1(r[t][pr], prob.r_target[t][pr]);
    }
    if (u[t]) {
      lp.add_le({{w[t], 1.0},
                 {r[t][kRgu], 1.0},
                 {r[t][kScr], 1.0},
                 {r[t][kRruOn], 1.0}},
                dev.p_max);
      lp.add_le({{w[t], -1.0}, {r[t][kRgd], 1.0}, {r[t][kRrdOn], 1.0}},
                -dev.p_min);
      lp.add_le({{q[t], 1.0}, {r[t][kQru], 1.0}}, dev.q_max);
      lp.add_le({{q[t], -1.0}, {r[t][kQrd], 1.0}}, -dev.q_min);
    }
    std::vector<std::pair<int, double>> up;
    double rhs_up = dev.ramp_up, rhs_dn = dev.ramp_down;
    if (u[t]) up.push_back({w[t], 1.0});
    if (t == 0) {
      rhs_up += dev.u0 * dev.p0;
      rhs_dn -= dev.u0 * dev.p0;
    } else if (u[t - 1]) {
      up.push_back({w[t - 1], -1.0});
    }
    std::vector<std::pair<int, double>> dn;
    for (auto& [var, coef] : up) dn.push_back({var, -coef});
    lp.add_le(up, rhs_up);
    lp.add_le(dn, rhs_dn);
  }
  SolveResult res = solve_lp(lp);
  if (res.status == SolveStatus::kInfeasible) {
    feasible = false;
    return 0.0;
  }
  feasible = res.optimal();
  return res.objective + constant;
}

inline OracleResult oracle_solve(const DeviceProjection& prob) {
  const int T = prob.T;
  OracleResult best;
  for (int mask = 0; mask < (1 << T); ++mask) {
    std::vector<int> u(T);
    for (int t = 0; t < T; ++t) u[t] = (mask >> t) & 1;
    bool ok = true;
    for (int t = 0; t < T; ++t)
      if (prob.fixed[t] >= 0 && u[t] != prob.fixed[t]) ok = false;
    if (!ok || !oracle_feasible(*prob.dev, u)) continue;
    bool cont_ok = true;
    double cont = oracle_continuous(prob, u, cont_ok);
    if (!cont_ok) continue;
    double obj = cont;
    for (int t = 0; t < T; ++t) obj += std::abs(u[t] - prob.u_target[t]);
    if (!best.feasible || obj < best.objective - 1e-12) {
      best.feasible = true;
      best.objective = obj;
      best.u = u;
    }
  }
  return best;
}

}  // namespace acuc::testutil
