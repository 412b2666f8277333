#include <algorithm>
#include <cmath>

#include "acuc/device_milp.hpp"
#include "acuc/solvers.hpp"
#include "device_oracle.hpp"
#include "doctest.h"

using namespace acuc;
using testutil::oracle_solve;
using testutil::OracleResult;

namespace {

Device make_device(double p_min, double p_max, double ramp, int min_up,
                   int min_down, int u0, double p0) {
  Device d;
  d.id = "dev";
  d.kind = DeviceKind::producer;
  d.bus = 0;
  d.p_min = p_min;
  d.p_max = p_max;
  d.q_min = -0.5;
  d.q_max = 0.5;
  d.ramp_up = ramp;
  d.ramp_down = ramp;
  d.min_up = min_up;
  d.min_down = min_down;
  d.u0 = u0;
  d.p0 = p0;
  return d;
}

DeviceProjection make_problem(const Device& dev, int T) {
  DeviceProjection p;
  p.dev = &dev;
  p.T = T;
  p.u_target.assign(T, 0.0);
  p.p_target.assign(T, dev.p_min);
  p.q_target.assign(T, 0.0);
  p.r_target.assign(T, {});
  p.fixed.assign(T, -1);
  return p;
}

}  // namespace

TEST_CASE("rounding dominance") {
  Device dev = make_device(0.1, 1.0, 5.0, 1, 1, 1, 0.5);
  DeviceProjection p = make_problem(dev, 2);
  p.u_target = {0.9, 0.95};
  p.p_target = {0.5, 0.5};
  DeviceSolution sol = solve_device_milp(p);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.u == std::vector<int>{1, 1});
}

TEST_CASE("min-uptime forbids a one-period run") {
  Device dev = make_device(0.1, 1.0, 5.0, 2, 1, 0, 0.0);
  DeviceProjection p = make_problem(dev, 2);
  p.u_target = {0.6, 0.1};
  p.p_target = {0.1, 0.1};
  DeviceSolution sol = solve_device_milp(p);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.u != std::vector<int>{1, 0});
  OracleResult oracle = oracle_solve(p);
  REQUIRE(oracle.feasible);
  CHECK(sol.objective == doctest::Approx(oracle.objective).epsilon(1e-9));
}

TEST_CASE("tie breaks to fewer switches") {
  Device dev = make_device(0.0, 1.0, 5.0, 1, 1, 0, 0.0);
  DeviceProjection p = make_problem(dev, 1);
  p.u_target = {0.5};
  p.p_target = {0.0};
  DeviceSolution sol = solve_device_milp(p);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.u == std::vector<int>{0});  // staying at u0 avoids the switch
}

TEST_CASE("feasible integral trajectories project to themselves") {
  Device dev = make_device(0.1, 1.0, 0.4, 2, 2, 1, 0.5);
  DeviceProjection p = make_problem(dev, 4);
  p.u_target = {1.0, 1.0, 1.0, 1.0};
  p.p_target = {0.5, 0.7, 0.6, 0.4};
  DeviceSolution sol = solve_device_milp(p);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(0.0));
  CHECK(sol.u == std::vector<int>{1, 1, 1, 1});
  for (int t = 0; t < 4; ++t)
    CHECK(sol.p[t] == doctest::Approx(p.p_target[t]));
}

TEST_CASE("infeasible initial conditions are reported") {
  // a one-period on-run mid-horizon violates min_down and min_up together
  Device dev = make_device(0.1, 1.0, 5.0, 3, 3, 1, 0.5);
  DeviceProjection p = make_problem(dev, 3);
  p.fixed = {0, 1, 0};
  DeviceSolution sol = solve_device_milp(p);
  CHECK(sol.status == SolveStatus::kInfeasible);
}

TEST_CASE("search equals exhaustive enumeration up to ten periods") {
  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 15; ++trial) {
    const int T = 7 + int(rng.uniform_int(0, 3));
    Device dev = make_device(rng.uniform(0.0, 0.3), rng.uniform(0.6, 1.2),
                             rng.uniform(0.2, 1.2), int(rng.uniform_int(1, 4)),
                             int(rng.uniform_int(1, 3)),
                             int(rng.uniform_int(0, 1)), 0.0);
    dev.p0 = dev.u0 ? rng.uniform(dev.p_min, dev.p_max) : 0.0;
    DeviceProjection p = make_problem(dev, T);
    for (int t = 0; t < T; ++t) {
      p.u_target[t] = rng.uniform(0.0, 1.0);
      p.p_target[t] = rng.uniform(dev.p_min, dev.p_max);
      p.q_target[t] = rng.uniform(dev.q_min, dev.q_max);
      for (int r = 0; r < kNumReserveProducts; ++r)
        p.r_target[t][r] = rng.uniform(0.0, 0.4 * dev.p_max);
    }
    DeviceSolution sol = solve_device_milp(p);
    OracleResult oracle = oracle_solve(p);
    REQUIRE((sol.status == SolveStatus::kOptimal) == oracle.feasible);
    if (!oracle.feasible) continue;
    ++checked;
    CHECK(sol.objective == doctest::Approx(oracle.objective).epsilon(1e-9));
  }
  CHECK(checked > 8);
}

TEST_CASE("search equals exhaustive enumeration with inner lp") {
  Rng rng(31);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int T = 1 + int(rng.uniform_int(1, 5));
    Device dev = make_device(rng.uniform(0.0, 0.3), rng.uniform(0.6, 1.2),
                             rng.uniform(0.2, 1.2), int(rng.uniform_int(1, 3)),
                             int(rng.uniform_int(1, 2)),
                             int(rng.uniform_int(0, 1)), 0.0);
    dev.p0 = dev.u0 ? rng.uniform(dev.p_min, dev.p_max) : 0.0;
    DeviceProjection p = make_problem(dev, T);
    for (int t = 0; t < T; ++t) {
      p.u_target[t] = rng.uniform(0.0, 1.0);
      p.p_target[t] = rng.uniform(dev.p_min, dev.p_max);
      p.q_target[t] = rng.uniform(dev.q_min, dev.q_max);
      for (int r = 0; r < kNumReserveProducts; ++r)
        p.r_target[t][r] = rng.uniform(0.0, 0.4 * dev.p_max);
      if (rng.uniform() < 0.15) p.fixed[t] = int(rng.uniform_int(0, 1));
    }
    DeviceSolution sol = solve_device_milp(p);
    OracleResult oracle = oracle_solve(p);
    REQUIRE((sol.status == SolveStatus::kOptimal) == oracle.feasible);
    if (!oracle.feasible) continue;
    ++checked;
    CHECK(sol.objective == doctest::Approx(oracle.objective).epsilon(1e-9));
  }
  CHECK(checked > 30);
}
