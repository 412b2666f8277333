#include <chrono>
#include <cmath>

#include "acuc/checker.hpp"
#include "acuc/ctg.hpp"
#include "acuc/generator.hpp"
#include "acuc/parallel.hpp"
#include "acuc/pipeline.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace acuc;
using testutil::random_state;

TEST_CASE("witness trajectories are checker-feasible") {
  for (std::uint64_t seed : {1ULL, 4ULL, 9ULL}) {
    GeneratedCase g = generate_synthetic_case_with_witness(11, 3, seed);
    std::vector<Violation> v = check_feasibility(g.cs, g.witness);
    for (const Violation& x : v)
      MESSAGE(x.constraint, " ", x.entity, " t=", x.t, " m=", x.magnitude);
    CHECK(v.empty());
  }
}

TEST_CASE("constructed ramp violation is reported with its magnitude") {
  GeneratedCase g = generate_synthetic_case_with_witness(6, 2, 3);
  Case cs = g.cs;
  // give the first device room to jump, then a rate it must violate
  const int d = 0;
  cs.devices[d].p_max = cs.devices[d].u0 * cs.devices[d].p0 + 1.0;
  const double bump = 0.2;
  cs.devices[d].ramp_up = bump - 0.1;
  cs.devices[d].ramp_down = bump - 0.1;
  Solution sol = g.witness;
  double w0 = cs.devices[d].u0 * cs.devices[d].p0;
  sol.x[sol.layout.at(kPOn, 0, d)] = w0 + bump;
  sol.x[sol.layout.at(kUOn, 0, d)] = 1.0;
  std::vector<Violation> v = check_feasibility(cs, sol);
  bool found = false;
  for (const Violation& x : v)
    if (x.constraint == "ramp_up" && std::abs(x.magnitude - 0.1) < 1e-6)
      found = true;
  CHECK(found);
}

TEST_CASE("device projection output passes the device families") {
  Case cs = generate_synthetic_case(9, 3, 6);
  FlatState st = random_state(cs, 12);
  std::vector<int> free_mask(3, -1);
  for (size_t d = 0; d < cs.devices.size(); ++d) {
    DeviceSolution sol = project_device(cs, int(d), st, free_mask);
    REQUIRE(sol.status == SolveStatus::kOptimal);
  }
  // shunt steps stay relaxed here; only the device families must clear
  Solution sol{st.layout, st.x};
  for (const Violation& v : check_feasibility(cs, sol)) {
    CHECK(v.constraint.find("ramp") == std::string::npos);
    CHECK(v.constraint.find("reserve") == std::string::npos);
    CHECK(v.constraint.find("min_") == std::string::npos);
    CHECK(v.constraint.find("integrality:u_on") == std::string::npos);
  }
}

TEST_CASE("empty market scores zero everywhere") {
  Case cs;
  cs.id = "empty";
  cs.time.durations = {1.0};
  Bus b;
  b.id = "b1";
  b.reference = true;
  cs.buses.push_back(b);
  Device d;
  d.id = "g";
  d.kind = DeviceKind::producer;
  d.bus = 0;
  d.blocks = {{{1.0, 5.0}}};
  d.p_max = 1.0;
  d.u0 = 0;
  cs.devices.push_back(d);
  cs.validate();
  Solution sol;
  sol.layout = StateLayout::build(cs);
  sol.x.assign(sol.layout.total, 0.0);
  for (int i = 0; i < 1; ++i) sol.x[sol.layout.at(kV, 0, i)] = 1.0;
  sol.x[sol.layout.at(kTau, 0, 0)] = 1.0;  // no branches; harmless
  SolutionReport rep = score_solution(cs, sol);
  CHECK(rep.z_ms == 0.0);
  CHECK(rep.terms.en_cost == 0.0);
  CHECK(rep.terms.p_balance == 0.0);
}

TEST_CASE("hand-built overload scores d*c*(s - smax)") {
  GeneratedCase g = generate_synthetic_case_with_witness(6, 1, 14);
  Case cs = g.cs;
  // shrink one line's limit below its witness loading
  Solution sol = g.witness;
  SolutionReport base = score_solution(cs, sol);
  REQUIRE(base.terms.ac_overload == 0.0);
  // recompute the flow on branch 0 and set the limit under it
  int j = 0;
  while (cs.branches[j].is_transformer()) ++j;
  const Branch& br0 = cs.branches[j];
  // evaluate the loaded apparent power via the solver-side path for setup
  FlatState st = init_state(cs);
  st.x = sol.x;
  FlowSet fl = eval_flows(cs, st);
  double s = std::max(std::hypot(fl.p_fr[j], fl.q_fr[j]),
                      std::hypot(fl.p_to[j], fl.q_to[j]));
  Case cs2 = cs;
  cs2.branches[j].s_max = s - 0.05;
  SolutionReport rep = score_solution(cs2, sol);
  CHECK(rep.terms.ac_overload ==
        doctest::Approx(cs.time.durations[0] * cs.penalty.c_s * 0.05)
            .epsilon(1e-6));
  (void)br0;
}

TEST_CASE("checker agrees with the solver's hard-form evaluation") {
  for (std::uint64_t seed : {2ULL, 8ULL}) {
    Case cs = generate_synthetic_case(10, 3, seed);
    FlatState st = random_state(cs, seed + 1);
    PenaltyShape hard = PenaltyShape::hard();
    SurplusTerms mine = eval_market_surplus(cs, st, hard);
    CtgConfig ccfg;
    ccfg.eps_pcg = 1e-11;
    CtgWorkspace ws = build_ctg_workspace(cs, ccfg);
    FlowSet fl = eval_flows(cs, st);
    double z_ctg = ctg_iteration(cs, st, fl, ws, hard, 1, nullptr, true);
    double solver_total = mine.market_surplus() - z_ctg;
    SolutionReport rep = score_solution(cs, Solution{st.layout, st.x});
    CHECK(rep.z_ms ==
          doctest::Approx(solver_total)
              .epsilon(1e-6));
  }
}

TEST_CASE("report is invariant to device permutation") {
  GeneratedCase g = generate_synthetic_case_with_witness(7, 2, 22);
  const Case& cs = g.cs;
  // reverse the device order in a rebuilt case + solution
  Case cs2 = cs;
  const int nd = static_cast<int>(cs.devices.size());
  std::vector<int> perm(nd);
  for (int i = 0; i < nd; ++i) perm[i] = nd - 1 - i;
  for (int i = 0; i < nd; ++i) cs2.devices[i] = cs.devices[perm[i]];
  for (Zone& z : cs2.zones)
    for (int& m : z.members) m = static_cast<int>(perm.size()) - 1 - m;
  Solution sol2;
  sol2.layout = StateLayout::build(cs2);
  sol2.x = g.witness.x;
  for (int f = kPOn; f <= kUOn; ++f) {
    VarFamily fam = static_cast<VarFamily>(f);
    if (fam == kUSh) continue;
    if (sol2.layout.count[fam] != nd) continue;
    for (int t = 0; t < sol2.layout.T; ++t)
      for (int i = 0; i < nd; ++i)
        sol2.x[sol2.layout.at(fam, t, i)] =
            g.witness.x[g.witness.layout.at(fam, t, perm[i])];
  }
  SolutionReport a = score_solution(cs, g.witness);
  SolutionReport b = score_solution(cs2, sol2);
  CHECK(a.z_ms == doctest::Approx(b.z_ms).epsilon(1e-12));
  CHECK(a.violations.size() == b.violations.size());
}

TEST_CASE("report json carries the table rows and sums to the total") {
  GeneratedCase g = generate_synthetic_case_with_witness(8, 2, 33);
  SolutionReport rep = score_solution(g.cs, g.witness, 1234.5);
  const SurplusTerms& z = rep.terms;
  double manual = z.en_value - z.en_cost - z.on_cost - z.su_cost - z.sd_cost -
                  z.ac_overload - z.xfm_overload - z.p_balance - z.q_balance -
                  z.reserve_device - z.reserve_zonal - z.penalized_linear -
                  z.ctg;
  CHECK(rep.z_ms == doctest::Approx(manual).epsilon(1e-9));
  std::string js = rep.to_json();
  CHECK(js.find("z_ctg_min") != std::string::npos);
  CHECK(js.find("gap_percent") != std::string::npos);
  CHECK(js.find("table_percent_of_gross") != std::string::npos);
}

TEST_CASE("snap shunts rounds half up and pins") {
  Case cs = generate_synthetic_case(6, 1, 2);
  REQUIRE(!cs.shunts.empty());
  cs.shunts[0].steps = 5;
  FlatState st = init_state(cs);
  int i = st.layout.at(kUSh, 0, 0);
  st.hi[i] = 5.0;
  st.x[i] = 2.4;
  snap_shunts(cs, st);
  CHECK(st.x[i] == doctest::Approx(2.0));
  CHECK(st.frozen[i] == 1);
  st.frozen[i] = 0;
  st.x[i] = 2.5;
  snap_shunts(cs, st);
  CHECK(st.x[i] == doctest::Approx(3.0));
}

TEST_CASE("fix_binaries_round orders by distance and terminates") {
  std::vector<std::vector<int>> frozen(2, std::vector<int>(2, -1));
  // distances: d0t0: |0.99-1|=0.01, d0t1: |0.5-1|=0.5, d1t0: 0.2, d1t1: 0.3
  std::vector<double> relaxed{0.99, 0.5, 0.8, 0.4};
  std::vector<double> projected{1.0, 1.0, 1.0, 0.1};
  int n = fix_binaries_round(relaxed, projected, 2, frozen, 2);
  CHECK(n == 2);
  CHECK(frozen[0][0] == 1);   // closest
  CHECK(frozen[1][0] == 1);   // second closest
  CHECK(frozen[0][1] == -1);
  // n_plus exceeding the remainder fixes everything
  n = fix_binaries_round(relaxed, projected, 2, frozen, 10);
  CHECK(n == 2);
  for (auto& row : frozen)
    for (int v : row) CHECK(v >= 0);
}

TEST_CASE("pipeline solves the trivial market feasibly and near the bound") {
  Case cs = generate_synthetic_case(4, 2, 77);
  PipelineConfig cfg;
  cfg.budget_s = 6.0;
  cfg.seed = 5;
  cfg.workers = 2;
  PipelineResult res = run_pipeline(cs, cfg);
  CHECK(res.report.feasible());
  CHECK(res.report.z_ms <= res.z_ed * (1.0 + 1e-6) + 1e-9);
  CHECK(res.report.gap_percent >= 90.0);
}

TEST_CASE("pipeline closes the two-bus market to within one percent") {
  Case cs = generate_synthetic_case(2, 2, 2);
  PipelineConfig cfg;
  cfg.budget_s = 4.0;
  cfg.seed = 1;
  PipelineResult res = run_pipeline(cs, cfg);
  CHECK(res.report.feasible());
  CHECK(res.report.gap_percent >= 99.0);
}

TEST_CASE("pipeline zero budget returns the projected baseline") {
  Case cs = generate_synthetic_case(5, 2, 13);
  PipelineConfig cfg;
  cfg.budget_s = 0.0;
  cfg.seed = 2;
  PipelineResult res = run_pipeline(cs, cfg);
  CHECK(res.report.feasible());
}

TEST_CASE("pipeline respects the wall-clock budget envelope") {
  Case cs = generate_synthetic_case(8, 3, 55);
  PipelineConfig cfg;
  cfg.budget_s = 5.0;
  cfg.seed = 1;
  auto t0 = std::chrono::steady_clock::now();
  PipelineResult res = run_pipeline(cs, cfg);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  CHECK(wall <= 1.1 * cfg.budget_s);
  CHECK(res.report.feasible());
}

TEST_CASE("pipeline determinism for a fixed seed and worker count") {
  Case cs = generate_synthetic_case(6, 2, 21);
  PipelineConfig cfg;
  cfg.budget_s = 2.0;
  cfg.seed = 9;
  cfg.workers = 2;
  PipelineResult a = run_pipeline(cs, cfg);
  PipelineResult b = run_pipeline(cs, cfg);
  CHECK(a.solution.x == b.solution.x);
  std::string sa = solution_to_json_text(cs, a.solution);
  std::string sb = solution_to_json_text(cs, b.solution);
  CHECK(sa == sb);
}

TEST_CASE("solution files round-trip through the checker identically") {
  Case cs = generate_synthetic_case(6, 2, 31);
  PipelineConfig cfg;
  cfg.budget_s = 1.5;
  PipelineResult res = run_pipeline(cs, cfg);
  std::string text = solution_to_json_text(cs, res.solution);
  Solution reload = solution_from_json_text(cs, text);
  CHECK(reload.x == res.solution.x);
  SolutionReport r2 = score_solution(cs, reload, res.z_ed);
  CHECK(r2.z_ms == doctest::Approx(res.report.z_ms).epsilon(1e-12));
}
