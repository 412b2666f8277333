#include <cmath>

#include "acuc/generator.hpp"
#include "acuc/parallel.hpp"
#include "acuc/solvers.hpp"
#include "acuc/surplus.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace acuc;
using testutil::random_state;

namespace {

// single-bus case with one device and no network, for term isolation
Case one_device_case(int T, DeviceKind kind, double cost_su, double cost_sd,
                     double ramp, int u0, double p0) {
  Case cs;
  cs.id = "one_device";
  cs.time.durations.assign(T, 1.0);
  Bus b;
  b.id = "b1";
  b.v_min = 0.9;
  b.v_max = 1.1;
  b.reference = true;
  cs.buses.push_back(b);
  Device d;
  d.id = "d1";
  d.kind = kind;
  d.bus = 0;
  for (int t = 0; t < T; ++t) d.blocks.push_back({{2.0, 0.0}});
  d.p_min = 0.0;
  d.p_max = 2.0;
  d.q_min = -1.0;
  d.q_max = 1.0;
  d.ramp_up = ramp;
  d.ramp_down = ramp;
  d.cost_su = cost_su;
  d.cost_sd = cost_sd;
  d.u0 = u0;
  d.p0 = p0;
  cs.devices.push_back(d);
  cs.penalty = PenaltyCosts{1.0, 1.0, 1.0};
  cs.validate();
  return cs;
}

}  // namespace

TEST_CASE("energy cost piecewise blocks") {
  std::vector<CostBlock> blocks{{1.0, 10.0}, {2.0, 20.0}};
  CHECK(energy_cost(0.0, blocks, 1.0).z == 0.0);
  EnergyCost e = energy_cost(2.5, blocks, 1.0);
  CHECK(e.z == doctest::Approx(40.0));
  CHECK(e.dzdp == doctest::Approx(20.0));
  CHECK(!e.exceeded);
  e = energy_cost(3.0, blocks, 1.0);
  CHECK(e.z == doctest::Approx(50.0));
  CHECK(e.dzdp == doctest::Approx(20.0));
  e = energy_cost(3.5, blocks, 1.0);
  CHECK(e.z == doctest::Approx(50.0));
  CHECK(e.exceeded);
}

TEST_CASE("energy cost matches the block lp") {
  // min sum c_m p_m  s.t. sum p_m = p, 0 <= p_m <= size
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CostBlock> blocks;
    double total = 0.0, prev = 0.0;
    for (int m = 0; m < 3; ++m) {
      double size = rng.uniform(0.2, 1.0);
      prev += rng.uniform(0.1, 5.0);
      blocks.push_back({size, prev});
      total += size;
    }
    double p = rng.uniform(0.0, total);
    double d_t = rng.uniform(0.5, 2.0);
    LpProblem lp;
    std::vector<std::pair<int, double>> row;
    for (const CostBlock& b : blocks)
      row.push_back({lp.add_var(0.0, b.size, d_t * b.marginal), 1.0});
    lp.add_eq(std::move(row), p);
    SolveResult r = solve_lp(lp);
    REQUIRE(r.optimal());
    CHECK(energy_cost(p, blocks, d_t).z ==
          doctest::Approx(r.objective).epsilon(1e-7));
  }
}

TEST_CASE("startup shutdown sequences") {
  Case cs = one_device_case(4, DeviceKind::producer, 1.0, 1.0, 10.0, 0, 0.0);
  FlatState st = init_state(cs);
  // u = [1, 1, 0, 1], u0 = 0 -> su = [1,0,0,1], sd = [0,0,1,0]
  st.set(kUOn, 0, 0, 1.0);
  st.set(kUOn, 1, 0, 1.0);
  st.set(kUOn, 2, 0, 0.0);
  st.set(kUOn, 3, 0, 1.0);
  SurplusTerms z = eval_market_surplus(cs, st, PenaltyShape::hard());
  CHECK(z.su_cost == doctest::Approx(2.0));
  CHECK(z.sd_cost == doctest::Approx(1.0));
}

TEST_CASE("startup with constant on sequence is zero") {
  Case cs = one_device_case(3, DeviceKind::producer, 5.0, 3.0, 10.0, 1, 0.0);
  FlatState st = init_state(cs);
  for (int t = 0; t < 3; ++t) st.set(kUOn, t, 0, 1.0);
  SurplusTerms z = eval_market_surplus(cs, st, PenaltyShape::hard());
  CHECK(z.su_cost == 0.0);
  CHECK(z.sd_cost == 0.0);
}

TEST_CASE("relaxed startup fractions") {
  Case cs = one_device_case(2, DeviceKind::producer, 1.0, 1.0, 10.0, 0, 0.0);
  FlatState st = init_state(cs);
  st.set(kUOn, 0, 0, 0.3);
  st.set(kUOn, 1, 0, 0.8);
  SurplusTerms z = eval_market_surplus(cs, st, PenaltyShape::hard());
  CHECK(z.su_cost == doctest::Approx(0.3 + 0.5));
}

TEST_CASE("branch flows zero-angle symmetry") {
  Branch br;
  br.g_sr = 0.0;
  br.b_sr = -5.0;
  br.b_ch = 0.0;
  br.x = 0.2;
  BranchEval e = eval_branch(br, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
  CHECK(e.p_fr == doctest::Approx(0.0));
  CHECK(e.p_to == doctest::Approx(0.0));
}

TEST_CASE("branch flow hand value") {
  Branch br;
  br.g_sr = 0.0;
  br.b_sr = -10.0;
  br.b_ch = 0.0;
  BranchEval e = eval_branch(br, 1.0, 1.0, 0.1, 0.0, 0.0, 1.0);
  CHECK(e.p_fr == doctest::Approx(10.0 * std::sin(0.1)).epsilon(1e-12));
}

TEST_CASE("branch partial dpfr/dvto matches the quoted form and fd") {
  Branch br;
  br.g_sr = 1.2;
  br.b_sr = -8.0;
  br.b_ch = 0.06;
  br.tau_min = 0.9;
  br.tau_max = 1.1;
  const double vf = 1.03, vt = 0.97, thf = 0.12, tht = -0.03, phi = 0.02,
               tau = 1.04;
  BranchEval e = eval_branch(br, vf, vt, thf, tht, phi, tau);
  const double delta = thf - tht - phi;
  const double quoted = (-br.g_sr * std::cos(delta) - br.b_sr * std::sin(delta)) *
                        vf / tau;
  CHECK(e.dpfr_dvt == doctest::Approx(quoted).epsilon(1e-14));
  const double h = 6e-6;
  BranchEval ep = eval_branch(br, vf, vt + h, thf, tht, phi, tau);
  BranchEval em = eval_branch(br, vf, vt - h, thf, tht, phi, tau);
  CHECK(std::abs((ep.p_fr - em.p_fr) / (2 * h) - e.dpfr_dvt) < 1e-10);
}

TEST_CASE("all branch partials match finite differences") {
  Branch br;
  br.g_sr = 0.8;
  br.b_sr = -6.5;
  br.b_ch = 0.04;
  const double vf = 1.02, vt = 0.98, thf = 0.07, tht = -0.05, phi = -0.01,
               tau = 0.97;
  BranchEval e = eval_branch(br, vf, vt, thf, tht, phi, tau);
  const double h = 5e-6;
  auto fd = [&](auto getter, double BranchEval::*field, int arg) {
    double args[6] = {vf, vt, thf, tht, phi, tau};
    auto eval_at = [&](double delta_arg) {
      double a[6] = {vf, vt, thf, tht, phi, tau};
      a[arg] += delta_arg;
      return eval_branch(br, a[0], a[1], a[2], a[3], a[4], a[5]);
    };
    BranchEval p = eval_at(h), m = eval_at(-h);
    double want = (getter(p) - getter(m)) / (2 * h);
    CHECK(std::abs(e.*field - want) < 1e-8);
    (void)args;
  };
  auto gp = [](const BranchEval& b) { return b.p_fr; };
  auto gq = [](const BranchEval& b) { return b.q_fr; };
  auto gp2 = [](const BranchEval& b) { return b.p_to; };
  auto gq2 = [](const BranchEval& b) { return b.q_to; };
  fd(gp, &BranchEval::dpfr_dvf, 0);
  fd(gp, &BranchEval::dpfr_dvt, 1);
  fd(gq, &BranchEval::dqfr_dvf, 0);
  fd(gq, &BranchEval::dqfr_dvt, 1);
  fd(gp2, &BranchEval::dpto_dvf, 0);
  fd(gp2, &BranchEval::dpto_dvt, 1);
  fd(gq2, &BranchEval::dqto_dvf, 0);
  fd(gq2, &BranchEval::dqto_dvt, 1);
  fd(gp, &BranchEval::dpfr_dtau, 5);
  fd(gq, &BranchEval::dqfr_dtau, 5);
  fd(gp2, &BranchEval::dpto_dtau, 5);
  fd(gq2, &BranchEval::dqto_dtau, 5);
}

TEST_CASE("line overload boundary and 3-4-5") {
  OverloadEval z = line_overload_penalty(3.0, 4.0, 0.0, 0.0, 5.0, 1.0, 1.0, 0.0);
  CHECK(z.z == doctest::Approx(0.0));
  z = line_overload_penalty(3.0, 4.0, 0.0, 0.0, 4.0, 1.0, 1.0, 0.0);
  CHECK(z.z == doctest::Approx(1.0));
}

TEST_CASE("soft overload gradient matches finite differences") {
  const double eps = 1e-3;
  const double p = 3.0, q = 4.0;
  OverloadEval z = line_overload_penalty(p, q, 0.1, 0.1, 4.0, 1.3, 2.0, eps);
  const double h = 1e-6;
  auto f = [&](double pp, double qq) {
    return line_overload_penalty(pp, qq, 0.1, 0.1, 4.0, 1.3, 2.0, eps).z;
  };
  CHECK(std::abs((f(p + h, q) - f(p - h, q)) / (2 * h) - z.dp_fr) < 1e-8);
  CHECK(std::abs((f(p, q + h) - f(p, q - h)) / (2 * h) - z.dq_fr) < 1e-8);
}

TEST_CASE("power balance penalty forms") {
  PenaltyShape s{1e-2, 1.0, 0.0};
  double g = 0.0;
  CHECK(power_balance_penalty(0.0, 1.0, 1.0, s, &g) == doctest::Approx(1e-2));
  CHECK(g == 0.0);
  PenaltyShape hard{0.0, 1.0, 0.0};
  CHECK(power_balance_penalty(1.0, 1.0, 1e3, hard, &g) == doctest::Approx(1e3));
  s.eps = 1e-3;
  const double x = 0.37;
  power_balance_penalty(x, 1.0, 1.0, s, &g);
  const double h = 1e-6;
  double fd = (power_balance_penalty(x + h, 1.0, 1.0, s, nullptr) -
               power_balance_penalty(x - h, 1.0, 1.0, s, nullptr)) /
              (2 * h);
  CHECK(std::abs(fd - g) < 1e-8);
}

TEST_CASE("zonal shortfall hard value") {
  Case cs = one_device_case(1, DeviceKind::producer, 0.0, 0.0, 10.0, 1, 0.0);
  Zone z;
  z.id = "z1";
  z.members = {0};
  z.requirement[kRgu] = {1.0};
  z.penalty[kRgu] = 1e3;
  cs.zones.push_back(z);
  cs.validate();
  FlatState st = init_state(cs);
  st.set(kResRgu, 0, 0, 0.4);
  SurplusTerms out = eval_market_surplus(cs, st, PenaltyShape::hard());
  CHECK(out.reserve_zonal == doctest::Approx(600.0));
}

TEST_CASE("penalized ramp row value") {
  Case cs = one_device_case(2, DeviceKind::producer, 0.0, 0.0, 0.3, 1, 0.5);
  FlatState st = init_state(cs);
  st.set(kUOn, 0, 0, 1.0);
  st.set(kUOn, 1, 0, 1.0);
  st.set(kPOn, 0, 0, 0.5);
  st.set(kPOn, 1, 0, 1.0);  // jump 0.5 > ramp 0.3: violated by 0.2
  PenaltyShape shape{1e-6, 1.0, 10.0};
  SurplusTerms out = eval_market_surplus(cs, st, shape);
  CHECK(out.penalized_linear == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("feasible point rows vanish as eps tends to zero") {
  GeneratedCase g = generate_synthetic_case_with_witness(8, 3, 21);
  FlatState st = init_state(g.cs);
  st.x = g.witness.x;
  PenaltyShape shape{1e-8, 1.0, 100.0};
  SurplusTerms out = eval_market_surplus(g.cs, st, shape);
  // the soft form floors every satisfied row at rho*eps; past that floor the
  // active violation mass is zero on a feasible point
  const double n_rows = double(kRowsPerDeviceTime) * g.cs.devices.size() *
                        g.cs.time.periods();
  CHECK(out.penalized_linear - shape.rho * shape.eps * n_rows < 1e-6);
  SurplusTerms hard = eval_market_surplus(g.cs, st, PenaltyShape::hard());
  CHECK(hard.penalized_linear == 0.0);
}

TEST_CASE("zero-demand all-off case scores zero") {
  Case cs = one_device_case(2, DeviceKind::producer, 0.0, 0.0, 10.0, 0, 0.0);
  FlatState st = init_state(cs);
  SurplusTerms out = eval_market_surplus(cs, st, PenaltyShape::hard());
  CHECK(out.market_surplus() == 0.0);
}

TEST_CASE("term sum equals total") {
  Case cs = generate_synthetic_case(8, 3, 17);
  FlatState st = random_state(cs, 3);
  PenaltyShape shape{1e-3, 0.6, 40.0};
  SurplusTerms z = eval_market_surplus(cs, st, shape);
  double manual = z.en_value - z.en_cost - z.on_cost - z.su_cost - z.sd_cost -
                  z.ac_overload - z.xfm_overload - z.p_balance - z.q_balance -
                  z.reserve_device - z.reserve_zonal - z.penalized_linear -
                  z.ctg;
  CHECK(z.market_surplus() ==
        doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("objective purity") {
  Case cs = generate_synthetic_case(9, 2, 31);
  FlatState st = random_state(cs, 9);
  PenaltyShape shape{1e-3, 0.5, 25.0};
  SurplusTerms a = eval_market_surplus(cs, st, shape);
  SurplusTerms b = eval_market_surplus(cs, st, shape);
  CHECK(a.market_surplus() == b.market_surplus());
  CHECK(a.p_balance == b.p_balance);
}

TEST_CASE("monotone tightening of the balance penalty") {
  Case cs = generate_synthetic_case(6, 2, 13);
  FlatState st = random_state(cs, 4);
  double prev = kInf;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    PenaltyShape s{eps, 0.5, 0.0};
    double zp = eval_market_surplus(cs, st, s).p_balance;
    CHECK(zp <= prev + 1e-12);
    prev = zp;
  }
  double lo = eval_market_surplus(cs, st, {1e-3, 0.2, 0.0}).p_balance;
  double hi = eval_market_surplus(cs, st, {1e-3, 0.9, 0.0}).p_balance;
  CHECK(hi >= lo);
}

TEST_CASE("gradient matches finite differences on a random 5-bus state") {
  Case cs = generate_synthetic_case(5, 2, 99);
  FlatState st = random_state(cs, 17);
  PenaltyShape shape{1e-3, 0.7, 50.0};
  std::vector<double> grad;
  backprop_market_surplus(cs, st, shape, grad);
  CHECK(testutil::gradcheck(cs, st, shape, grad) < 1e-6);
}

TEST_CASE("gradient is bit-identical across worker counts") {
  Case cs = generate_synthetic_case(10, 4, 55);
  FlatState st = random_state(cs, 7);
  PenaltyShape shape{1e-3, 0.7, 50.0};
  std::vector<double> g1, g2, g4;
  set_workers(1);
  backprop_market_surplus(cs, st, shape, g1);
  set_workers(2);
  backprop_market_surplus(cs, st, shape, g2);
  set_workers(4);
  backprop_market_surplus(cs, st, shape, g4);
  set_workers(2);
  CHECK(g1 == g2);
  CHECK(g1 == g4);
}

TEST_CASE("zero-demand gradient of p_on isolates the energy marginal") {
  // at zero dispatch the balance and row terms contribute nothing to p_on
  for (int u0 : {0, 1}) {
    Case cs = one_device_case(1, DeviceKind::producer, 0.0, 0.0, 10.0, u0, 0.0);
    cs.devices[0].blocks[0][0].marginal = 10.0;
    FlatState st = init_state(cs);
    PenaltyShape shape{1e-3, 1.0, 10.0};
    std::vector<double> grad;
    backprop_market_surplus(cs, st, shape, grad);
    const double u = st.get(kUOn, 0, 0);
    EnergyCost en =
        energy_cost(u * st.get(kPOn, 0, 0), cs.devices[0].blocks[0], 1.0);
    CHECK(grad[st.layout.at(kPOn, 0, 0)] ==
          doctest::Approx(u * en.dzdp).epsilon(1e-12));
  }
}
