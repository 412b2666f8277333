#include "acuc/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "acuc/dense.hpp"

namespace acuc {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

bool connected_without(const Case& cs, int skip_branch) {
  UnionFind uf(static_cast<int>(cs.buses.size()));
  for (size_t j = 0; j < cs.branches.size(); ++j) {
    if (static_cast<int>(j) == skip_branch) continue;
    uf.unite(cs.branches[j].from, cs.branches[j].to);
  }
  for (size_t i = 1; i < cs.buses.size(); ++i)
    if (uf.find(int(i)) != uf.find(0)) return false;
  return true;
}

// DC flows for fixed injections with one optional branch removed; small
// dense solve, reference bus deleted.
std::vector<double> dc_flows(const Case& cs, const std::vector<double>& p_inj,
                             int skip_branch) {
  const int nb = static_cast<int>(cs.buses.size());
  const int ref = cs.reference_bus();
  auto red = [&](int bus) { return bus < ref ? bus : bus - 1; };
  DenseMat y(nb - 1, nb - 1);
  for (size_t j = 0; j < cs.branches.size(); ++j) {
    if (static_cast<int>(j) == skip_branch) continue;
    const Branch& br = cs.branches[j];
    double w = 1.0 / br.x;
    if (br.from != ref) y(red(br.from), red(br.from)) += w;
    if (br.to != ref) y(red(br.to), red(br.to)) += w;
    if (br.from != ref && br.to != ref) {
      y(red(br.from), red(br.to)) -= w;
      y(red(br.to), red(br.from)) -= w;
    }
  }
  std::vector<double> rhs(nb - 1, 0.0);
  for (int i = 0; i < nb; ++i)
    if (i != ref) rhs[red(i)] = p_inj[i];
  std::vector<double> th = cholesky_solve(y, rhs);
  std::vector<double> flows(cs.branches.size(), 0.0);
  for (size_t j = 0; j < cs.branches.size(); ++j) {
    if (static_cast<int>(j) == skip_branch) continue;
    const Branch& br = cs.branches[j];
    double tf = br.from == ref ? 0.0 : th[red(br.from)];
    double tt = br.to == ref ? 0.0 : th[red(br.to)];
    flows[j] = (tf - tt) / br.x;
  }
  return flows;
}

}  // namespace

GeneratedCase generate_synthetic_case_with_witness(int n_bus, int T,
                                                   std::uint64_t seed) {
  if (n_bus < 2) throw ValidationError("generator: n_bus must be >= 2");
  if (T < 1) throw ValidationError("generator: T must be >= 1");
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x1234567);

  Case cs;
  cs.id = "synthetic_" + std::to_string(n_bus) + "b_" + std::to_string(T) +
          "t_s" + std::to_string(seed);
  cs.time.durations.assign(T, 1.0);
  cs.time.t0 = 0.0;
  cs.time.tf = 600.0;
  cs.penalty = PenaltyCosts{2500.0, 2500.0, 1200.0};

  for (int i = 0; i < n_bus; ++i) {
    Bus b;
    b.id = "bus" + std::to_string(i + 1);
    b.v_min = 0.94;
    b.v_max = 1.06;
    b.reference = (i == 0);
    cs.buses.push_back(b);
  }

  // Ring plus chords: every branch sits on a cycle, so any single outage
  // leaves the graph connected (n_bus == 2 gets a single line instead).
  auto add_branch = [&](int from, int to) {
    Branch br;
    br.id = "br" + std::to_string(cs.branches.size() + 1);
    br.from = from;
    br.to = to;
    br.x = rng.uniform(0.03, 0.08);
    double r = 0.05 * br.x;
    double den = r * r + br.x * br.x;
    br.g_sr = r / den;
    br.b_sr = -br.x / den;
    br.b_ch = rng.uniform(0.005, 0.02);
    cs.branches.push_back(br);
  };
  if (n_bus == 2) {
    add_branch(0, 1);
  } else {
    for (int i = 0; i < n_bus; ++i) add_branch(i, (i + 1) % n_bus);
    int n_chord = std::max(1, n_bus / 3);
    std::set<std::pair<int, int>> used;
    for (int c = 0; c < n_chord; ++c) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        int a = static_cast<int>(rng.uniform_int(0, n_bus - 1));
        int b = static_cast<int>(rng.uniform_int(0, n_bus - 1));
        if (a == b) continue;
        if (std::abs(a - b) == 1 || std::abs(a - b) == n_bus - 1) continue;
        auto key = std::minmax(a, b);
        if (used.count(key)) continue;
        used.insert(key);
        add_branch(key.first, key.second);
        break;
      }
    }
    // a couple of ring branches become transformers
    int n_xfm = std::min<int>(2, n_bus / 4);
    for (int c = 0; c < n_xfm; ++c) {
      Branch& br = cs.branches[rng.uniform_int(0, n_bus - 1)];
      br.tau_min = 0.95;
      br.tau_max = 1.05;
      br.phi_min = -0.15;
      br.phi_max = 0.15;
    }
  }

  // Devices: roughly half producers, half consumers, one per bus.
  int n_pr = std::clamp(static_cast<int>(std::lround(n_bus * 0.45)), 1,
                        n_bus - 1);
  std::vector<int> order(n_bus);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n_bus - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(0, i)]);
  std::vector<bool> is_producer_bus(n_bus, false);
  for (int i = 0; i < n_pr; ++i) is_producer_bus[order[i]] = true;

  std::vector<int> producers, consumers;
  std::vector<std::vector<double>> demand;  // consumer demand per t
  double peak_total = 0.0;
  std::vector<double> total_demand_t(T, 0.0);
  for (int i = 0; i < n_bus; ++i) {
    if (is_producer_bus[i]) continue;
    Device d;
    d.kind = DeviceKind::consumer;
    d.id = "load" + std::to_string(consumers.size() + 1);
    d.bus = i;
    double base = rng.uniform(0.2, 0.5);
    double phase = rng.uniform(0.0, 2.0 * kPi);
    std::vector<double> prof(T);
    double peak = 0.0;
    for (int t = 0; t < T; ++t) {
      prof[t] = base * (1.0 + 0.25 * std::sin(2.0 * kPi * t / std::max(1, T) + phase));
      peak = std::max(peak, prof[t]);
      total_demand_t[t] += prof[t];
    }
    peak_total += peak;
    double v1 = rng.uniform(320.0, 480.0);
    double v2 = rng.uniform(160.0, 290.0);
    for (int t = 0; t < T; ++t)
      d.blocks.push_back({{0.75 * prof[t], v1}, {0.35 * prof[t], v2}});
    d.p_min = 0.0;
    d.p_max = 1.1 * peak;
    d.q_min = 0.0;
    d.q_max = 0.35 * peak + 0.05;
    d.cost_on = rng.uniform(0.0, 2.0);
    d.min_up = 1;
    d.min_down = 1;
    d.u0 = 1;
    for (int r = 0; r < kNumReserveProducts; ++r)
      d.reserve_cost[r] = rng.uniform(1.0, 6.0);
    consumers.push_back(static_cast<int>(cs.devices.size()));
    demand.push_back(prof);
    cs.devices.push_back(std::move(d));
  }
  // Producer capacity scaled for a >=25% margin over peak demand.
  std::vector<double> raw_cap;
  double raw_total = 0.0;
  for (int i = 0; i < n_bus; ++i)
    if (is_producer_bus[i]) {
      raw_cap.push_back(rng.uniform(0.4, 1.0));
      raw_total += raw_cap.back();
    }
  double scale = (1.25 * std::max(peak_total, 0.1)) / raw_total;
  int pr_seq = 0;
  for (int i = 0; i < n_bus; ++i) {
    if (!is_producer_bus[i]) continue;
    Device d;
    d.kind = DeviceKind::producer;
    d.id = "gen" + std::to_string(producers.size() + 1);
    d.bus = i;
    d.p_max = raw_cap[pr_seq++] * scale;
    d.p_min = 0.1 * d.p_max;
    d.q_min = -0.4 * d.p_max;
    d.q_max = 0.4 * d.p_max;
    double c1 = rng.uniform(15.0, 40.0);
    double c2 = c1 + rng.uniform(5.0, 25.0);
    for (int t = 0; t < T; ++t)
      d.blocks.push_back({{0.6 * d.p_max, c1}, {0.4 * d.p_max, c2}});
    d.cost_su = rng.uniform(5.0, 30.0);
    d.cost_sd = rng.uniform(2.0, 15.0);
    d.cost_on = rng.uniform(0.5, 3.0);
    d.min_up = static_cast<int>(rng.uniform_int(1, 2));
    d.min_down = 1;
    d.u0 = 1;
    for (int r = 0; r < kNumReserveProducts; ++r)
      d.reserve_cost[r] = rng.uniform(1.0, 6.0);
    producers.push_back(static_cast<int>(cs.devices.size()));
    cs.devices.push_back(std::move(d));
  }

  // Witness dispatch: every device on, producers sharing total demand in
  // proportion to headroom, consumers at their demand profile.
  std::vector<std::vector<double>> wp(cs.devices.size(),
                                      std::vector<double>(T, 0.0));
  double sum_pmin = 0.0, sum_pmax = 0.0;
  for (int g : producers) {
    sum_pmin += cs.devices[g].p_min;
    sum_pmax += cs.devices[g].p_max;
  }
  for (int t = 0; t < T; ++t) {
    for (size_t c = 0; c < consumers.size(); ++c) wp[consumers[c]][t] = demand[c][t];
    double lam = (total_demand_t[t] - sum_pmin) / std::max(1e-9, sum_pmax - sum_pmin);
    lam = clip(lam, 0.0, 1.0);
    for (int g : producers) {
      const Device& d = cs.devices[g];
      wp[g][t] = d.p_min + lam * (d.p_max - d.p_min);
    }
  }
  for (size_t di = 0; di < cs.devices.size(); ++di) {
    Device& d = cs.devices[di];
    double max_step = 0.0;
    for (int t = 1; t < T; ++t)
      max_step = std::max(max_step, std::abs(wp[di][t] - wp[di][t - 1]));
    // allow the initial-state step and clean on/off transitions
    d.p0 = wp[di][0];
    d.ramp_up = max_step + d.p_min + 0.05 + rng.uniform(0.0, 0.1);
    d.ramp_down = max_step + d.p_min + 0.05 + rng.uniform(0.0, 0.1);
  }

  // Witness reactive dispatch: consumers draw 20% of demand, producers share.
  std::vector<std::vector<double>> wq(cs.devices.size(),
                                      std::vector<double>(T, 0.0));
  for (int t = 0; t < T; ++t) {
    double q_total = 0.0;
    for (size_t c = 0; c < consumers.size(); ++c) {
      double q = clip(0.2 * demand[c][t], cs.devices[consumers[c]].q_min,
                      cs.devices[consumers[c]].q_max);
      wq[consumers[c]][t] = q;
      q_total += q;
    }
    for (int g : producers) {
      double q = clip(q_total / producers.size(), cs.devices[g].q_min,
                      cs.devices[g].q_max);
      wq[g][t] = q;
    }
  }

  // Shunts and a dc line on larger cases.
  if (n_bus >= 5) {
    int n_sh = 1 + (n_bus >= 12 ? 1 : 0);
    for (int s = 0; s < n_sh; ++s) {
      Shunt sh;
      sh.id = "sh" + std::to_string(s + 1);
      sh.bus = static_cast<int>(rng.uniform_int(0, n_bus - 1));
      sh.steps = static_cast<int>(rng.uniform_int(3, 5));
      sh.g_step = 0.0005;
      sh.b_step = rng.uniform(0.01, 0.03);
      cs.shunts.push_back(sh);
    }
  }
  if (n_bus >= 8) {
    DcLine dc;
    dc.id = "dc1";
    dc.from = 1;
    dc.to = n_bus / 2 + 1;
    dc.p_max = rng.uniform(0.2, 0.4);
    dc.q_fr_min = -0.1;
    dc.q_fr_max = 0.1;
    dc.q_to_min = -0.1;
    dc.q_to_max = 0.1;
    cs.dc_lines.push_back(dc);
  }

  // Zones: one p-zone and one q-zone over all devices, with modest
  // requirements that online units can cover.
  {
    Zone zp;
    zp.id = "zone_p";
    zp.is_q = false;
    Zone zq;
    zq.id = "zone_q";
    zq.is_q = true;
    for (size_t dI = 0; dI < cs.devices.size(); ++dI) {
      zp.members.push_back(static_cast<int>(dI));
      zq.members.push_back(static_cast<int>(dI));
    }
    std::vector<double> rr(T);
    for (int t = 0; t < T; ++t) rr[t] = 0.02 * total_demand_t[t];
    zp.requirement[kRgu] = rr;
    zp.requirement[kRgd] = rr;
    std::vector<double> rs(T);
    for (int t = 0; t < T; ++t) rs[t] = 0.01 * total_demand_t[t];
    zp.requirement[kScr] = rs;
    zp.requirement[kRruOn] = rs;
    zp.requirement[kRrdOn] = rs;
    zq.requirement[kQru] = rs;
    zq.requirement[kQrd] = rs;
    for (int r = 0; r < kNumReserveProducts; ++r) {
      zp.penalty[r] = 900.0;
      zq.penalty[r] = 900.0;
    }
    cs.zones.push_back(std::move(zp));
    cs.zones.push_back(std::move(zq));
  }

  // Flow limits sized from witness DC flows across the base case and every
  // single-branch outage, with headroom for AC effects.
  {
    const int nb = n_bus;
    std::vector<double> base_max(cs.branches.size(), 0.0);
    std::vector<double> ctg_max(cs.branches.size(), 0.0);
    for (int t = 0; t < T; ++t) {
      std::vector<double> p_inj(nb, 0.0);
      for (size_t di = 0; di < cs.devices.size(); ++di) {
        double sgn = cs.devices[di].kind == DeviceKind::producer ? 1.0 : -1.0;
        p_inj[cs.devices[di].bus] += sgn * wp[di][t];
      }
      double imb = 0.0;
      for (double v : p_inj) imb += v;
      for (int i = 0; i < nb; ++i) p_inj[i] -= imb / nb;
      std::vector<double> f = dc_flows(cs, p_inj, -1);
      for (size_t jx = 0; jx < f.size(); ++jx)
        base_max[jx] = std::max(base_max[jx], std::abs(f[jx]));
      if (cs.branches.size() > 1 && n_bus > 2) {
        for (size_t k = 0; k < cs.branches.size(); ++k) {
          if (!connected_without(cs, static_cast<int>(k))) continue;
          std::vector<double> fk = dc_flows(cs, p_inj, static_cast<int>(k));
          for (size_t jx = 0; jx < fk.size(); ++jx)
            ctg_max[jx] = std::max(ctg_max[jx], std::abs(fk[jx]));
        }
      }
    }
    for (size_t jx = 0; jx < cs.branches.size(); ++jx) {
      Branch& br = cs.branches[jx];
      br.s_max = 1.35 * base_max[jx] + 0.25;
      br.s_max_ctg = std::max(br.s_max, 1.15 * ctg_max[jx] + 0.25);
    }
  }

  // Contingencies: every branch whose outage keeps the graph connected.
  for (size_t jx = 0; jx < cs.branches.size(); ++jx) {
    if (!connected_without(cs, static_cast<int>(jx))) continue;
    Contingency k;
    k.id = "ctg_" + cs.branches[jx].id;
    k.branch = static_cast<int>(jx);
    cs.contingencies.push_back(k);
  }

  cs.validate();

  // Assemble the witness solution.
  Solution wit;
  wit.layout = StateLayout::build(cs);
  wit.x.assign(wit.layout.total, 0.0);
  const StateLayout& ly = wit.layout;
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n_bus; ++i) {
      wit.x[ly.at(kV, t, i)] = 1.0;
      wit.x[ly.at(kTheta, t, i)] = 0.0;
    }
    for (size_t jx = 0; jx < cs.branches.size(); ++jx) {
      wit.x[ly.at(kTau, t, int(jx))] = clip(1.0, cs.branches[jx].tau_min,
                                            cs.branches[jx].tau_max);
      wit.x[ly.at(kPhi, t, int(jx))] = clip(0.0, cs.branches[jx].phi_min,
                                            cs.branches[jx].phi_max);
    }
    for (size_t di = 0; di < cs.devices.size(); ++di) {
      wit.x[ly.at(kUOn, t, int(di))] = 1.0;
      wit.x[ly.at(kPOn, t, int(di))] = wp[di][t];
      wit.x[ly.at(kQ, t, int(di))] = wq[di][t];
    }
  }
  return GeneratedCase{std::move(cs), std::move(wit)};
}

Case generate_synthetic_case(int n_bus, int T, std::uint64_t seed) {
  return generate_synthetic_case_with_witness(n_bus, T, seed).cs;
}

}  // namespace acuc
