#include "acuc/checker.hpp"

#include <algorithm>
#include <cmath>

#include "acuc/dense.hpp"
#include "acuc/parallel.hpp"
#include "json.hpp"

namespace acuc {

namespace {

// Checker-local flow evaluation: same branch model, separate implementation
// from the solver's, so agreement between the two paths is evidence.
struct CheckerFlows {
  std::vector<double> p_fr, q_fr, p_to, q_to;  // per branch
  std::vector<double> p_mis, q_mis;            // per bus, consumption positive
};

CheckerFlows flows_at(const Case& cs, const Solution& sol, int t) {
  const int nb = static_cast<int>(cs.buses.size());
  const int nbr = static_cast<int>(cs.branches.size());
  CheckerFlows fl;
  fl.p_fr.assign(nbr, 0.0);
  fl.q_fr.assign(nbr, 0.0);
  fl.p_to.assign(nbr, 0.0);
  fl.q_to.assign(nbr, 0.0);
  fl.p_mis.assign(nb, 0.0);
  fl.q_mis.assign(nb, 0.0);
  for (int j = 0; j < nbr; ++j) {
    const Branch& br = cs.branches[j];
    const double vf = sol.get(kV, t, br.from);
    const double vt = sol.get(kV, t, br.to);
    const double tau = sol.get(kTau, t, j);
    const double delta = sol.get(kTheta, t, br.from) -
                         sol.get(kTheta, t, br.to) - sol.get(kPhi, t, j);
    const double g = br.g_sr, b = br.b_sr, bc2 = 0.5 * br.b_ch;
    const double vf2 = vf * vf / (tau * tau);
    const double m = vf * vt / tau;
    fl.p_fr[j] = g * vf2 - m * (g * std::cos(delta) + b * std::sin(delta));
    fl.q_fr[j] =
        -(b + bc2) * vf2 - m * (g * std::sin(delta) - b * std::cos(delta));
    fl.p_to[j] =
        g * vt * vt - m * (g * std::cos(delta) - b * std::sin(delta));
    fl.q_to[j] = -(b + bc2) * vt * vt +
                 m * (g * std::sin(delta) + b * std::cos(delta));
    fl.p_mis[br.from] += fl.p_fr[j];
    fl.q_mis[br.from] += fl.q_fr[j];
    fl.p_mis[br.to] += fl.p_to[j];
    fl.q_mis[br.to] += fl.q_to[j];
  }
  for (size_t s = 0; s < cs.shunts.size(); ++s) {
    const Shunt& sh = cs.shunts[s];
    const double u = sol.get(kUSh, t, int(s));
    const double v2 = sol.get(kV, t, sh.bus) * sol.get(kV, t, sh.bus);
    fl.p_mis[sh.bus] += u * sh.g_step * v2;
    fl.q_mis[sh.bus] -= u * sh.b_step * v2;
  }
  for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
    const DcLine& dc = cs.dc_lines[l];
    const double p = sol.get(kPDcFr, t, int(l));
    fl.p_mis[dc.from] += p;
    fl.p_mis[dc.to] -= p;
    fl.q_mis[dc.from] += sol.get(kQDcFr, t, int(l));
    fl.q_mis[dc.to] += sol.get(kQDcTo, t, int(l));
  }
  for (size_t d = 0; d < cs.devices.size(); ++d) {
    const Device& dev = cs.devices[d];
    const double u = sol.get(kUOn, t, int(d));
    const double sgn = dev.kind == DeviceKind::consumer ? 1.0 : -1.0;
    fl.p_mis[dev.bus] += sgn * u * sol.get(kPOn, t, int(d));
    fl.q_mis[dev.bus] += sgn * u * sol.get(kQ, t, int(d));
  }
  return fl;
}

double blocks_cost(double p, const std::vector<CostBlock>& blocks, double d_t) {
  double z = 0.0, cum = 0.0;
  for (const CostBlock& b : blocks) {
    z += d_t * b.marginal * std::max(std::min(p - cum, b.size), 0.0);
    cum += b.size;
  }
  return z;
}

// dense reduced DC solve with one branch removed
std::vector<double> dense_dc_solve(const Case& cs, int skip_branch,
                                   const std::vector<double>& rhs_reduced,
                                   const std::vector<int>& red) {
  const int n = static_cast<int>(cs.buses.size()) - 1;
  DenseMat y(n, n);
  for (size_t j = 0; j < cs.branches.size(); ++j) {
    if (int(j) == skip_branch) continue;
    const Branch& br = cs.branches[j];
    const double w = 1.0 / br.x;
    const int f = red[br.from], t = red[br.to];
    if (f >= 0) y(f, f) += w;
    if (t >= 0) y(t, t) += w;
    if (f >= 0 && t >= 0) {
      y(f, t) -= w;
      y(t, f) -= w;
    }
  }
  return cholesky_solve(y, rhs_reduced);
}

}  // namespace

std::vector<Violation> check_feasibility(const Case& cs, const Solution& sol) {
  std::vector<Violation> out;
  const StateLayout& ly = sol.layout;
  const int T = ly.T;
  const double tol = 1e-8;
  auto add = [&](const std::string& c, const std::string& e, int t, double m) {
    out.push_back({c, e, t, m});
  };

  // bounds audit against the case-derived box
  {
    FlatState box;
    box.layout = ly;
    box.x.assign(ly.total, 0.0);
    box.lo.assign(ly.total, -kInf);
    box.hi.assign(ly.total, kInf);
    box.m.assign(ly.total, 0.0);
    box.v.assign(ly.total, 0.0);
    box.frozen.assign(ly.total, 0);
    fill_bounds(cs, box);
    for (int f = 0; f < kNumVarFamilies; ++f)
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < ly.count[f]; ++i) {
          int k = ly.at(static_cast<VarFamily>(f), t, i);
          double lo_v = box.lo[k] - sol.x[k];
          double hi_v = sol.x[k] - box.hi[k];
          double v = std::max(lo_v, hi_v);
          if (v > tol)
            add(std::string("bounds:") + kVarFamilyNames[f],
                kVarFamilyNames[f] + std::string("[") + std::to_string(i) + "]",
                t, v);
        }
  }

  for (size_t d = 0; d < cs.devices.size(); ++d) {
    const Device& dev = cs.devices[d];
    // integrality
    std::vector<int> u(T, 0);
    bool integral = true;
    for (int t = 0; t < T; ++t) {
      double uv = sol.get(kUOn, t, int(d));
      double dist = std::abs(uv - std::round(uv));
      if (dist > 1e-9) {
        add("integrality:u_on", dev.id, t, dist);
        integral = false;
      }
      u[t] = int(std::round(uv));
    }
    // ramping on dispatched power
    double w_prev = dev.u0 * dev.p0;
    for (int t = 0; t < T; ++t) {
      double w = sol.get(kUOn, t, int(d)) * sol.get(kPOn, t, int(d));
      if (w - w_prev - dev.ramp_up > tol)
        add("ramp_up", dev.id, t, w - w_prev - dev.ramp_up);
      if (w_prev - w - dev.ramp_down > tol)
        add("ramp_down", dev.id, t, w_prev - w - dev.ramp_down);
      w_prev = w;
    }
    // minimum up/down, windows truncated at the horizon
    if (integral) {
      int prev = dev.u0;
      for (int t = 0; t < T; ++t) {
        if (u[t] == 1 && prev == 0) {
          int end = std::min(T - 1, t + dev.min_up - 1);
          for (int s = t; s <= end; ++s)
            if (u[s] == 0) add("min_up", dev.id, s, 1.0);
        }
        if (u[t] == 0 && prev == 1) {
          int end = std::min(T - 1, t + dev.min_down - 1);
          for (int s = t; s <= end; ++s)
            if (u[s] == 1) add("min_down", dev.id, s, 1.0);
        }
        prev = u[t];
      }
    }
    // reserve linking
    for (int t = 0; t < T; ++t) {
      const double uv = sol.get(kUOn, t, int(d));
      const double w = uv * sol.get(kPOn, t, int(d));
      const double wq = uv * sol.get(kQ, t, int(d));
      auto r = [&](int prod) {
        return sol.get(reserve_family(prod), t, int(d));
      };
      auto link = [&](const char* name, double lhs) {
        if (lhs > tol) add(name, dev.id, t, lhs);
      };
      link("reserve:headroom_up",
           w + r(kRgu) + r(kScr) + r(kRruOn) - uv * dev.p_max);
      link("reserve:headroom_down",
           uv * dev.p_min - w + r(kRgd) + r(kRrdOn));
      link("reserve:nsc_cap", r(kNsc) - (1.0 - uv) * dev.p_max);
      link("reserve:rru_off_cap", r(kRruOff) - (1.0 - uv) * dev.p_max);
      link("reserve:rrd_off_cap", r(kRrdOff) - (1.0 - uv) * dev.p_max);
      link("reserve:q_up", wq + r(kQru) - uv * dev.q_max);
      link("reserve:q_down", uv * dev.q_min - wq + r(kQrd));
    }
  }
  for (size_t s = 0; s < cs.shunts.size(); ++s)
    for (int t = 0; t < T; ++t) {
      double uv = sol.get(kUSh, t, int(s));
      double dist = std::abs(uv - std::round(uv));
      if (dist > 1e-9) add("integrality:u_sh", cs.shunts[s].id, t, dist);
    }
  for (size_t l = 0; l < cs.dc_lines.size(); ++l)
    for (int t = 0; t < T; ++t) {
      const DcLine& dc = cs.dc_lines[l];
      double p = sol.get(kPDcFr, t, int(l));
      if (std::abs(p) - dc.p_max > tol)
        add("dc_line:p_limit", dc.id, t, std::abs(p) - dc.p_max);
    }
  return out;
}

SolutionReport score_solution(const Case& cs, const Solution& sol,
                              double z_ed) {
  SolutionReport rep;
  const StateLayout& ly = sol.layout;
  const int T = ly.T;
  const int nbr = static_cast<int>(cs.branches.size());
  SurplusTerms& z = rep.terms;

  std::vector<CheckerFlows> fl(T);
  for (int t = 0; t < T; ++t) {
    const double d_t = cs.time.durations[t];
    fl[t] = flows_at(cs, sol, t);
    for (size_t i = 0; i < cs.buses.size(); ++i) {
      z.p_balance += d_t * cs.penalty.c_p * std::abs(fl[t].p_mis[i]);
      z.q_balance += d_t * cs.penalty.c_q * std::abs(fl[t].q_mis[i]);
    }
    for (int j = 0; j < nbr; ++j) {
      const Branch& br = cs.branches[j];
      double s = std::max(std::hypot(fl[t].p_fr[j], fl[t].q_fr[j]),
                          std::hypot(fl[t].p_to[j], fl[t].q_to[j]));
      double over = std::max(s - br.s_max, 0.0);
      (br.is_transformer() ? z.xfm_overload : z.ac_overload) +=
          d_t * cs.penalty.c_s * over;
    }
    for (size_t d = 0; d < cs.devices.size(); ++d) {
      const Device& dev = cs.devices[d];
      const double u = sol.get(kUOn, t, int(d));
      const double w = u * sol.get(kPOn, t, int(d));
      double en = blocks_cost(w, dev.blocks[t], d_t);
      if (dev.kind == DeviceKind::producer)
        z.en_cost += en;
      else
        z.en_value += en;
      z.on_cost += d_t * dev.cost_on * u;
      const double u_prev =
          t == 0 ? double(dev.u0) : sol.get(kUOn, t - 1, int(d));
      const double delta = u - u_prev;
      if (delta > 0)
        z.su_cost += dev.cost_su * delta;
      else
        z.sd_cost += dev.cost_sd * (-delta);
      for (int r = 0; r < kNumReserveProducts; ++r)
        z.reserve_device +=
            d_t * dev.reserve_cost[r] * sol.get(reserve_family(r), t, int(d));
    }
    for (const Zone& zn : cs.zones) {
      for (int r = 0; r < kNumReserveProducts; ++r) {
        bool q_product = (r == kQru || r == kQrd);
        if (zn.is_q != q_product || zn.requirement[r].empty()) continue;
        double provided = 0.0;
        for (int m : zn.members) provided += sol.get(reserve_family(r), t, m);
        z.reserve_zonal += d_t * zn.penalty[r] *
                           std::max(zn.requirement[r][t] - provided, 0.0);
      }
    }
  }

  // contingencies: dense outaged solves, independent of the solver engine
  const int nk = static_cast<int>(cs.contingencies.size());
  std::vector<double> per_k(nk, 0.0);
  if (nk > 0) {
    const int ref = cs.reference_bus();
    std::vector<int> red(cs.buses.size(), -1);
    int ri = 0;
    for (size_t i = 0; i < cs.buses.size(); ++i)
      if (int(i) != ref) red[i] = ri++;
    std::vector<std::vector<double>> per_tk(T, std::vector<double>(nk, 0.0));
    parallel_for(T, [&](int lo, int hi) {
      for (int t = lo; t < hi; ++t) {
        const double d_t = cs.time.durations[t];
        // reduced injections and phase-shift offsets
        std::vector<double> c(cs.buses.size() - 1, 0.0);
        for (size_t d = 0; d < cs.devices.size(); ++d) {
          const Device& dev = cs.devices[d];
          if (red[dev.bus] < 0) continue;
          double w = sol.get(kUOn, t, int(d)) * sol.get(kPOn, t, int(d));
          c[red[dev.bus]] += dev.kind == DeviceKind::producer ? w : -w;
        }
        for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
          const DcLine& dc = cs.dc_lines[l];
          double p = sol.get(kPDcFr, t, int(l));
          if (red[dc.from] >= 0) c[red[dc.from]] -= p;
          if (red[dc.to] >= 0) c[red[dc.to]] += p;
        }
        for (size_t s = 0; s < cs.shunts.size(); ++s) {
          const Shunt& sh = cs.shunts[s];
          if (red[sh.bus] < 0) continue;
          double v = sol.get(kV, t, sh.bus);
          c[red[sh.bus]] -= sol.get(kUSh, t, int(s)) * sh.g_step * v * v;
        }
        for (int j = 0; j < nbr; ++j) {
          double phi = sol.get(kPhi, t, j);
          if (phi == 0.0) continue;
          double bj = -phi / cs.branches[j].x;
          const Branch& br = cs.branches[j];
          if (red[br.from] >= 0) c[red[br.from]] -= bj;
          if (red[br.to] >= 0) c[red[br.to]] += bj;
        }
        for (int k = 0; k < nk; ++k) {
          const int out_branch = cs.contingencies[k].branch;
          std::vector<double> theta;
          try {
            theta = dense_dc_solve(cs, out_branch, c, red);
          } catch (const SolverError&) {
            continue;  // islanding outage: skipped, matching the engine
          }
          double zk = 0.0;
          for (int j = 0; j < nbr; ++j) {
            if (j == out_branch) continue;
            const Branch& br = cs.branches[j];
            double tf = red[br.from] >= 0 ? theta[red[br.from]] : 0.0;
            double tt = red[br.to] >= 0 ? theta[red[br.to]] : 0.0;
            double p = (tf - tt) / br.x;
            double s = std::max(std::hypot(p, fl[t].q_fr[j]),
                                std::hypot(p, fl[t].q_to[j]));
            zk += d_t * cs.penalty.c_s * std::max(s - br.s_max_ctg, 0.0);
          }
          per_tk[t][k] = zk;
        }
      }
    });
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < nk; ++k) per_k[k] += per_tk[t][k];
    for (int k = 0; k < nk; ++k) z.ctg += per_k[k];
    rep.z_ctg_min = *std::max_element(per_k.begin(), per_k.end());
    rep.z_ctg_avg = z.ctg / nk;
  }

  rep.z_ms = z.market_surplus();
  rep.violations = check_feasibility(cs, sol);
  if (std::isfinite(z_ed)) {
    rep.z_ed = z_ed;
    rep.gap_percent = 100.0 * rep.z_ms / z_ed;
  }
  return rep;
}

std::string SolutionReport::to_json() const {
  nlohmann::json j;
  j["z_ms"] = z_ms;
  j["terms"] = {{"z_en_value", terms.en_value},
                {"z_en_cost", terms.en_cost},
                {"z_on", terms.on_cost},
                {"z_su", terms.su_cost},
                {"z_sd", terms.sd_cost},
                {"z_ac", terms.ac_overload},
                {"z_xfm", terms.xfm_overload},
                {"z_p", terms.p_balance},
                {"z_q", terms.q_balance},
                {"z_reserve_device", terms.reserve_device},
                {"z_zonal", terms.reserve_zonal},
                {"z_ctg", terms.ctg}};
  nlohmann::json table = {{"z_en", terms.en_value - terms.en_cost},
                          {"z_on_p_d", terms.on_cost + terms.su_cost + terms.sd_cost},
                          {"z_ac", terms.ac_overload},
                          {"z_xfm", terms.xfm_overload},
                          {"z_pq", terms.p_balance + terms.q_balance},
                          {"z_zonal", terms.reserve_zonal},
                          {"z_ctg_min", z_ctg_min},
                          {"z_ctg_avg", z_ctg_avg}};
  j["table"] = table;
  double gross = 0.0;
  for (auto& [k, v] : table.items()) {
    if (k == "z_ctg_min" || k == "z_ctg_avg") continue;
    gross += std::abs(v.get<double>());
  }
  gross += terms.ctg;
  nlohmann::json pct_base, pct_gross;
  for (auto& [k, v] : table.items()) {
    double val = v.get<double>();
    pct_base[k] = z_ms != 0.0 ? 100.0 * val / std::abs(z_ms) : 0.0;
    pct_gross[k] = gross != 0.0 ? 100.0 * val / gross : 0.0;
  }
  j["table_percent_of_surplus"] = pct_base;
  j["table_percent_of_gross"] = pct_gross;
  j["violations"] = nlohmann::json::array();
  for (const Violation& v : violations)
    j["violations"].push_back({{"constraint", v.constraint},
                               {"entity", v.entity},
                               {"t", v.t},
                               {"magnitude", v.magnitude}});
  j["feasible"] = violations.empty();
  if (std::isfinite(z_ed)) {
    j["z_ed"] = z_ed;
    j["gap_percent"] = gap_percent;
  }
  return j.dump(2) + "\n";
}

}  // namespace acuc
