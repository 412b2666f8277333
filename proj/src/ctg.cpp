#include "acuc/ctg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "acuc/parallel.hpp"
#include "json.hpp"

namespace acuc {

namespace {

// reduced rhs c_t = p_inj_hat - E_hat^T b_t for one period
void build_ct(const Case& cs, const CtgWorkspace& ws, const FlatState& st,
              int t, std::vector<double>& c) {
  const int nr = ws.Yb.n;
  c.assign(nr, 0.0);
  for (size_t d = 0; d < cs.devices.size(); ++d) {
    const Device& dev = cs.devices[d];
    int ri = ws.red[dev.bus];
    if (ri < 0) continue;
    double w = st.get(kUOn, t, int(d)) * st.get(kPOn, t, int(d));
    c[ri] += dev.kind == DeviceKind::producer ? w : -w;
  }
  for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
    const DcLine& dc = cs.dc_lines[l];
    double p = st.get(kPDcFr, t, int(l));
    if (ws.red[dc.from] >= 0) c[ws.red[dc.from]] -= p;
    if (ws.red[dc.to] >= 0) c[ws.red[dc.to]] += p;
  }
  for (size_t s = 0; s < cs.shunts.size(); ++s) {
    const Shunt& sh = cs.shunts[s];
    int ri = ws.red[sh.bus];
    if (ri < 0) continue;
    double v = st.get(kV, t, sh.bus);
    c[ri] -= st.get(kUSh, t, int(s)) * sh.g_step * v * v;
  }
  // phase-shift offsets: b_j = -phi_j / x_j, c -= E^T b
  for (size_t j = 0; j < cs.branches.size(); ++j) {
    double phi = st.get(kPhi, t, int(j));
    if (phi == 0.0) continue;
    double bj = -phi * ws.inv_x[j];
    const Branch& br = cs.branches[j];
    if (ws.red[br.from] >= 0) c[ws.red[br.from]] -= bj;
    if (ws.red[br.to] >= 0) c[ws.red[br.to]] += bj;
  }
}

std::vector<double> solve_outaged(const CtgWorkspace& ws, int k,
                                  const std::vector<double>& rhs) {
  std::vector<double> base;
  PcgResult pr = pcg_solve(ws.Yb, rhs, &ws.prec, ws.cfg.eps_pcg,
                           std::max(ws.Yb.n * 4, 200), base);
  if (!pr.converged)
    throw SolverError("pcg failed in contingency backprop (residual " +
                      std::to_string(pr.rel_residual) + ")");
  return smw_correct(ws, base, k, rhs);
}

}  // namespace

CtgWorkspace build_ctg_workspace(const Case& cs, const CtgConfig& cfg) {
  CtgWorkspace ws;
  ws.cfg = cfg;
  ws.n_bus = static_cast<int>(cs.buses.size());
  ws.n_branch = static_cast<int>(cs.branches.size());
  ws.ref = cs.reference_bus();
  ws.red.assign(ws.n_bus, -1);
  int r = 0;
  for (int i = 0; i < ws.n_bus; ++i)
    if (i != ws.ref) ws.red[i] = r++;
  ws.inv_x.resize(ws.n_branch);
  ws.br_red.resize(ws.n_branch);
  std::vector<int> ti, tj;
  std::vector<double> tv;
  for (int j = 0; j < ws.n_branch; ++j) {
    const Branch& br = cs.branches[j];
    double w = 1.0 / br.x;
    ws.inv_x[j] = w;
    int f = ws.red[br.from], t = ws.red[br.to];
    ws.br_red[j] = {f, t};
    if (f >= 0) {
      ti.push_back(f);
      tj.push_back(f);
      tv.push_back(w);
    }
    if (t >= 0) {
      ti.push_back(t);
      tj.push_back(t);
      tv.push_back(w);
    }
    if (f >= 0 && t >= 0) {
      ti.push_back(f);
      tj.push_back(t);
      tv.push_back(-w);
      ti.push_back(t);
      tj.push_back(f);
      tv.push_back(-w);
    }
  }
  ws.Yb = SparseCsr::from_triplets(ws.n_bus - 1, std::move(ti), std::move(tj),
                                   std::move(tv));
  ws.prec = build_ildl(ws.Yb);
  if (ws.prec.jacobi)
    std::cerr << "warning: incomplete factorization broke down, using Jacobi "
                 "preconditioner\n";

  // per-contingency correction vectors, one tight pcg solve each
  const double pre_eps = std::min(cfg.eps_pcg, 1e-10);
  ws.ctg.resize(cs.contingencies.size());
  parallel_for(static_cast<int>(cs.contingencies.size()), [&](int lo, int hi) {
    for (int k = lo; k < hi; ++k) {
      CtgWorkspace::CtgVectors& cv = ws.ctg[k];
      cv.branch = cs.contingencies[k].branch;
      const Branch& br = cs.branches[cv.branch];
      std::vector<double> e(ws.Yb.n, 0.0);
      if (ws.red[br.from] >= 0) e[ws.red[br.from]] += 1.0;
      if (ws.red[br.to] >= 0) e[ws.red[br.to]] -= 1.0;
      PcgResult pr = pcg_solve(ws.Yb, e, &ws.prec, pre_eps,
                               std::max(ws.Yb.n * 4, 200), cv.u_k);
      double d = 0.0;
      if (ws.red[br.from] >= 0) d += cv.u_k[ws.red[br.from]];
      if (ws.red[br.to] >= 0) d -= cv.u_k[ws.red[br.to]];
      const double sigma = -ws.inv_x[cv.branch];
      const double denom = 1.0 + sigma * d;
      if (!pr.converged || std::abs(denom) < 1e-10) {
        cv.islanding = true;
        continue;
      }
      cv.w_coef = sigma / denom;
    }
  });
  for (size_t k = 0; k < ws.ctg.size(); ++k)
    if (ws.ctg[k].islanding)
      std::cerr << "warning: contingency " << cs.contingencies[k].id
                << " islands the network, skipped\n";

  const int T = cs.time.periods();
  ws.theta_base.assign(T, {});
  ws.c_t.assign(T, {});
  ws.base_pcg_iters.assign(T, 0);
  const size_t nk = ws.ctg.size();
  ws.severity_ring.assign(size_t(T) * nk,
                          std::vector<double>(cfg.severity_window, -1.0));
  ws.severity_pos.assign(size_t(T) * nk, 0);
  // unevaluated contingencies rank worst so the first sweeps visit everything
  ws.severity_max.assign(size_t(T) * nk, kInf);
  ws.worst_set.assign(T, {});
  ws.stoch_set.assign(T, {});
  return ws;
}

std::vector<double> smw_correct(const CtgWorkspace& ws,
                                const std::vector<double>& theta_base, int k,
                                const std::vector<double>& c_t) {
  const CtgWorkspace::CtgVectors& cv = ws.ctg[k];
  if (cv.islanding) return theta_base;
  double s = 0.0;
  for (size_t i = 0; i < c_t.size(); ++i) s += cv.u_k[i] * c_t[i];
  s *= cv.w_coef;
  std::vector<double> out(theta_base.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = theta_base[i] - cv.u_k[i] * s;
  return out;
}

CtgScore score_contingency(const Case& cs, const CtgWorkspace& ws, int t,
                           int k, const std::vector<double>& theta_k,
                           const double* q_fr, const double* q_to, double eps,
                           bool want_grads) {
  CtgScore out;
  const double d_t = cs.time.durations[t];
  const double c_s = cs.penalty.c_s;
  const int out_branch = k >= 0 ? ws.ctg[k].branch : -1;
  if (want_grads) {
    out.overload_grad.assign(ws.n_branch, 0.0);
    out.dq_fr.assign(ws.n_branch, 0.0);
    out.dq_to.assign(ws.n_branch, 0.0);
  }
  for (int j = 0; j < ws.n_branch; ++j) {
    if (j == out_branch) continue;
    const Branch& br = cs.branches[j];
    double tf = ws.red[br.from] >= 0 ? theta_k[ws.red[br.from]] : 0.0;
    double tt = ws.red[br.to] >= 0 ? theta_k[ws.red[br.to]] : 0.0;
    double phi_off = 0.0;  // b_t folded into the solve rhs; flow is Yx*E*theta
    double p = ws.inv_x[j] * (tf - tt) + phi_off;
    double s_fr = std::sqrt(p * p + q_fr[j] * q_fr[j]);
    double s_to = std::sqrt(p * p + q_to[j] * q_to[j]);
    bool fr_side = s_fr >= s_to;
    double m = (fr_side ? s_fr : s_to) - br.s_max_ctg;
    out.z += d_t * c_s * soft_relu(m, eps);
    if (!want_grads) continue;
    double dz = d_t * c_s * soft_relu_grad(m, eps);
    if (dz == 0.0) continue;
    double s = std::max(fr_side ? s_fr : s_to, 1e-9);
    out.overload_grad[j] = dz * p / s;
    if (fr_side)
      out.dq_fr[j] = dz * q_fr[j] / s;
    else
      out.dq_to[j] = dz * q_to[j] / s;
  }
  return out;
}

CtgBackprop backprop_contingency(const CtgWorkspace& ws, int t, int k,
                                 const std::vector<double>& overload_grad) {
  (void)t;
  const int out_branch = k >= 0 ? ws.ctg[k].branch : -1;
  // rhs = E^T Yx_k d_k in the reduced space
  std::vector<double> rhs(ws.Yb.n, 0.0);
  for (int j = 0; j < ws.n_branch; ++j) {
    if (j == out_branch) continue;
    const double y = ws.inv_x[j] * overload_grad[j];
    if (y == 0.0) continue;
    if (ws.br_red[j].first >= 0) rhs[ws.br_red[j].first] += y;
    if (ws.br_red[j].second >= 0) rhs[ws.br_red[j].second] -= y;
  }
  // eta solves the transposed (symmetric) outaged system
  std::vector<double> eta = solve_outaged(ws, k, rhs);

  CtgBackprop out;
  // b-vector gradient from the uncorrected solve: -E eta
  out.b_grad.assign(ws.n_branch, 0.0);
  for (int j = 0; j < ws.n_branch; ++j) {
    double ef = ws.br_red[j].first >= 0 ? eta[ws.br_red[j].first] : 0.0;
    double et = ws.br_red[j].second >= 0 ? eta[ws.br_red[j].second] : 0.0;
    out.b_grad[j] = -(ef - et);
  }
  // injection gradient with the uniform slack correction: extend to the full
  // bus space (reference entry 0), then remove the mean
  out.inj_grad.assign(ws.n_bus, 0.0);
  double mean = 0.0;
  for (int i = 0; i < ws.n_bus; ++i) {
    double v = ws.red[i] >= 0 ? eta[ws.red[i]] : 0.0;
    out.inj_grad[i] = v;
    mean += v;
  }
  mean /= ws.n_bus;
  for (int i = 0; i < ws.n_bus; ++i) out.inj_grad[i] -= mean;
  return out;
}

namespace {

// chain an evaluated contingency's gradients into the basis entries of
// period t (loss convention; scores enter the loss positively)
void accumulate_ctg_grads(const Case& cs, const CtgWorkspace& ws,
                          const FlatState& st, int t, const CtgScore& sc,
                          const CtgBackprop& bp, double* grad) {
  const StateLayout& ly = st.layout;
  for (size_t d = 0; d < cs.devices.size(); ++d) {
    const Device& dev = cs.devices[d];
    const double g = bp.inj_grad[dev.bus] *
                     (dev.kind == DeviceKind::producer ? 1.0 : -1.0);
    if (g == 0.0) continue;
    grad[ly.at(kPOn, t, int(d))] += g * st.get(kUOn, t, int(d));
    grad[ly.at(kUOn, t, int(d))] += g * st.get(kPOn, t, int(d));
  }
  for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
    const DcLine& dc = cs.dc_lines[l];
    grad[ly.at(kPDcFr, t, int(l))] +=
        -bp.inj_grad[dc.from] + bp.inj_grad[dc.to];
  }
  for (size_t s = 0; s < cs.shunts.size(); ++s) {
    const Shunt& sh = cs.shunts[s];
    const double v = st.get(kV, t, sh.bus);
    const double gi = bp.inj_grad[sh.bus];
    grad[ly.at(kUSh, t, int(s))] += -gi * sh.g_step * v * v;
    grad[ly.at(kV, t, sh.bus)] +=
        -gi * 2.0 * st.get(kUSh, t, int(s)) * sh.g_step * v;
  }
  // phase shifts through b_j = -phi_j / x_j
  for (int j = 0; j < ws.n_branch; ++j) {
    if (bp.b_grad[j] == 0.0) continue;
    grad[ly.at(kPhi, t, j)] += bp.b_grad[j] * (-ws.inv_x[j]);
  }
  // reactive-flow chain into voltage-side variables
  for (int j = 0; j < ws.n_branch; ++j) {
    const double gqf = sc.dq_fr[j];
    const double gqt = sc.dq_to[j];
    if (gqf == 0.0 && gqt == 0.0) continue;
    const Branch& br = cs.branches[j];
    BranchEval e = eval_branch(br, st.get(kV, t, br.from), st.get(kV, t, br.to),
                               st.get(kTheta, t, br.from),
                               st.get(kTheta, t, br.to), st.get(kPhi, t, j),
                               st.get(kTau, t, j));
    const double gd = gqf * e.dqfr_dd + gqt * e.dqto_dd;
    grad[ly.at(kV, t, br.from)] += gqf * e.dqfr_dvf + gqt * e.dqto_dvf;
    grad[ly.at(kV, t, br.to)] += gqf * e.dqfr_dvt + gqt * e.dqto_dvt;
    grad[ly.at(kTheta, t, br.from)] += gd;
    grad[ly.at(kTheta, t, br.to)] -= gd;
    grad[ly.at(kPhi, t, j)] -= gd;
    grad[ly.at(kTau, t, j)] += gqf * e.dqfr_dtau + gqt * e.dqto_dtau;
  }
}

}  // namespace

double ctg_iteration(const Case& cs, const FlatState& st, const FlowSet& fl,
                     CtgWorkspace& ws, const PenaltyShape& shape,
                     std::int64_t iter_index, double* grad, bool full_eval) {
  const int T = st.layout.T;
  const int nk = static_cast<int>(ws.ctg.size());
  if (nk == 0) return 0.0;
  const int window = ws.cfg.severity_window;

  // select the evaluation set per period before solving anything, so the
  // stochastic draws depend only on (seed, iteration, t)
  std::vector<std::vector<int>> eval_set(T);
  for (int t = 0; t < T; ++t) {
    if (full_eval) {
      for (int k = 0; k < nk; ++k)
        if (!ws.ctg[k].islanding) eval_set[t].push_back(k);
      continue;
    }
    const int n_top = std::max(1, int(std::ceil(ws.cfg.top_frac * nk)));
    std::vector<int> order(nk);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return ws.severity(t, a) > ws.severity(t, b);
    });
    std::vector<char> in_set(nk, 0);
    std::vector<int>& set = eval_set[t];
    for (int i = 0; i < nk && int(set.size()) < n_top; ++i) {
      if (ws.ctg[order[i]].islanding) continue;
      set.push_back(order[i]);
      in_set[order[i]] = 1;
    }
    // stochastic draws without replacement from the remainder
    const int n_st = std::max(1, int(std::ceil(ws.cfg.stoch_frac * nk)));
    Rng rng(ws.cfg.seed ^ (0x5851f42d4c957f2dULL * std::uint64_t(iter_index + 1) +
                           0x14057b7ef767814fULL * std::uint64_t(t + 1)));
    std::vector<int> rest;
    for (int k = 0; k < nk; ++k)
      if (!in_set[k] && !ws.ctg[k].islanding) rest.push_back(k);
    ws.stoch_set[t].clear();
    for (int i = 0; i < n_st && !rest.empty(); ++i) {
      int pick = int(rng.uniform_int(0, int(rest.size()) - 1));
      ws.stoch_set[t].push_back(rest[pick]);
      set.push_back(rest[pick]);
      rest.erase(rest.begin() + pick);
    }
    std::sort(set.begin(), set.end());
  }

  const int nbr = ws.n_branch;
  std::vector<double> z_per_t(T, 0.0);
  parallel_for(T, [&](int lo, int hi) {
    for (int t = lo; t < hi; ++t) {
      build_ct(cs, ws, st, t, ws.c_t[t]);
      PcgResult pr = pcg_solve(ws.Yb, ws.c_t[t], &ws.prec, ws.cfg.eps_pcg,
                               std::max(ws.Yb.n * 4, 200), ws.theta_base[t]);
      if (!pr.converged)
        throw SolverError("pcg failed on base case at t=" + std::to_string(t));
      ws.base_pcg_iters[t] = pr.iterations;
      const double* qf = fl.q_fr.data() + size_t(t) * nbr;
      const double* qt = fl.q_to.data() + size_t(t) * nbr;
      for (int k : eval_set[t]) {
        std::vector<double> theta_k =
            smw_correct(ws, ws.theta_base[t], k, ws.c_t[t]);
        const bool want = grad != nullptr;
        CtgScore sc = score_contingency(cs, ws, t, k, theta_k, qf, qt,
                                        shape.eps, want);
        z_per_t[t] += sc.z;
        // severity bookkeeping (sliding max over recent evaluations)
        const size_t slot = size_t(t) * nk + k;
        auto& ring = ws.severity_ring[slot];
        ring[ws.severity_pos[slot]] = sc.z;
        ws.severity_pos[slot] = (ws.severity_pos[slot] + 1) % window;
        double mx = ring[0];
        for (double vv : ring) mx = std::max(mx, vv);
        ws.severity_max[slot] = mx;
        if (grad && sc.z > ws.cfg.zeta) {
          CtgBackprop bp = backprop_contingency(ws, t, k, sc.overload_grad);
          accumulate_ctg_grads(cs, ws, st, t, sc, bp, grad);
        }
      }
      // refresh the worst set from the updated severity records
      const int n_top = std::max(1, int(std::ceil(ws.cfg.top_frac * nk)));
      std::vector<int> order(nk);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return ws.severity(t, a) > ws.severity(t, b);
      });
      ws.worst_set[t].clear();
      for (int i = 0; i < nk && int(ws.worst_set[t].size()) < n_top; ++i) {
        if (ws.ctg[order[i]].islanding) continue;
        ws.worst_set[t].push_back(order[i]);
      }
    }
  });
  double z = 0.0;
  for (double v : z_per_t) z += v;
  return z;
}

std::string ctg_diagnostics_json(const Case& cs, const CtgWorkspace& ws) {
  nlohmann::json j = nlohmann::json::array();
  for (int t = 0; t < int(ws.worst_set.size()); ++t) {
    nlohmann::json worst = nlohmann::json::array();
    for (int k : ws.worst_set[t]) {
      double sev = ws.severity(t, k);
      worst.push_back({{"id", cs.contingencies[k].id},
                       {"severity", std::isfinite(sev) ? sev : -1.0}});
    }
    j.push_back({{"t", t},
                 {"worst", worst},
                 {"base_pcg_iterations", ws.base_pcg_iters[t]}});
  }
  return j.dump(2) + "\n";
}

}  // namespace acuc
