#include "acuc/projections.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acuc/parallel.hpp"
#include "acuc/surplus.hpp"

namespace acuc {

namespace {

// ---------------------------------------------------------------- ED ----

struct EdIndex {
  int T = 0, nd = 0;
  std::vector<int> u, su, sd, p, q;           // (d,t) -> var
  std::vector<std::vector<int>> blk;          // (d,t) -> block vars
  std::vector<int> res;                       // (d,t,r)
  int iu(int d, int t) const { return u[d * T + t]; }
  int isu(int d, int t) const { return su[d * T + t]; }
  int isd(int d, int t) const { return sd[d * T + t]; }
  int ip(int d, int t) const { return p[d * T + t]; }
  int iq(int d, int t) const { return q[d * T + t]; }
  int ir(int d, int t, int r) const {
    return res[(d * T + t) * kNumReserveProducts + r];
  }
};

// Builds the dispatch LP over periods [t_lo, t_hi); cross-period rows are
// included only when the span covers more than one period starting at 0.
void build_ed_lp(const Case& cs, int t_lo, int t_hi, bool cross_period,
                 LpProblem& lp, EdIndex& ix) {
  const int nd = static_cast<int>(cs.devices.size());
  const int span = t_hi - t_lo;
  ix.T = span;
  ix.nd = nd;
  ix.u.assign(nd * span, -1);
  ix.su.assign(nd * span, -1);
  ix.sd.assign(nd * span, -1);
  ix.p.assign(nd * span, -1);
  ix.q.assign(nd * span, -1);
  ix.blk.assign(nd * span, {});
  ix.res.assign(nd * span * kNumReserveProducts, -1);

  for (int d = 0; d < nd; ++d) {
    const Device& dev = cs.devices[d];
    const bool producer = dev.kind == DeviceKind::producer;
    for (int s = 0; s < span; ++s) {
      const int t = t_lo + s;
      const double d_t = cs.time.durations[t];
      ix.u[d * span + s] = lp.add_var(0.0, 1.0, d_t * dev.cost_on);
      ix.su[d * span + s] = lp.add_var(0.0, 1.0, dev.cost_su);
      ix.sd[d * span + s] = lp.add_var(0.0, 1.0, dev.cost_sd);
      ix.p[d * span + s] = lp.add_var(0.0, dev.p_max, 0.0);
      ix.q[d * span + s] =
          lp.add_var(std::min(dev.q_min, 0.0), std::max(dev.q_max, 0.0), 0.0);
      for (const CostBlock& b : dev.blocks[t]) {
        double cost = d_t * (producer ? b.marginal : -b.marginal);
        ix.blk[d * span + s].push_back(lp.add_var(0.0, b.size, cost));
      }
      for (int r = 0; r < kNumReserveProducts; ++r) {
        double cap = (r == kQru || r == kQrd)
                         ? std::max(std::abs(dev.q_min), std::abs(dev.q_max))
                         : dev.p_max;
        ix.res[(d * span + s) * kNumReserveProducts + r] =
            lp.add_var(0.0, cap, d_t * dev.reserve_cost[r]);
      }
    }
  }

  for (int d = 0; d < nd; ++d) {
    const Device& dev = cs.devices[d];
    for (int s = 0; s < span; ++s) {
      // p splits into blocks
      std::vector<std::pair<int, double>> row{{ix.ip(d, s), 1.0}};
      for (int bv : ix.blk[d * span + s]) row.push_back({bv, -1.0});
      lp.add_eq(std::move(row), 0.0);
      // headroom and offline caps
      lp.add_le({{ix.ip(d, s), 1.0},
                 {ix.ir(d, s, kRgu), 1.0},
                 {ix.ir(d, s, kScr), 1.0},
                 {ix.ir(d, s, kRruOn), 1.0},
                 {ix.iu(d, s), -dev.p_max}},
                0.0);
      lp.add_le({{ix.ip(d, s), -1.0},
                 {ix.ir(d, s, kRgd), 1.0},
                 {ix.ir(d, s, kRrdOn), 1.0},
                 {ix.iu(d, s), dev.p_min}},
                0.0);
      lp.add_le({{ix.ir(d, s, kNsc), 1.0}, {ix.iu(d, s), dev.p_max}}, dev.p_max);
      lp.add_le({{ix.ir(d, s, kRruOff), 1.0}, {ix.iu(d, s), dev.p_max}},
                dev.p_max);
      lp.add_le({{ix.ir(d, s, kRrdOff), 1.0}, {ix.iu(d, s), dev.p_max}},
                dev.p_max);
      lp.add_le({{ix.iq(d, s), 1.0},
                 {ix.ir(d, s, kQru), 1.0},
                 {ix.iu(d, s), -dev.q_max}},
                0.0);
      lp.add_le({{ix.iq(d, s), -1.0},
                 {ix.ir(d, s, kQrd), 1.0},
                 {ix.iu(d, s), dev.q_min}},
                0.0);
      if (!cross_period) continue;
      // startup/shutdown linkage and ramping against the previous period
      if (s == 0) {
        lp.add_eq({{ix.iu(d, 0), 1.0}, {ix.isu(d, 0), -1.0}, {ix.isd(d, 0), 1.0}},
                  double(dev.u0));
        lp.add_le({{ix.ip(d, 0), 1.0}}, dev.u0 * dev.p0 + dev.ramp_up);
        lp.add_le({{ix.ip(d, 0), -1.0}}, -(dev.u0 * dev.p0) + dev.ramp_down);
      } else {
        lp.add_eq({{ix.iu(d, s), 1.0},
                   {ix.iu(d, s - 1), -1.0},
                   {ix.isu(d, s), -1.0},
                   {ix.isd(d, s), 1.0}},
                  0.0);
        lp.add_le({{ix.ip(d, s), 1.0}, {ix.ip(d, s - 1), -1.0}}, dev.ramp_up);
        lp.add_le({{ix.ip(d, s), -1.0}, {ix.ip(d, s - 1), 1.0}}, dev.ramp_down);
      }
      lp.add_le({{ix.isu(d, s), 1.0}, {ix.isd(d, s), 1.0}}, 1.0);
      // minimum up/down windows (truncated at the horizon start)
      {
        std::vector<std::pair<int, double>> up{{ix.iu(d, s), -1.0}};
        for (int w = std::max(0, s - dev.min_up + 1); w <= s; ++w)
          up.push_back({ix.isu(d, w), 1.0});
        lp.add_le(std::move(up), 0.0);
        std::vector<std::pair<int, double>> dn{{ix.iu(d, s), 1.0}};
        for (int w = std::max(0, s - dev.min_down + 1); w <= s; ++w)
          dn.push_back({ix.isd(d, w), 1.0});
        lp.add_le(std::move(dn), 1.0);
      }
    }
  }

  // system balance with penalized aggregate slack, dc reactive demand free
  std::vector<std::vector<int>> dcq(span);
  for (int s = 0; s < span; ++s)
    for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
      const DcLine& dc = cs.dc_lines[l];
      dcq[s].push_back(lp.add_var(dc.q_fr_min, dc.q_fr_max, 0.0));
      dcq[s].push_back(lp.add_var(dc.q_to_min, dc.q_to_max, 0.0));
    }
  for (int s = 0; s < span; ++s) {
    const int t = t_lo + s;
    const double d_t = cs.time.durations[t];
    int spp = lp.add_var(0.0, kInf, d_t * cs.penalty.c_p);
    int spm = lp.add_var(0.0, kInf, d_t * cs.penalty.c_p);
    int sqp = lp.add_var(0.0, kInf, d_t * cs.penalty.c_q);
    int sqm = lp.add_var(0.0, kInf, d_t * cs.penalty.c_q);
    std::vector<std::pair<int, double>> prow, qrow;
    for (int d = 0; d < nd; ++d) {
      double sgn = cs.devices[d].kind == DeviceKind::producer ? 1.0 : -1.0;
      prow.push_back({ix.ip(d, s), sgn});
      qrow.push_back({ix.iq(d, s), sgn});
    }
    for (int v : dcq[s]) qrow.push_back({v, -1.0});
    prow.push_back({spp, -1.0});
    prow.push_back({spm, 1.0});
    qrow.push_back({sqp, -1.0});
    qrow.push_back({sqm, 1.0});
    lp.add_eq(std::move(prow), 0.0);
    lp.add_eq(std::move(qrow), 0.0);
  }

  // zonal requirements with shortfall slack
  for (const Zone& z : cs.zones) {
    for (int r = 0; r < kNumReserveProducts; ++r) {
      bool q_product = (r == kQru || r == kQrd);
      if (z.is_q != q_product || z.requirement[r].empty()) continue;
      for (int s = 0; s < span; ++s) {
        const int t = t_lo + s;
        double req = z.requirement[r][t];
        const double d_t = cs.time.durations[t];
        int short_var = lp.add_var(0.0, kInf, d_t * z.penalty[r]);
        std::vector<std::pair<int, double>> row{{short_var, -1.0}};
        for (int m : z.members) row.push_back({ix.ir(m, s, r), -1.0});
        lp.add_le(std::move(row), -req);
      }
    }
  }
}

void seed_from_ed(const Case& cs, const EdIndex& ix, const SolveResult& r,
                  FlatState& st, int t_lo) {
  const StateLayout& ly = st.layout;
  for (int d = 0; d < ix.nd; ++d) {
    const Device& dev = cs.devices[d];
    for (int s = 0; s < ix.T; ++s) {
      const int t = t_lo + s;
      double u = clip(r.x[ix.iu(d, s)], 0.0, 1.0);
      double p = r.x[ix.ip(d, s)];
      double q = r.x[ix.iq(d, s)];
      st.set(kUOn, t, d, u);
      if (u > 1e-6) {
        st.set(kPOn, t, d, clip(p / u, dev.p_min, dev.p_max));
        st.set(kQ, t, d, clip(q / u, dev.q_min, dev.q_max));
      } else {
        st.set(kPOn, t, d, clip(dev.p0, dev.p_min, dev.p_max));
        st.set(kQ, t, d, clip(0.0, dev.q_min, dev.q_max));
      }
      for (int rr = 0; rr < kNumReserveProducts; ++rr) {
        int i = ly.at(reserve_family(rr), t, d);
        st.x[i] = clip(r.x[ix.ir(d, s, rr)], st.lo[i], st.hi[i]);
      }
    }
  }
}

}  // namespace

EdResult economic_dispatch(const Case& cs, FlatState& st,
                           const ProjectionConfig& cfg) {
  EdResult out;
  const int T = cs.time.periods();
  if (!cfg.ed_split_time || T == 1) {
    LpProblem lp;
    EdIndex ix;
    build_ed_lp(cs, 0, T, /*cross_period=*/true, lp, ix);
    SolveResult r = solve_lp(lp);
    if (!r.optimal())
      throw SolverError(std::string("economic dispatch LP ") +
                        to_string(r.status) + " (" + r.message +
                        ", primal residual " +
                        std::to_string(r.primal_residual) + " after " +
                        std::to_string(r.iterations) + " iterations)");
    out.status = r.status;
    out.z_ed = -r.objective;
    seed_from_ed(cs, ix, r, st, 0);
    st.clip_all();
    return out;
  }
  // per-period variant (heuristic split; drops cross-period rows, so the
  // bound only loosens) followed by a consensus average of the binaries
  std::vector<double> z_t(T, 0.0);
  std::vector<SolveStatus> stat(T, SolveStatus::kNumerical);
  parallel_for(T, [&](int lo, int hi) {
    for (int t = lo; t < hi; ++t) {
      LpProblem lp;
      EdIndex ix;
      build_ed_lp(cs, t, t + 1, /*cross_period=*/false, lp, ix);
      SolveResult r = solve_lp(lp);
      stat[t] = r.status;
      if (!r.optimal()) continue;
      z_t[t] = -r.objective;
      seed_from_ed(cs, ix, r, st, t);
    }
  });
  for (int t = 0; t < T; ++t)
    if (stat[t] != SolveStatus::kOptimal)
      throw SolverError("economic dispatch sub-LP failed at t=" +
                        std::to_string(t));
  // consensus: smooth binaries toward their per-device mean
  for (size_t d = 0; d < cs.devices.size(); ++d) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += st.get(kUOn, t, int(d));
    mean /= T;
    for (int t = 0; t < T; ++t)
      st.set(kUOn, t, int(d), 0.5 * (st.get(kUOn, t, int(d)) + mean));
  }
  st.clip_all();
  out.status = SolveStatus::kOptimal;
  out.z_ed = std::accumulate(z_t.begin(), z_t.end(), 0.0);
  return out;
}

// ------------------------------------------------------------ Jacobians --

AcJacobians build_ac_jacobians(const Case& cs, const FlatState& st, int t) {
  const int nb = static_cast<int>(cs.buses.size());
  const int nbr = static_cast<int>(cs.branches.size());
  AcJacobians J;
  J.n_bus = nb;
  J.n_branch = nbr;
  J.p0.assign(nb, 0.0);
  J.q0.assign(nb, 0.0);
  J.s0_fr.assign(nbr, 0.0);
  J.s0_to.assign(nbr, 0.0);
  J.Jpv = DenseMat(nb, nb);
  J.Jpt = DenseMat(nb, nb);
  J.Jqv = DenseMat(nb, nb);
  J.Jqt = DenseMat(nb, nb);
  J.Jsv_fr = DenseMat(nbr, nb);
  J.Jst_fr = DenseMat(nbr, nb);
  J.Jsv_to = DenseMat(nbr, nb);
  J.Jst_to = DenseMat(nbr, nb);

  for (int j = 0; j < nbr; ++j) {
    const Branch& br = cs.branches[j];
    const int f = br.from, to = br.to;
    BranchEval e = eval_branch(br, st.get(kV, t, f), st.get(kV, t, to),
                               st.get(kTheta, t, f), st.get(kTheta, t, to),
                               st.get(kPhi, t, j), st.get(kTau, t, j));
    J.p0[f] += e.p_fr;
    J.q0[f] += e.q_fr;
    J.p0[to] += e.p_to;
    J.q0[to] += e.q_to;
    J.Jpv(f, f) += e.dpfr_dvf;
    J.Jpv(f, to) += e.dpfr_dvt;
    J.Jpt(f, f) += e.dpfr_dd;
    J.Jpt(f, to) -= e.dpfr_dd;
    J.Jqv(f, f) += e.dqfr_dvf;
    J.Jqv(f, to) += e.dqfr_dvt;
    J.Jqt(f, f) += e.dqfr_dd;
    J.Jqt(f, to) -= e.dqfr_dd;
    J.Jpv(to, f) += e.dpto_dvf;
    J.Jpv(to, to) += e.dpto_dvt;
    J.Jpt(to, f) += e.dpto_dd;
    J.Jpt(to, to) -= e.dpto_dd;
    J.Jqv(to, f) += e.dqto_dvf;
    J.Jqv(to, to) += e.dqto_dvt;
    J.Jqt(to, f) += e.dqto_dd;
    J.Jqt(to, to) -= e.dqto_dd;

    const double s_fr = std::max(std::hypot(e.p_fr, e.q_fr), 1e-6);
    const double s_to = std::max(std::hypot(e.p_to, e.q_to), 1e-6);
    J.s0_fr[j] = s_fr;
    J.s0_to[j] = s_to;
    auto srow = [&](DenseMat& sv, DenseMat& stt, double p, double q, double s,
                    double dp_dvf, double dp_dvt, double dp_dd, double dq_dvf,
                    double dq_dvt, double dq_dd) {
      sv(j, f) += (p * dp_dvf + q * dq_dvf) / s;
      sv(j, to) += (p * dp_dvt + q * dq_dvt) / s;
      double dd = (p * dp_dd + q * dq_dd) / s;
      stt(j, f) += dd;
      stt(j, to) -= dd;
    };
    srow(J.Jsv_fr, J.Jst_fr, e.p_fr, e.q_fr, s_fr, e.dpfr_dvf, e.dpfr_dvt,
         e.dpfr_dd, e.dqfr_dvf, e.dqfr_dvt, e.dqfr_dd);
    srow(J.Jsv_to, J.Jst_to, e.p_to, e.q_to, s_to, e.dpto_dvf, e.dpto_dvt,
         e.dpto_dd, e.dqto_dvf, e.dqto_dvt, e.dqto_dd);
  }
  for (size_t s = 0; s < cs.shunts.size(); ++s) {
    const Shunt& sh = cs.shunts[s];
    double u = st.get(kUSh, t, int(s));
    double v = st.get(kV, t, sh.bus);
    J.p0[sh.bus] += u * sh.g_step * v * v;
    J.q0[sh.bus] -= u * sh.b_step * v * v;
    J.Jpv(sh.bus, sh.bus) += 2.0 * u * sh.g_step * v;
    J.Jqv(sh.bus, sh.bus) -= 2.0 * u * sh.b_step * v;
  }
  return J;
}

// ------------------------------------------------- linearized power flow --

namespace {

struct PfVars {
  int dv0 = 0;                  // n_bus voltage deltas
  std::vector<int> dth;         // per bus, -1 at reference
  std::vector<int> w, q;        // per device, -1 if folded constant
  std::vector<int> dcp, dcqf, dcqt;
};

// Shared assembly of the balance-projection QPs. When flow_rows is false the
// ramp-constrained variant is being built: no flow/angle rows, and device
// boxes come in pre-intersected through w_lo/w_hi. Fixed devices fold into
// the row constants; their q stays free unless q_fixed says otherwise.
bool solve_pf_qp(const Case& cs, FlatState& st, int t,
                 const ProjectionConfig& cfg, bool flow_rows, double alpha,
                 const std::vector<double>& w_lo, const std::vector<double>& w_hi,
                 const std::vector<char>& w_fixed,
                 const std::vector<char>& q_fixed) {
  const int nb = static_cast<int>(cs.buses.size());
  const int nd = static_cast<int>(cs.devices.size());
  const int ref = cs.reference_bus();
  AcJacobians J = build_ac_jacobians(cs, st, t);

  QpProblem qp;
  PfVars vx;
  vx.dv0 = qp.n;
  for (int i = 0; i < nb; ++i) {
    const Bus& b = cs.buses[i];
    double v0 = st.get(kV, t, i);
    qp.add_var(b.v_min - v0, b.v_max - v0, 0.0, 2.0 * cfg.gamma[2]);
  }
  vx.dth.assign(nb, -1);
  for (int i = 0; i < nb; ++i) {
    if (i == ref) continue;
    vx.dth[i] = qp.add_var(-0.7, 0.7, 0.0, 2.0 * cfg.gamma[3]);
  }
  double cost_norm = 1.0;
  {
    double acc = 0.0;
    for (int d = 0; d < nd; ++d) {
      const Device& dev = cs.devices[d];
      if (dev.kind != DeviceKind::producer || dev.blocks[t].empty()) continue;
      acc += dev.blocks[t][0].marginal *
             st.get(kUOn, t, d) * st.get(kPOn, t, d);
    }
    cost_norm = std::max(1.0, std::abs(acc));
  }
  vx.w.assign(nd, -1);
  vx.q.assign(nd, -1);
  for (int d = 0; d < nd; ++d) {
    const Device& dev = cs.devices[d];
    const double u = st.get(kUOn, t, d);
    const double w0 = u * st.get(kPOn, t, d);
    const double q0 = u * st.get(kQ, t, d);
    if (!w_fixed[d]) {
      // the cost regularizer belongs to the balance projection only; the
      // ramp-constrained solve stays a pure minimum-deviation flow
      double cost_lin = 0.0;
      if (flow_rows && dev.kind == DeviceKind::producer && !dev.blocks[t].empty())
        cost_lin = cfg.gamma[4] * dev.blocks[t][0].marginal / cost_norm;
      vx.w[d] = qp.add_var(w_lo[d], w_hi[d],
                           -2.0 * cfg.gamma[0] * w0 + cost_lin,
                           2.0 * cfg.gamma[0]);
    }
    if (!q_fixed[d]) {
      vx.q[d] = qp.add_var(std::min(u * dev.q_min, u * dev.q_max),
                           std::max(u * dev.q_min, u * dev.q_max),
                           -2.0 * cfg.gamma[1] * q0, 2.0 * cfg.gamma[1]);
    }
  }
  for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
    const DcLine& dc = cs.dc_lines[l];
    double reg = 2e-4;
    vx.dcp.push_back(qp.add_var(-dc.p_max, dc.p_max,
                                -reg * st.get(kPDcFr, t, int(l)), reg));
    vx.dcqf.push_back(qp.add_var(dc.q_fr_min, dc.q_fr_max,
                                 -reg * st.get(kQDcFr, t, int(l)), reg));
    vx.dcqt.push_back(qp.add_var(dc.q_to_min, dc.q_to_max,
                                 -reg * st.get(kQDcTo, t, int(l)), reg));
  }

  // balance rows: device net injection - J * delta = absorption at the point
  for (int i = 0; i < nb; ++i) {
    std::vector<std::pair<int, double>> prow, qrow;
    double p_rhs = J.p0[i], q_rhs = J.q0[i];
    for (int d = 0; d < nd; ++d) {
      if (cs.devices[d].bus != i) continue;
      double sgn = cs.devices[d].kind == DeviceKind::producer ? 1.0 : -1.0;
      const double u = st.get(kUOn, t, d);
      if (vx.w[d] >= 0)
        prow.push_back({vx.w[d], sgn});
      else
        p_rhs -= sgn * u * st.get(kPOn, t, d);
      if (vx.q[d] >= 0)
        qrow.push_back({vx.q[d], sgn});
      else
        q_rhs -= sgn * u * st.get(kQ, t, d);
    }
    for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
      const DcLine& dc = cs.dc_lines[l];
      if (dc.from == i) {
        prow.push_back({vx.dcp[l], -1.0});
        qrow.push_back({vx.dcqf[l], -1.0});
      }
      if (dc.to == i) {
        prow.push_back({vx.dcp[l], 1.0});
        qrow.push_back({vx.dcqt[l], -1.0});
      }
    }
    for (int c = 0; c < nb; ++c) {
      if (J.Jpv(i, c) != 0.0) prow.push_back({vx.dv0 + c, -J.Jpv(i, c)});
      if (J.Jqv(i, c) != 0.0) qrow.push_back({vx.dv0 + c, -J.Jqv(i, c)});
      if (vx.dth[c] >= 0) {
        if (J.Jpt(i, c) != 0.0) prow.push_back({vx.dth[c], -J.Jpt(i, c)});
        if (J.Jqt(i, c) != 0.0) qrow.push_back({vx.dth[c], -J.Jqt(i, c)});
      }
    }
    qp.add_eq(std::move(prow), p_rhs);
    qp.add_eq(std::move(qrow), q_rhs);
  }

  if (flow_rows) {
    const int nbr = static_cast<int>(cs.branches.size());
    for (int j = 0; j < nbr; ++j) {
      const Branch& br = cs.branches[j];
      auto add_side = [&](const DenseMat& sv, const DenseMat& stt, double s0) {
        std::vector<std::pair<int, double>> row;
        for (int c = 0; c < nb; ++c) {
          if (sv(j, c) != 0.0) row.push_back({vx.dv0 + c, sv(j, c)});
          if (vx.dth[c] >= 0 && stt(j, c) != 0.0)
            row.push_back({vx.dth[c], stt(j, c)});
        }
        qp.add_le(std::move(row), alpha * br.s_max - s0);
      };
      add_side(J.Jsv_fr, J.Jst_fr, J.s0_fr[j]);
      add_side(J.Jsv_to, J.Jst_to, J.s0_to[j]);
      // angle-difference limits around the current shift
      double base = st.get(kTheta, t, br.from) - st.get(kTheta, t, br.to) -
                    st.get(kPhi, t, j);
      std::vector<std::pair<int, double>> arow;
      if (vx.dth[br.from] >= 0) arow.push_back({vx.dth[br.from], 1.0});
      if (vx.dth[br.to] >= 0) arow.push_back({vx.dth[br.to], -1.0});
      if (!arow.empty()) {
        auto arow2 = arow;
        qp.add_le(std::move(arow), cfg.angle_limit - base);
        for (auto& [vv, coef] : arow2) coef = -coef;
        qp.add_le(std::move(arow2), cfg.angle_limit + base);
      }
    }
  }

  SolveResult r = solve_qp(qp);
  if (!r.optimal()) return false;

  const StateLayout& ly = st.layout;
  for (int i = 0; i < nb; ++i) {
    int xi = ly.at(kV, t, i);
    st.x[xi] = clip(st.x[xi] + r.x[vx.dv0 + i], st.lo[xi], st.hi[xi]);
    if (vx.dth[i] >= 0) {
      int ti = ly.at(kTheta, t, i);
      st.x[ti] = clip(st.x[ti] + r.x[vx.dth[i]], st.lo[ti], st.hi[ti]);
    }
  }
  for (int d = 0; d < nd; ++d) {
    const Device& dev = cs.devices[d];
    const double u = st.get(kUOn, t, d);
    if (u <= 1e-6) continue;
    if (vx.w[d] >= 0)
      st.set(kPOn, t, d, clip(r.x[vx.w[d]] / u, dev.p_min, dev.p_max));
    if (vx.q[d] >= 0)
      st.set(kQ, t, d, clip(r.x[vx.q[d]] / u, dev.q_min, dev.q_max));
  }
  for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
    st.set(kPDcFr, t, int(l), r.x[vx.dcp[l]]);
    st.set(kQDcFr, t, int(l), r.x[vx.dcqf[l]]);
    st.set(kQDcTo, t, int(l), r.x[vx.dcqt[l]]);
  }
  return true;
}

}  // namespace

bool linearized_power_flow(const Case& cs, FlatState& st, int t,
                           const ProjectionConfig& cfg) {
  const int nd = static_cast<int>(cs.devices.size());
  std::vector<double> w_lo(nd), w_hi(nd);
  std::vector<char> w_fixed(nd, 0), q_fixed(nd, 0);
  for (int d = 0; d < nd; ++d) {
    const Device& dev = cs.devices[d];
    const double u = st.get(kUOn, t, d);
    if (u <= 1e-6) {
      w_fixed[d] = q_fixed[d] = 1;  // off devices contribute nothing
      continue;
    }
    w_lo[d] = u * dev.p_min;
    w_hi[d] = u * dev.p_max;
  }
  double alpha = cfg.alpha_flow;
  bool any = false;
  for (int k = 0; k < std::max(1, cfg.resolves); ++k) {
    bool ok = solve_pf_qp(cs, st, t, cfg, /*flow_rows=*/true, alpha, w_lo, w_hi,
                          w_fixed, q_fixed);
    if (!ok) {
      // one relaxed retry with loosened flow limits
      ok = solve_pf_qp(cs, st, t, cfg, true, alpha * 1.5, w_lo, w_hi, w_fixed,
                       q_fixed);
      if (!ok) return any;
    }
    any = true;
    alpha = 1.0 + (alpha - 1.0) * cfg.alpha_shrink;
  }
  return any;
}

// ------------------------------------------------------- reserve cleanup --

SolveStatus reserve_cleanup(const Case& cs, FlatState& st, int t) {
  const int nd = static_cast<int>(cs.devices.size());
  const double d_t = cs.time.durations[t];
  LpProblem lp;
  std::vector<int> rv(nd * kNumReserveProducts);
  for (int d = 0; d < nd; ++d) {
    const Device& dev = cs.devices[d];
    for (int r = 0; r < kNumReserveProducts; ++r) {
      double cap = (r == kQru || r == kQrd)
                       ? std::max(std::abs(dev.q_min), std::abs(dev.q_max))
                       : dev.p_max;
      // small cost floor so zero-cost reserves still collapse to zero
      rv[d * kNumReserveProducts + r] =
          lp.add_var(0.0, cap, d_t * dev.reserve_cost[r] + 1e-2);
    }
    const double u = st.get(kUOn, t, d);
    const double w = u * st.get(kPOn, t, d);
    const double wq = u * st.get(kQ, t, d);
    auto budget_row = [&](std::vector<int> prods, double budget) {
      std::vector<std::pair<int, double>> row;
      for (int pr : prods) row.push_back({rv[d * kNumReserveProducts + pr], 1.0});
      lp.add_le(std::move(row), std::max(budget, 0.0));
    };
    budget_row({kRgu, kScr, kRruOn}, u * dev.p_max - w);
    budget_row({kRgd, kRrdOn}, w - u * dev.p_min);
    budget_row({kNsc}, (1.0 - u) * dev.p_max);
    budget_row({kRruOff}, (1.0 - u) * dev.p_max);
    budget_row({kRrdOff}, (1.0 - u) * dev.p_max);
    budget_row({kQru}, u * dev.q_max - wq);
    budget_row({kQrd}, wq - u * dev.q_min);
  }
  for (const Zone& z : cs.zones) {
    for (int r = 0; r < kNumReserveProducts; ++r) {
      bool q_product = (r == kQru || r == kQrd);
      if (z.is_q != q_product || z.requirement[r].empty()) continue;
      double req = z.requirement[r][t];
      int short_var = lp.add_var(0.0, kInf, d_t * z.penalty[r]);
      std::vector<std::pair<int, double>> row{{short_var, -1.0}};
      for (int m : z.members)
        row.push_back({rv[m * kNumReserveProducts + r], -1.0});
      lp.add_le(std::move(row), -req);
    }
  }
  SolveResult r = solve_lp(lp);
  if (!r.optimal()) return r.status;
  const StateLayout& ly = st.layout;
  for (int d = 0; d < nd; ++d)
    for (int rr = 0; rr < kNumReserveProducts; ++rr) {
      int i = ly.at(reserve_family(rr), t, d);
      double v = r.x[rv[d * kNumReserveProducts + rr]];
      if (v < 1e-6) v = 0.0;  // interior-point purification
      st.x[i] = clip(v, st.lo[i], st.hi[i]);
    }
  return SolveStatus::kOptimal;
}

// ------------------------------------------------------ device projection --

DeviceSolution project_device(const Case& cs, int dev_idx, FlatState& st,
                              const std::vector<int>& frozen) {
  const Device& dev = cs.devices[dev_idx];
  const int T = st.layout.T;
  DeviceProjection prob;
  prob.dev = &dev;
  prob.T = T;
  prob.fixed = frozen;
  prob.u_target.resize(T);
  prob.p_target.resize(T);
  prob.q_target.resize(T);
  prob.r_target.resize(T);
  for (int t = 0; t < T; ++t) {
    const double u = st.get(kUOn, t, dev_idx);
    prob.u_target[t] = u;
    // project the dispatched quantities: with a fractional binary the basis
    // power alone overstates what the relaxed point actually injects
    prob.p_target[t] = u * st.get(kPOn, t, dev_idx);
    prob.q_target[t] = u * st.get(kQ, t, dev_idx);
    for (int r = 0; r < kNumReserveProducts; ++r)
      prob.r_target[t][r] = st.get(reserve_family(r), t, dev_idx);
  }
  DeviceSolution sol = solve_device_milp(prob);
  if (sol.status != SolveStatus::kOptimal) return sol;
  for (int t = 0; t < T; ++t) {
    st.set(kUOn, t, dev_idx, double(sol.u[t]));
    if (sol.u[t]) {
      st.set(kPOn, t, dev_idx, sol.p[t]);
      st.set(kQ, t, dev_idx, sol.q[t]);
    }
    for (int r = 0; r < kNumReserveProducts; ++r)
      st.set(reserve_family(r), t, dev_idx, sol.r[t][r]);
  }
  return sol;
}

// --------------------------------------------------------- freeze groups --

FreezeGroups assign_freeze_groups(const Case& cs, std::uint64_t seed) {
  const int nd = static_cast<int>(cs.devices.size());
  std::vector<int> order(nd);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0xf00dULL);
  for (int i = nd - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(0, i)]);
  FreezeGroups g;
  g.group.assign(nd, 0);
  for (int i = 0; i < nd; ++i) g.group[order[i]] = i % 2;
  return g;
}

// ----------------------------------------------- ramp-constrained solves --

bool ramp_constrained_pf(const Case& cs, FlatState& st,
                         const FlatState& entering, const FreezeGroups& groups,
                         int t, const ProjectionConfig& cfg) {
  const int nd = static_cast<int>(cs.devices.size());
  const int T = st.layout.T;
  std::vector<double> w_lo(nd), w_hi(nd);
  std::vector<char> w_fixed(nd, 0), q_fixed(nd, 0);
  for (int d = 0; d < nd; ++d) {
    const Device& dev = cs.devices[d];
    const double u = entering.get(kUOn, t, d);
    if (u <= 1e-6) {
      w_fixed[d] = q_fixed[d] = 1;
      continue;
    }
    if (groups.frozen_at(d, t)) {
      w_fixed[d] = 1;  // power pinned, reactive stays free
      continue;
    }
    const double w_now = u * entering.get(kPOn, t, d);
    const double w_prev = t == 0 ? dev.u0 * dev.p0
                                 : entering.get(kUOn, t - 1, d) *
                                       entering.get(kPOn, t - 1, d);
    double lo = std::max(dev.p_min, w_prev - dev.ramp_down);
    double hi = std::min(dev.p_max, w_prev + dev.ramp_up);
    if (t + 1 < T) {
      const double w_next =
          entering.get(kUOn, t + 1, d) * entering.get(kPOn, t + 1, d);
      lo = std::max(lo, w_next - dev.ramp_up);
      hi = std::min(hi, w_next + dev.ramp_down);
    }
    if (w_now < lo - 1e-9 || w_now > hi + 1e-9 || lo > hi) {
      // entering point violates the bracket hypothesis; freeze the device
      w_fixed[d] = 1;
      continue;
    }
    w_lo[d] = lo;
    w_hi[d] = hi;
  }
  return solve_pf_qp(cs, st, t, cfg, /*flow_rows=*/false, 1.0, w_lo, w_hi,
                     w_fixed, q_fixed);
}

}  // namespace acuc
