#include <cmath>

#include "acuc/parallel.hpp"
#include "acuc/surplus.hpp"

namespace acuc {

EnergyCost energy_cost(double p, std::span<const CostBlock> blocks, double d_t) {
  EnergyCost out;
  if (blocks.empty()) return out;
  double cum = 0.0;
  double marginal = blocks[0].marginal;
  bool found = false;
  for (const CostBlock& b : blocks) {
    double take = std::max(std::min(p - cum, b.size), 0.0);
    out.z += d_t * b.marginal * take;
    cum += b.size;
    if (!found && p <= cum && take > 0.0) {
      marginal = b.marginal;
      found = true;
    }
  }
  if (!found) {
    if (p > cum) {
      // beyond the total capacity the clipped cost is flat
      out.exceeded = true;
      marginal = 0.0;
    } else {
      marginal = blocks[0].marginal;  // p <= 0: first-block marginal
    }
  }
  out.dzdp = d_t * marginal;
  return out;
}

OverloadEval line_overload_penalty(double p_fr, double q_fr, double p_to,
                                   double q_to, double s_max, double d_t,
                                   double c_s, double eps) {
  OverloadEval out;
  const double s_fr = std::sqrt(p_fr * p_fr + q_fr * q_fr);
  const double s_to = std::sqrt(p_to * p_to + q_to * q_to);
  const double m_fr = s_fr - s_max;
  const double m_to = s_to - s_max;
  const bool fr_side = m_fr >= m_to;
  const double m = fr_side ? m_fr : m_to;
  out.z = d_t * c_s * soft_relu(m, eps);
  const double dz = d_t * c_s * soft_relu_grad(m, eps);
  if (dz != 0.0) {
    if (fr_side) {
      double s = std::max(s_fr, 1e-9);
      out.dp_fr = dz * p_fr / s;
      out.dq_fr = dz * q_fr / s;
    } else {
      double s = std::max(s_to, 1e-9);
      out.dp_to = dz * p_to / s;
      out.dq_to = dz * q_to / s;
    }
  }
  return out;
}

double power_balance_penalty(double mismatch, double d_t, double c,
                             const PenaltyShape& shape, double* grad) {
  const double k = d_t * c * shape.beta_scale;
  if (grad) *grad = k * soft_abs_grad(mismatch, shape.eps);
  return k * soft_abs(mismatch, shape.eps);
}

void device_rows(const Device& dev, double u, double p_on, double q,
                 const double* r, double w_prev,
                 double out_rows[kRowsPerDeviceTime]) {
  const double w = u * p_on;
  out_rows[0] = w - w_prev - dev.ramp_up;
  out_rows[1] = w_prev - w - dev.ramp_down;
  out_rows[2] = w + r[kRgu] + r[kScr] + r[kRruOn] - u * dev.p_max;
  out_rows[3] = u * dev.p_min - w + r[kRgd] + r[kRrdOn];
  out_rows[4] = r[kNsc] - (1.0 - u) * dev.p_max;
  out_rows[5] = r[kRruOff] - (1.0 - u) * dev.p_max;
  out_rows[6] = r[kRrdOff] - (1.0 - u) * dev.p_max;
  out_rows[7] = u * q + r[kQru] - u * dev.q_max;
  out_rows[8] = u * dev.q_min - u * q + r[kQrd];
}

namespace {

// Evaluates all per-period terms (everything except startup/shutdown and
// ramp rows, which couple adjacent periods) and optionally accumulates
// gradients of the loss into the t-slice of grad.
void eval_period(const Case& cs, const FlatState& st, const PenaltyShape& shape,
                 int t, FlowSet& fl, double* grad, SurplusTerms& out) {
  const StateLayout& ly = st.layout;
  const int nb = static_cast<int>(cs.buses.size());
  const int nbr = static_cast<int>(cs.branches.size());
  const double d_t = cs.time.durations[t];

  eval_branch_flows(cs, st, t, fl);
  const double* pf = fl.p_fr.data() + size_t(t) * nbr;
  const double* qf = fl.q_fr.data() + size_t(t) * nbr;
  const double* pt = fl.p_to.data() + size_t(t) * nbr;
  const double* qt = fl.q_to.data() + size_t(t) * nbr;
  const double* pb = fl.p_bus.data() + size_t(t) * nb;
  const double* qb = fl.q_bus.data() + size_t(t) * nb;

  // bus balance penalties and their per-bus mismatch sensitivities
  std::vector<double> gp_bus(nb, 0.0), gq_bus(nb, 0.0);
  for (int i = 0; i < nb; ++i) {
    double g = 0.0;
    out.p_balance += power_balance_penalty(pb[i], d_t, cs.penalty.c_p, shape,
                                           grad ? &g : nullptr);
    gp_bus[i] = g;
    g = 0.0;
    out.q_balance += power_balance_penalty(qb[i], d_t, cs.penalty.c_q, shape,
                                           grad ? &g : nullptr);
    gq_bus[i] = g;
  }

  // branch overloads, then chain (overload + balance) into branch variables
  for (int j = 0; j < nbr; ++j) {
    const Branch& br = cs.branches[j];
    OverloadEval ov = line_overload_penalty(pf[j], qf[j], pt[j], qt[j],
                                            br.s_max, d_t, cs.penalty.c_s,
                                            shape.eps);
    (br.is_transformer() ? out.xfm_overload : out.ac_overload) += ov.z;
    if (!grad) continue;
    const double gpf = ov.dp_fr + gp_bus[br.from];
    const double gqf = ov.dq_fr + gq_bus[br.from];
    const double gpt = ov.dp_to + gp_bus[br.to];
    const double gqt = ov.dq_to + gq_bus[br.to];
    BranchEval e = eval_branch(br, st.get(kV, t, br.from), st.get(kV, t, br.to),
                               st.get(kTheta, t, br.from),
                               st.get(kTheta, t, br.to), st.get(kPhi, t, j),
                               st.get(kTau, t, j));
    const double gd =
        gpf * e.dpfr_dd + gqf * e.dqfr_dd + gpt * e.dpto_dd + gqt * e.dqto_dd;
    grad[ly.at(kV, t, br.from)] +=
        gpf * e.dpfr_dvf + gqf * e.dqfr_dvf + gpt * e.dpto_dvf + gqt * e.dqto_dvf;
    grad[ly.at(kV, t, br.to)] +=
        gpf * e.dpfr_dvt + gqf * e.dqfr_dvt + gpt * e.dpto_dvt + gqt * e.dqto_dvt;
    grad[ly.at(kTheta, t, br.from)] += gd;
    grad[ly.at(kTheta, t, br.to)] -= gd;
    grad[ly.at(kPhi, t, j)] -= gd;
    grad[ly.at(kTau, t, j)] += gpf * e.dpfr_dtau + gqf * e.dqfr_dtau +
                               gpt * e.dpto_dtau + gqt * e.dqto_dtau;
  }

  // shunts: consumption g*v^2, injection b*v^2 per engaged step
  for (size_t s = 0; s < cs.shunts.size(); ++s) {
    const Shunt& sh = cs.shunts[s];
    double u = st.get(kUSh, t, int(s));
    double v = st.get(kV, t, sh.bus);
    if (grad) {
      grad[ly.at(kUSh, t, int(s))] +=
          gp_bus[sh.bus] * sh.g_step * v * v - gq_bus[sh.bus] * sh.b_step * v * v;
      grad[ly.at(kV, t, sh.bus)] +=
          2.0 * v * u * (gp_bus[sh.bus] * sh.g_step - gq_bus[sh.bus] * sh.b_step);
    }
  }

  // dc lines
  for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
    const DcLine& dc = cs.dc_lines[l];
    if (grad) {
      grad[ly.at(kPDcFr, t, int(l))] += gp_bus[dc.from] - gp_bus[dc.to];
      grad[ly.at(kQDcFr, t, int(l))] += gq_bus[dc.from];
      grad[ly.at(kQDcTo, t, int(l))] += gq_bus[dc.to];
    }
  }

  // devices: energy, on-cost, reserve costs, per-period rows
  for (size_t d = 0; d < cs.devices.size(); ++d) {
    const Device& dev = cs.devices[d];
    const double u = st.get(kUOn, t, int(d));
    const double p_on = st.get(kPOn, t, int(d));
    const double q = st.get(kQ, t, int(d));
    const double w = u * p_on;
    const bool producer = dev.kind == DeviceKind::producer;
    const double sgn_cs = producer ? -1.0 : 1.0;  // mismatch contribution sign

    EnergyCost en = energy_cost(w, dev.blocks[t], d_t);
    out.block_capacity_exceeded |= en.exceeded;
    // producers add cost to the loss, consumers subtract value
    double dLdw = 0.0;
    if (producer) {
      out.en_cost += en.z;
      dLdw += en.dzdp;
    } else {
      out.en_value += en.z;
      dLdw -= en.dzdp;
    }
    out.on_cost += d_t * dev.cost_on * u;

    double reserves[kNumReserveProducts];
    for (int r = 0; r < kNumReserveProducts; ++r) {
      reserves[r] = st.get(reserve_family(r), t, int(d));
      out.reserve_device += d_t * dev.reserve_cost[r] * reserves[r];
    }

    // balance coupling of dispatched p and q
    double dLdwq = sgn_cs * gq_bus[dev.bus];
    dLdw += sgn_cs * gp_bus[dev.bus];

    // per-period rows (3..9): headroom, offline caps, reactive caps
    double rows[kRowsPerDeviceTime];
    double w_prev_unused = 0.0;
    device_rows(dev, u, p_on, q, reserves, w_prev_unused, rows);
    double sg[kRowsPerDeviceTime] = {0};
    for (int rr = 2; rr < kRowsPerDeviceTime; ++rr) {
      out.penalized_linear += shape.rho * soft_relu(rows[rr], shape.eps);
      sg[rr] = shape.rho * soft_relu_grad(rows[rr], shape.eps);
    }
    if (!grad) continue;

    double gu = d_t * dev.cost_on;
    double gp = 0.0, gq_dev = 0.0;
    // w = u * p_on appears in energy, balance, rows 3/4
    const double dLdw_total = dLdw + sg[2] - sg[3];
    gp += dLdw_total * u;
    gu += dLdw_total * p_on;
    // direct u terms of the rows
    gu += sg[2] * (-dev.p_max) + sg[3] * dev.p_min + sg[4] * dev.p_max +
          sg[5] * dev.p_max + sg[6] * dev.p_max;
    // reactive: wq = u * q in balance, rows 8/9
    const double dLdwq_total = dLdwq + sg[7] - sg[8];
    gq_dev += dLdwq_total * u;
    gu += dLdwq_total * q;
    gu += sg[7] * (-dev.q_max) + sg[8] * dev.q_min;

    grad[ly.at(kUOn, t, int(d))] += gu;
    grad[ly.at(kPOn, t, int(d))] += gp;
    grad[ly.at(kQ, t, int(d))] += gq_dev;
    grad[ly.at(kResRgu, t, int(d))] += d_t * dev.reserve_cost[kRgu] + sg[2];
    grad[ly.at(kResScr, t, int(d))] += d_t * dev.reserve_cost[kScr] + sg[2];
    grad[ly.at(kResRruOn, t, int(d))] += d_t * dev.reserve_cost[kRruOn] + sg[2];
    grad[ly.at(kResRgd, t, int(d))] += d_t * dev.reserve_cost[kRgd] + sg[3];
    grad[ly.at(kResRrdOn, t, int(d))] += d_t * dev.reserve_cost[kRrdOn] + sg[3];
    grad[ly.at(kResNsc, t, int(d))] += d_t * dev.reserve_cost[kNsc] + sg[4];
    grad[ly.at(kResRruOff, t, int(d))] += d_t * dev.reserve_cost[kRruOff] + sg[5];
    grad[ly.at(kResRrdOff, t, int(d))] += d_t * dev.reserve_cost[kRrdOff] + sg[6];
    grad[ly.at(kResQru, t, int(d))] += d_t * dev.reserve_cost[kQru] + sg[7];
    grad[ly.at(kResQrd, t, int(d))] += d_t * dev.reserve_cost[kQrd] + sg[8];
  }

  // zonal reserve shortfalls
  for (const Zone& z : cs.zones) {
    for (int r = 0; r < kNumReserveProducts; ++r) {
      bool q_product = (r == kQru || r == kQrd);
      if (z.is_q != q_product) continue;
      double req = z.requirement[r].empty() ? 0.0 : z.requirement[r][t];
      if (req == 0.0 && z.penalty[r] == 0.0) continue;
      double provided = 0.0;
      for (int m : z.members) provided += st.get(reserve_family(r), t, m);
      double arg = req - provided;
      out.reserve_zonal += d_t * z.penalty[r] * soft_relu(arg, shape.eps);
      if (grad) {
        double g = -d_t * z.penalty[r] * soft_relu_grad(arg, shape.eps);
        for (int m : z.members) grad[ly.at(reserve_family(r), t, m)] += g;
      }
    }
  }
}

// Couplings across adjacent periods for one device: startup/shutdown costs
// and ramp rows on dispatched power.
void eval_device_chain(const Case& cs, const FlatState& st,
                       const PenaltyShape& shape, int d, double* grad,
                       SurplusTerms& out) {
  const StateLayout& ly = st.layout;
  const Device& dev = cs.devices[d];
  const int T = ly.T;
  for (int t = 0; t < T; ++t) {
    const double u = st.get(kUOn, t, d);
    const double u_prev = t == 0 ? double(dev.u0) : st.get(kUOn, t - 1, d);
    const double delta = u - u_prev;
    if (delta > 0.0) {
      out.su_cost += dev.cost_su * delta;
      if (grad) {
        grad[ly.at(kUOn, t, d)] += dev.cost_su;
        if (t > 0) grad[ly.at(kUOn, t - 1, d)] -= dev.cost_su;
      }
    } else if (delta < 0.0) {
      out.sd_cost += dev.cost_sd * (-delta);
      if (grad) {
        grad[ly.at(kUOn, t, d)] -= dev.cost_sd;
        if (t > 0) grad[ly.at(kUOn, t - 1, d)] += dev.cost_sd;
      }
    }

    const double p_on = st.get(kPOn, t, d);
    const double w = u * p_on;
    double u_pr = u_prev;
    double p_pr = t == 0 ? dev.p0 : st.get(kPOn, t - 1, d);
    const double w_prev = t == 0 ? dev.u0 * dev.p0 : u_pr * p_pr;
    const double row_up = w - w_prev - dev.ramp_up;
    const double row_dn = w_prev - w - dev.ramp_down;
    out.penalized_linear +=
        shape.rho * (soft_relu(row_up, shape.eps) + soft_relu(row_dn, shape.eps));
    if (grad) {
      const double gup = shape.rho * soft_relu_grad(row_up, shape.eps);
      const double gdn = shape.rho * soft_relu_grad(row_dn, shape.eps);
      const double dLdw = gup - gdn;
      grad[ly.at(kPOn, t, d)] += dLdw * u;
      grad[ly.at(kUOn, t, d)] += dLdw * p_on;
      if (t > 0) {
        grad[ly.at(kPOn, t - 1, d)] -= dLdw * u_pr;
        grad[ly.at(kUOn, t - 1, d)] -= dLdw * p_pr;
      }
    }
  }
}

SurplusTerms evaluate(const Case& cs, const FlatState& st,
                      const PenaltyShape& shape, double* grad) {
  const int T = st.layout.T;
  const int nd = static_cast<int>(cs.devices.size());
  FlowSet fl;
  fl.resize(T, static_cast<int>(cs.branches.size()),
            static_cast<int>(cs.buses.size()));
  std::vector<SurplusTerms> per_t(T), per_dev(nd);
  parallel_for(T, [&](int lo, int hi) {
    for (int t = lo; t < hi; ++t)
      eval_period(cs, st, shape, t, fl, grad, per_t[t]);
  });
  parallel_for(nd, [&](int lo, int hi) {
    for (int d = lo; d < hi; ++d)
      eval_device_chain(cs, st, shape, d, grad, per_dev[d]);
  });
  SurplusTerms out;
  auto add = [&](const SurplusTerms& p) {
    out.en_cost += p.en_cost;
    out.en_value += p.en_value;
    out.on_cost += p.on_cost;
    out.su_cost += p.su_cost;
    out.sd_cost += p.sd_cost;
    out.ac_overload += p.ac_overload;
    out.xfm_overload += p.xfm_overload;
    out.p_balance += p.p_balance;
    out.q_balance += p.q_balance;
    out.reserve_device += p.reserve_device;
    out.reserve_zonal += p.reserve_zonal;
    out.penalized_linear += p.penalized_linear;
    out.block_capacity_exceeded |= p.block_capacity_exceeded;
  };
  for (const auto& p : per_t) add(p);
  for (const auto& p : per_dev) add(p);
  return out;
}

}  // namespace

SurplusTerms eval_market_surplus(const Case& cs, const FlatState& st,
                                 const PenaltyShape& shape) {
  return evaluate(cs, st, shape, nullptr);
}

SurplusTerms backprop_market_surplus(const Case& cs, const FlatState& st,
                                     const PenaltyShape& shape,
                                     std::vector<double>& grad) {
  grad.assign(st.layout.total, 0.0);
  return evaluate(cs, st, shape, grad.data());
}

}  // namespace acuc
