#include <cmath>

#include "acuc/parallel.hpp"
#include "acuc/surplus.hpp"

namespace acuc {

BranchEval eval_branch(const Branch& br, double v_fr, double v_to,
                       double theta_fr, double theta_to, double phi,
                       double tau) {
  const double g = br.g_sr;
  const double b = br.b_sr;
  const double bsh = br.b_ch * 0.5;
  const double d = theta_fr - theta_to - phi;
  const double cd = std::cos(d), sd = std::sin(d);
  const double gc = g * cd, gs = g * sd, bc = b * cd, bs = b * sd;
  const double it = 1.0 / tau;
  const double it2 = it * it;
  const double vv = v_fr * v_to * it;

  BranchEval e;
  e.p_fr = g * v_fr * v_fr * it2 - vv * (gc + bs);
  e.q_fr = -(b + bsh) * v_fr * v_fr * it2 - vv * (gs - bc);
  e.p_to = g * v_to * v_to - vv * (gc - bs);
  e.q_to = -(b + bsh) * v_to * v_to + vv * (gs + bc);

  e.dpfr_dvf = 2.0 * g * v_fr * it2 - v_to * it * (gc + bs);
  e.dpfr_dvt = -v_fr * it * (gc + bs);
  e.dpfr_dd = vv * (gs - bc);
  e.dpfr_dtau = (-2.0 * g * v_fr * v_fr * it2 + vv * (gc + bs)) * it;

  e.dqfr_dvf = -2.0 * (b + bsh) * v_fr * it2 - v_to * it * (gs - bc);
  e.dqfr_dvt = -v_fr * it * (gs - bc);
  e.dqfr_dd = -vv * (gc + bs);
  e.dqfr_dtau = (2.0 * (b + bsh) * v_fr * v_fr * it2 + vv * (gs - bc)) * it;

  e.dpto_dvf = -v_to * it * (gc - bs);
  e.dpto_dvt = 2.0 * g * v_to - v_fr * it * (gc - bs);
  e.dpto_dd = vv * (gs + bc);
  e.dpto_dtau = vv * (gc - bs) * it;

  e.dqto_dvf = v_to * it * (gs + bc);
  e.dqto_dvt = -2.0 * (b + bsh) * v_to + v_fr * it * (gs + bc);
  e.dqto_dd = vv * (gc - bs);
  e.dqto_dtau = -vv * (gs + bc) * it;
  return e;
}

void eval_branch_flows(const Case& cs, const FlatState& st, int t, FlowSet& fl) {
  const int nbr = static_cast<int>(cs.branches.size());
  const int nb = static_cast<int>(cs.buses.size());
  double* pf = fl.p_fr.data() + size_t(t) * nbr;
  double* qf = fl.q_fr.data() + size_t(t) * nbr;
  double* pt = fl.p_to.data() + size_t(t) * nbr;
  double* qt = fl.q_to.data() + size_t(t) * nbr;
  for (int j = 0; j < nbr; ++j) {
    const Branch& br = cs.branches[j];
    BranchEval e = eval_branch(br, st.get(kV, t, br.from), st.get(kV, t, br.to),
                               st.get(kTheta, t, br.from),
                               st.get(kTheta, t, br.to), st.get(kPhi, t, j),
                               st.get(kTau, t, j));
    pf[j] = e.p_fr;
    qf[j] = e.q_fr;
    pt[j] = e.p_to;
    qt[j] = e.q_to;
  }
  // consumption-positive bus mismatch sums
  double* pb = fl.p_bus.data() + size_t(t) * nb;
  double* qb = fl.q_bus.data() + size_t(t) * nb;
  for (int i = 0; i < nb; ++i) pb[i] = qb[i] = 0.0;
  for (int j = 0; j < nbr; ++j) {
    const Branch& br = cs.branches[j];
    pb[br.from] += pf[j];
    qb[br.from] += qf[j];
    pb[br.to] += pt[j];
    qb[br.to] += qt[j];
  }
  for (size_t s = 0; s < cs.shunts.size(); ++s) {
    const Shunt& sh = cs.shunts[s];
    double u = st.get(kUSh, t, int(s));
    double v = st.get(kV, t, sh.bus);
    pb[sh.bus] += u * sh.g_step * v * v;
    qb[sh.bus] -= u * sh.b_step * v * v;
  }
  for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
    const DcLine& dc = cs.dc_lines[l];
    double p = st.get(kPDcFr, t, int(l));
    pb[dc.from] += p;
    pb[dc.to] -= p;
    qb[dc.from] += st.get(kQDcFr, t, int(l));
    qb[dc.to] += st.get(kQDcTo, t, int(l));
  }
  for (size_t d = 0; d < cs.devices.size(); ++d) {
    const Device& dev = cs.devices[d];
    double u = st.get(kUOn, t, int(d));
    double w = u * st.get(kPOn, t, int(d));
    double wq = u * st.get(kQ, t, int(d));
    double sgn = dev.kind == DeviceKind::consumer ? 1.0 : -1.0;
    pb[dev.bus] += sgn * w;
    qb[dev.bus] += sgn * wq;
  }
}

FlowSet eval_flows(const Case& cs, const FlatState& st) {
  FlowSet fl;
  fl.resize(st.layout.T, static_cast<int>(cs.branches.size()),
            static_cast<int>(cs.buses.size()));
  parallel_for(st.layout.T, [&](int lo, int hi) {
    for (int t = lo; t < hi; ++t) eval_branch_flows(cs, st, t, fl);
  });
  return fl;
}

}  // namespace acuc
