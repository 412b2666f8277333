#include <cmath>

#include "acuc/case.hpp"

namespace acuc {

const char* const kReserveNames[kNumReserveProducts] = {
    "rgu", "rgd", "scr", "nsc", "rru_on", "rru_off", "rrd_on", "rrd_off",
    "qru", "qrd"};

const char* const kVarFamilyNames[kNumVarFamilies] = {
    "v",       "theta",    "phi",      "tau",      "p_fr_dc", "q_fr_dc",
    "q_to_dc", "p_on",     "q",        "p_rgu",    "p_rgd",   "p_scr",
    "p_nsc",   "p_rru_on", "p_rru_off", "p_rrd_on", "p_rrd_off", "q_qru",
    "q_qrd",   "u_sh",     "u_on"};

int Case::reference_bus() const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].reference) return static_cast<int>(i);
  return -1;
}

StateLayout StateLayout::build(const Case& cs) {
  StateLayout ly;
  ly.T = cs.time.periods();
  const int nb = static_cast<int>(cs.buses.size());
  const int nbr = static_cast<int>(cs.branches.size());
  const int ndc = static_cast<int>(cs.dc_lines.size());
  const int nd = static_cast<int>(cs.devices.size());
  const int nsh = static_cast<int>(cs.shunts.size());
  ly.count[kV] = nb;
  ly.count[kTheta] = nb;
  ly.count[kPhi] = nbr;
  ly.count[kTau] = nbr;
  ly.count[kPDcFr] = ndc;
  ly.count[kQDcFr] = ndc;
  ly.count[kQDcTo] = ndc;
  ly.count[kPOn] = nd;
  ly.count[kQ] = nd;
  for (int r = 0; r < kNumReserveProducts; ++r) ly.count[kResRgu + r] = nd;
  ly.count[kUSh] = nsh;
  ly.count[kUOn] = nd;
  int off = 0;
  for (int f = 0; f < kNumVarFamilies; ++f) {
    ly.offset[f] = off;
    off += ly.count[f] * ly.T;
  }
  ly.total = off;
  return ly;
}

int StateLayout::family_of(int flat_index) const {
  for (int f = kNumVarFamilies - 1; f >= 0; --f)
    if (flat_index >= offset[f]) return f;
  return 0;
}

void FlatState::clip_all() {
  for (size_t i = 0; i < x.size(); ++i) x[i] = clip(x[i], lo[i], hi[i]);
}

double FlatState::bounds_violation() const {
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, lo[i] - x[i]);
    worst = std::max(worst, x[i] - hi[i]);
  }
  return worst;
}

void fill_bounds(const Case& cs, FlatState& st) {
  const StateLayout& ly = st.layout;
  const int T = ly.T;
  const int ref = cs.reference_bus();
  for (int t = 0; t < T; ++t) {
    for (size_t i = 0; i < cs.buses.size(); ++i) {
      st.lo[ly.at(kV, t, int(i))] = cs.buses[i].v_min;
      st.hi[ly.at(kV, t, int(i))] = cs.buses[i].v_max;
      // reference angle pinned to zero; others get a generous box
      double tlo = (int(i) == ref) ? 0.0 : -1.5;
      double thi = (int(i) == ref) ? 0.0 : 1.5;
      st.lo[ly.at(kTheta, t, int(i))] = tlo;
      st.hi[ly.at(kTheta, t, int(i))] = thi;
    }
    for (size_t j = 0; j < cs.branches.size(); ++j) {
      st.lo[ly.at(kPhi, t, int(j))] = cs.branches[j].phi_min;
      st.hi[ly.at(kPhi, t, int(j))] = cs.branches[j].phi_max;
      st.lo[ly.at(kTau, t, int(j))] = cs.branches[j].tau_min;
      st.hi[ly.at(kTau, t, int(j))] = cs.branches[j].tau_max;
    }
    for (size_t l = 0; l < cs.dc_lines.size(); ++l) {
      const DcLine& dc = cs.dc_lines[l];
      st.lo[ly.at(kPDcFr, t, int(l))] = -dc.p_max;
      st.hi[ly.at(kPDcFr, t, int(l))] = dc.p_max;
      st.lo[ly.at(kQDcFr, t, int(l))] = dc.q_fr_min;
      st.hi[ly.at(kQDcFr, t, int(l))] = dc.q_fr_max;
      st.lo[ly.at(kQDcTo, t, int(l))] = dc.q_to_min;
      st.hi[ly.at(kQDcTo, t, int(l))] = dc.q_to_max;
    }
    for (size_t d = 0; d < cs.devices.size(); ++d) {
      const Device& dev = cs.devices[d];
      st.lo[ly.at(kPOn, t, int(d))] = dev.p_min;
      st.hi[ly.at(kPOn, t, int(d))] = dev.p_max;
      st.lo[ly.at(kQ, t, int(d))] = dev.q_min;
      st.hi[ly.at(kQ, t, int(d))] = dev.q_max;
      for (int r = 0; r < kNumReserveProducts; ++r) {
        st.lo[ly.at(reserve_family(r), t, int(d))] = 0.0;
        double cap = (r == kQru || r == kQrd)
                         ? std::max(std::abs(dev.q_min), std::abs(dev.q_max))
                         : dev.p_max;
        st.hi[ly.at(reserve_family(r), t, int(d))] = cap;
      }
      st.lo[ly.at(kUOn, t, int(d))] = 0.0;
      st.hi[ly.at(kUOn, t, int(d))] = 1.0;
    }
    for (size_t s = 0; s < cs.shunts.size(); ++s) {
      st.lo[ly.at(kUSh, t, int(s))] = 0.0;
      st.hi[ly.at(kUSh, t, int(s))] = double(cs.shunts[s].steps);
    }
  }
}

FlatState init_state(const Case& cs) {
  FlatState st;
  st.layout = StateLayout::build(cs);
  st.x.assign(st.layout.total, 0.0);
  st.lo.assign(st.layout.total, -kInf);
  st.hi.assign(st.layout.total, kInf);
  st.m.assign(st.layout.total, 0.0);
  st.v.assign(st.layout.total, 0.0);
  st.frozen.assign(st.layout.total, 0);
  st.iter = 0;
  fill_bounds(cs, st);
  const StateLayout& ly = st.layout;
  for (int t = 0; t < ly.T; ++t) {
    for (int i = 0; i < ly.count[kV]; ++i) st.set(kV, t, i, 1.0);
    for (int j = 0; j < ly.count[kTau]; ++j) st.set(kTau, t, j, 1.0);
    for (size_t d = 0; d < cs.devices.size(); ++d) {
      st.set(kUOn, t, int(d), double(cs.devices[d].u0));
      st.set(kPOn, t, int(d), cs.devices[d].p0);
    }
  }
  st.clip_all();
  return st;
}

void Case::validate() const {
  if (time.periods() < 1) throw ValidationError("time grid has no periods");
  for (double d : time.durations)
    if (!(d > 0)) throw ValidationError("non-positive period duration");
  if (!(time.tf > time.t0)) throw ValidationError("wall-clock budget tf <= t0");
  if (buses.size() < 1) throw ValidationError("case has no buses");
  int refs = 0;
  for (const Bus& b : buses) {
    if (!(b.v_min > 0 && b.v_min <= b.v_max))
      throw ValidationError("bus " + b.id + ": invalid voltage bounds");
    refs += b.reference ? 1 : 0;
  }
  if (refs == 0) throw ValidationError("no reference bus");
  if (refs > 1) throw ValidationError("multiple reference buses");
  const int nb = static_cast<int>(buses.size());
  const int T = time.periods();
  for (const Branch& br : branches) {
    if (br.from < 0 || br.from >= nb || br.to < 0 || br.to >= nb ||
        br.from == br.to)
      throw ValidationError("branch " + br.id + ": bad endpoints");
    if (br.b_sr == 0.0) throw ValidationError("branch " + br.id + ": b_sr = 0");
    if (!(br.x > 0)) throw ValidationError("branch " + br.id + ": x <= 0");
    if (!(br.s_max > 0) || br.s_max_ctg < br.s_max)
      throw ValidationError("branch " + br.id + ": bad flow limits");
    if (!(br.tau_min <= br.tau_max && br.phi_min <= br.phi_max))
      throw ValidationError("branch " + br.id + ": bad tap/shift bounds");
  }
  for (const DcLine& dc : dc_lines) {
    if (dc.from < 0 || dc.from >= nb || dc.to < 0 || dc.to >= nb)
      throw ValidationError("dc line " + dc.id + ": bad endpoints");
    if (dc.p_max < 0) throw ValidationError("dc line " + dc.id + ": p_max < 0");
  }
  for (const Shunt& sh : shunts) {
    if (sh.bus < 0 || sh.bus >= nb)
      throw ValidationError("shunt " + sh.id + ": bad bus");
    if (sh.steps < 0) throw ValidationError("shunt " + sh.id + ": steps < 0");
  }
  for (const Device& dev : devices) {
    if (dev.bus < 0 || dev.bus >= nb)
      throw ValidationError("device " + dev.id + ": bad bus");
    if (static_cast<int>(dev.blocks.size()) != T)
      throw ValidationError("device " + dev.id + ": blocks not per-period");
    for (const auto& blocks_t : dev.blocks) {
      double prev = dev.kind == DeviceKind::producer ? -kInf : kInf;
      for (const CostBlock& b : blocks_t) {
        if (b.size < 0)
          throw ValidationError("device " + dev.id + ": negative block size");
        bool mono = dev.kind == DeviceKind::producer ? b.marginal >= prev
                                                     : b.marginal <= prev;
        if (!mono)
          throw ValidationError("device " + dev.id +
                                ": block marginals not monotone");
        prev = b.marginal;
      }
    }
    if (!(dev.p_min <= dev.p_max) || !(dev.q_min <= dev.q_max))
      throw ValidationError("device " + dev.id + ": bad p/q bounds");
    if (dev.ramp_up < 0 || dev.ramp_down < 0)
      throw ValidationError("device " + dev.id + ": negative ramp rate");
    if (dev.min_up < 1 || dev.min_down < 1)
      throw ValidationError("device " + dev.id + ": min up/down < 1");
    if (dev.u0 != 0 && dev.u0 != 1)
      throw ValidationError("device " + dev.id + ": u0 not binary");
  }
  const int nd = static_cast<int>(devices.size());
  for (const Zone& z : zones) {
    for (int m : z.members)
      if (m < 0 || m >= nd)
        throw ValidationError("zone " + z.id + ": bad member index");
    for (int r = 0; r < kNumReserveProducts; ++r) {
      if (!z.requirement[r].empty() &&
          static_cast<int>(z.requirement[r].size()) != T)
        throw ValidationError("zone " + z.id + ": requirement not per-period");
      for (double v : z.requirement[r])
        if (v < 0)
          throw ValidationError("zone " + z.id + ": negative requirement");
      if (z.penalty[r] < 0)
        throw ValidationError("zone " + z.id + ": negative penalty");
    }
  }
  const int nbr = static_cast<int>(branches.size());
  for (const Contingency& k : contingencies)
    if (k.branch < 0 || k.branch >= nbr)
      throw ValidationError("contingency " + k.id + ": bad branch");
  if (!(penalty.c_p > 0 && penalty.c_q > 0 && penalty.c_s > 0))
    throw ValidationError("penalty constants must be positive");

  // base topology connected (union-find over branches)
  std::vector<int> parent(nb);
  for (int i = 0; i < nb; ++i) parent[i] = i;
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Branch& br : branches) parent[find(br.from)] = find(br.to);
  for (int i = 1; i < nb; ++i)
    if (find(i) != find(0)) throw ValidationError("base topology disconnected");
}

}  // namespace acuc
