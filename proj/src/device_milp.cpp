#include "acuc/device_milp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace acuc {

namespace {

// Convex piecewise-linear function on a closed interval, stored as sampled
// breakpoints with linear interpolation between them.
struct Pwl {
  std::vector<double> xs, vs;
  bool empty = false;

  double lo() const { return xs.front(); }
  double hi() const { return xs.back(); }

  double eval(double x) const {
    if (x <= xs.front()) return vs.front();
    if (x >= xs.back()) return vs.back();
    size_t k = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
    double x0 = xs[k - 1], x1 = xs[k];
    if (x1 == x0) return std::min(vs[k - 1], vs[k]);
    double w = (x - x0) / (x1 - x0);
    return vs[k - 1] * (1.0 - w) + vs[k] * w;
  }

  // leftmost minimizer
  double argmin() const {
    size_t best = 0;
    for (size_t i = 1; i < xs.size(); ++i)
      if (vs[i] < vs[best] - 1e-15) best = i;
    return xs[best];
  }
  double min_value() const {
    double m = vs[0];
    for (double v : vs) m = std::min(m, v);
    return m;
  }
};

Pwl make_point(double x, double v) { return Pwl{{x, x}, {v, v}, false}; }

Pwl make_from_kinks(double lo, double hi, std::vector<double> kinks,
                    const std::function<double(double)>& f) {
  kinks.push_back(lo);
  kinks.push_back(hi);
  std::sort(kinks.begin(), kinks.end());
  Pwl p;
  for (double x : kinks) {
    if (x < lo || x > hi) continue;
    if (!p.xs.empty() && x == p.xs.back()) continue;
    p.xs.push_back(x);
    p.vs.push_back(f(x));
  }
  if (p.xs.size() == 1) {
    p.xs.push_back(p.xs[0]);
    p.vs.push_back(p.vs[0]);
  }
  return p;
}

Pwl add(const Pwl& a, const Pwl& b) {
  double lo = std::max(a.lo(), b.lo());
  double hi = std::min(a.hi(), b.hi());
  if (lo > hi) return Pwl{{}, {}, true};
  std::vector<double> xs;
  for (double x : a.xs)
    if (x >= lo && x <= hi) xs.push_back(x);
  for (double x : b.xs)
    if (x >= lo && x <= hi) xs.push_back(x);
  xs.push_back(lo);
  xs.push_back(hi);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  Pwl out;
  out.xs = xs;
  for (double x : xs) out.vs.push_back(a.eval(x) + b.eval(x));
  return out;
}

// W(w) = min over y in [w - ru, w + rd] of V(y): erosion of a convex
// function; the left branch shifts left by rd, the right branch right by ru.
Pwl erode(const Pwl& v, double ru, double rd) {
  if (v.empty) return v;
  // minimizer interval [m1, m2]
  double mval = v.min_value();
  size_t i1 = 0, i2 = v.xs.size() - 1;
  while (v.vs[i1] > mval + 1e-15) ++i1;
  i2 = i1;
  while (i2 + 1 < v.xs.size() && v.vs[i2 + 1] <= mval + 1e-15) ++i2;
  Pwl out;
  for (size_t i = 0; i <= i1; ++i) {
    double x = v.xs[i] - rd;
    if (!out.xs.empty() && x <= out.xs.back()) continue;
    out.xs.push_back(x);
    out.vs.push_back(v.vs[i]);
  }
  for (size_t i = i2; i < v.xs.size(); ++i) {
    double x = v.xs[i] + ru;
    if (!out.xs.empty() && x <= out.xs.back()) continue;
    out.xs.push_back(x);
    out.vs.push_back(v.vs[i]);
  }
  if (out.xs.size() == 1) {
    out.xs.push_back(out.xs[0]);
    out.vs.push_back(out.vs[0]);
  }
  return out;
}

Pwl restrict_domain(const Pwl& v, double lo, double hi) {
  if (v.empty || lo > v.hi() + 1e-12 || hi < v.lo() - 1e-12)
    return Pwl{{}, {}, true};
  lo = std::max(lo, v.lo());
  hi = std::min(hi, v.hi());
  if (lo > hi) return Pwl{{}, {}, true};
  Pwl out;
  out.xs.push_back(lo);
  out.vs.push_back(v.eval(lo));
  for (size_t i = 0; i < v.xs.size(); ++i) {
    if (v.xs[i] > lo && v.xs[i] < hi) {
      out.xs.push_back(v.xs[i]);
      out.vs.push_back(v.vs[i]);
    }
  }
  out.xs.push_back(hi);
  out.vs.push_back(v.eval(hi));
  return out;
}

struct PeriodCost {
  Pwl phi;          // cost of the dispatched power while on (or the {0} point)
  double constant;  // target distance forced by the on/off choice
};

// Collapses the per-period continuous subproblem onto the dispatched power:
// reserves above the headroom budgets cost their overflow one-for-one, the
// reactive part solves in closed form and contributes a constant.
PeriodCost period_cost(const DeviceProjection& prob, int t, int on) {
  const Device& dev = *prob.dev;
  const auto& r0 = prob.r_target[t];
  PeriodCost out;
  out.constant = 0.0;
  if (!on) {
    // online products forced to zero; offline caps are loose (<= p_max box)
    out.constant += r0[kRgu] + r0[kRgd] + r0[kScr] + r0[kRruOn] + r0[kRrdOn] +
                    r0[kQru] + r0[kQrd];
    out.phi = make_point(0.0, 0.0);
    return out;
  }
  // reactive side: keep q at target, shrink qru/qrd into their caps
  const double v1 = prob.q_target[t] + r0[kQru] - dev.q_max;
  const double v2 = dev.q_min - prob.q_target[t] + r0[kQrd];
  out.constant += std::max(v1, 0.0) + std::max(v2, 0.0);
  // offline products must clear while on
  out.constant += r0[kNsc] + r0[kRruOff] + r0[kRrdOff];

  const double a_up = r0[kRgu] + r0[kScr] + r0[kRruOn];
  const double a_dn = r0[kRgd] + r0[kRrdOn];
  const double p0 = prob.p_target[t];
  auto f = [&](double w) {
    return std::abs(w - p0) + std::max(a_up + w - dev.p_max, 0.0) +
           std::max(a_dn - w + dev.p_min, 0.0);
  };
  out.phi = make_from_kinks(dev.p_min, dev.p_max,
                            {p0, dev.p_max - a_up, dev.p_min + a_dn}, f);
  return out;
}

}  // namespace

bool sequence_feasible(const Device& dev, const std::vector<int>& u,
                       const std::vector<int>* fixed) {
  const int T = static_cast<int>(u.size());
  if (fixed)
    for (int t = 0; t < T; ++t)
      if ((*fixed)[t] >= 0 && u[t] != (*fixed)[t]) return false;
  int state = dev.u0;
  int dwell = 1 << 20;  // prior history assumed compliant
  for (int t = 0; t < T; ++t) {
    if (u[t] == state) {
      ++dwell;
      continue;
    }
    int need = state == 1 ? dev.min_up : dev.min_down;
    if (dwell < need) return false;
    state = u[t];
    dwell = 1;
  }
  return true;
}

DeviceSolution eval_device_sequence(const DeviceProjection& prob_raw,
                                    const std::vector<int>& u) {
  const Device& dev = *prob_raw.dev;
  const int T = prob_raw.T;
  DeviceSolution sol;
  sol.u = u;

  // project targets into their boxes first; |x - x0| splits exactly into
  // |x - clip(x0)| plus the constant |x0 - clip(x0)| because the optimum
  // never sits on the far side of the box edge
  DeviceProjection prob = prob_raw;
  double constants = 0.0;
  for (int t = 0; t < T; ++t) {
    auto clip_to = [&](double& v, double lo, double hi) {
      double c = clip(v, lo, hi);
      constants += std::abs(v - c);
      v = c;
    };
    clip_to(prob.u_target[t], 0.0, 1.0);
    clip_to(prob.p_target[t], dev.p_min, dev.p_max);
    clip_to(prob.q_target[t], dev.q_min, dev.q_max);
    for (int r = 0; r < kNumReserveProducts; ++r) {
      double cap = (r == kQru || r == kQrd)
                       ? std::max(std::abs(dev.q_min), std::abs(dev.q_max))
                       : dev.p_max;
      clip_to(prob.r_target[t][r], 0.0, cap);
    }
  }

  std::vector<PeriodCost> pc(T);
  for (int t = 0; t < T; ++t) {
    pc[t] = period_cost(prob, t, u[t]);
    constants += pc[t].constant;
  }
  // forward interval DP over the dispatched-power chain
  std::vector<Pwl> value(T);
  Pwl carry = make_point(dev.u0 * dev.p0, 0.0);
  for (int t = 0; t < T; ++t) {
    Pwl reach = erode(carry, dev.ramp_up, dev.ramp_down);
    value[t] = add(reach, pc[t].phi);
    if (value[t].empty) {
      sol.status = SolveStatus::kInfeasible;
      return sol;
    }
    carry = value[t];
  }
  // backward reconstruction (leftmost minimizers; deterministic)
  std::vector<double> w(T, 0.0);
  w[T - 1] = value[T - 1].argmin();
  for (int t = T - 2; t >= 0; --t) {
    double m = value[t].argmin();
    w[t] = clip(m, w[t + 1] - dev.ramp_up, w[t + 1] + dev.ramp_down);
    w[t] = clip(w[t], value[t].lo(), value[t].hi());
  }

  sol.status = SolveStatus::kOptimal;
  sol.p.assign(T, 0.0);
  sol.q.assign(T, 0.0);
  sol.r.assign(T, {});
  double obj = constants;
  for (int t = 0; t < T; ++t) {
    obj += std::abs(double(u[t]) - prob.u_target[t]);
    const auto& r0 = prob.r_target[t];
    auto& r = sol.r[t];
    if (!u[t]) {
      // offline: keep the offline products, zero the online ones
      r[kNsc] = r0[kNsc];
      r[kRruOff] = r0[kRruOff];
      r[kRrdOff] = r0[kRrdOff];
      continue;
    }
    w[t] = clip(w[t], dev.p_min, dev.p_max);
    sol.p[t] = w[t];
    obj += pc[t].phi.eval(w[t]);
    sol.q[t] = prob.q_target[t];
    // shrink reserve groups into the headroom budgets, fixed order
    double up_budget = dev.p_max - w[t];
    double over_up = r0[kRgu] + r0[kScr] + r0[kRruOn] - up_budget;
    r[kRgu] = r0[kRgu];
    r[kScr] = r0[kScr];
    r[kRruOn] = r0[kRruOn];
    for (int prod : {kRruOn, kScr, kRgu}) {
      if (over_up <= 0) break;
      double cut = std::min(r[prod], over_up);
      r[prod] -= cut;
      over_up -= cut;
    }
    double dn_budget = w[t] - dev.p_min;
    double over_dn = r0[kRgd] + r0[kRrdOn] - dn_budget;
    r[kRgd] = r0[kRgd];
    r[kRrdOn] = r0[kRrdOn];
    for (int prod : {kRrdOn, kRgd}) {
      if (over_dn <= 0) break;
      double cut = std::min(r[prod], over_dn);
      r[prod] -= cut;
      over_dn -= cut;
    }
    // reactive caps
    r[kQru] = std::min(r0[kQru], dev.q_max - sol.q[t]);
    r[kQrd] = std::min(r0[kQrd], sol.q[t] - dev.q_min);
    r[kQru] = std::max(r[kQru], 0.0);
    r[kQrd] = std::max(r[kQrd], 0.0);
  }
  sol.objective = obj;
  int prev = dev.u0;
  for (int t = 0; t < T; ++t) {
    if (u[t] != prev) ++sol.switches;
    prev = u[t];
  }
  return sol;
}

DeviceSolution solve_device_milp(const DeviceProjection& prob) {
  const Device& dev = *prob.dev;
  const int T = prob.T;
  if (T > 64)
    throw SolverError("device projection horizon exceeds the 64-period cap");
  DeviceSolution best;
  best.status = SolveStatus::kInfeasible;
  std::vector<int> u(T, 0);

  // DFS over (t, state, dwell); prior dwell treated as satisfied
  std::function<void(int, int, int)> dfs = [&](int t, int state, int dwell) {
    if (t == T) {
      if (!sequence_feasible(dev, u, &prob.fixed)) return;  // belt and braces
      DeviceSolution cand = eval_device_sequence(prob, u);
      if (cand.status != SolveStatus::kOptimal) return;
      bool better = false;
      if (best.status != SolveStatus::kOptimal) {
        better = true;
      } else if (cand.objective < best.objective - 1e-12) {
        better = true;
      } else if (std::abs(cand.objective - best.objective) <= 1e-12) {
        if (cand.switches < best.switches)
          better = true;
        else if (cand.switches == best.switches && cand.u < best.u)
          better = true;
      }
      if (better) best = cand;
      return;
    }
    for (int next : {0, 1}) {
      if (prob.fixed[t] >= 0 && next != prob.fixed[t]) continue;
      if (next == state) {
        u[t] = next;
        dfs(t + 1, state, dwell + 1);
      } else {
        int need = state == 1 ? dev.min_up : dev.min_down;
        if (dwell < need) continue;
        u[t] = next;
        dfs(t + 1, next, 1);
      }
    }
  };
  dfs(0, dev.u0, 1 << 20);
  return best;
}

}  // namespace acuc
