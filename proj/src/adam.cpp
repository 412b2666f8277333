#include "acuc/adam.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "acuc/parallel.hpp"

namespace acuc {

AdamConfig AdamConfig::defaults() {
  AdamConfig c;
  auto set = [&](VarFamily f, double a0) {
    c.alpha0[f] = a0;
    c.alphaf[f] = a0 * 1e-4;
  };
  set(kV, 1e-3);
  set(kTheta, 1e-3);
  set(kPhi, 1e-3);
  set(kTau, 1e-3);
  set(kPDcFr, 1e-2);
  set(kQDcFr, 1e-2);
  set(kQDcTo, 1e-2);
  set(kPOn, 1e-2);
  set(kQ, 1e-2);
  for (int r = 0; r < kNumReserveProducts; ++r)
    set(reserve_family(r), 1e-2);
  set(kUSh, 1e-2);
  set(kUOn, 1e-2);
  return c;
}

namespace {

double sigmoid_scale(double t_w, double t0, double tf) {
  double th = 2.0 * (clip(t_w, t0, tf) - t0) / (tf - t0) - 1.0;
  double e = std::exp(4.0 * th);
  return e / (0.6 + e);
}

}  // namespace

double schedule_step_size(double t_w, double t0, double tf, double alpha_0,
                          double alpha_f) {
  double beta = sigmoid_scale(t_w, t0, tf);
  return alpha_0 * std::pow(10.0, beta * std::log10(alpha_f / alpha_0));
}

HomotopyState schedule_homotopy(double t_w, double t0, double tf,
                                const HomotopyConfig& cfg) {
  HomotopyState h;
  h.eps = schedule_step_size(t_w, t0, tf, cfg.eps0, cfg.epsf);
  h.beta_scale = 0.1 + 0.9 * (clip(t_w, t0, tf) - t0) / (tf - t0);
  h.rho = schedule_step_size(t_w, t0, tf, cfg.rho0, cfg.rhof);
  return h;
}

void adam_step(FlatState& st, const std::vector<double>& grad,
               const AdamConfig& cfg,
               const std::array<double, kNumVarFamilies>& alpha) {
  st.iter += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(st.iter));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(st.iter));
  const StateLayout& ly = st.layout;

  // flat index -> family, block structure; parallel over (family, t) blocks
  struct Block {
    int family, begin, end;
  };
  std::vector<Block> blocks;
  for (int f = 0; f < kNumVarFamilies; ++f) {
    if (ly.count[f] == 0) continue;
    for (int t = 0; t < ly.T; ++t) {
      int b = ly.at(static_cast<VarFamily>(f), t, 0);
      blocks.push_back({f, b, b + ly.count[f]});
    }
  }
  std::vector<int> bad(blocks.size(), -1);
  parallel_for(static_cast<int>(blocks.size()), [&](int lo, int hi) {
    for (int bi = lo; bi < hi; ++bi) {
      const Block& blk = blocks[bi];
      const double a = alpha[blk.family];
      for (int i = blk.begin; i < blk.end; ++i) {
        if (!std::isfinite(grad[i])) {
          bad[bi] = i;
          continue;
        }
        if (st.frozen[i] || st.lo[i] == st.hi[i]) continue;
        const double g = grad[i];
        // exact fixed point: no gradient and no momentum leaves x alone
        if (g == 0.0 && st.m[i] == 0.0 && st.v[i] == 0.0) continue;
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
        const double num = st.m[i] / bc1 + cfg.eps;
        const double den = std::sqrt(st.v[i] / bc2) + cfg.eps;
        st.x[i] = clip(st.x[i] - a * num / den, st.lo[i], st.hi[i]);
      }
    }
  });
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    if (bad[bi] >= 0) {
      int i = bad[bi];
      int f = ly.family_of(i);
      throw SolverError(std::string("non-finite gradient in family ") +
                        kVarFamilyNames[f] + " at flat index " +
                        std::to_string(i));
    }
  }
}

void Trace::to_csv(const std::string& path) const {
  std::ofstream out(path);
  out << "iteration,wall_clock,z_ms,z_ctg,alpha,eps,beta_scale,rho\n";
  char buf[256];
  for (const TraceRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.6g,%.10g,%.10g,%.6g,%.6g,%.6g,%.6g\n",
                  static_cast<long long>(r.iter), r.t_w, r.z_ms, r.z_ctg,
                  r.alpha, r.eps, r.beta_scale, r.rho);
    out << buf;
  }
}

AdamLoopResult run_adam_loop(const Case& cs, FlatState& st, CtgWorkspace* ws,
                             const AdamLoopConfig& cfg, double w0, double w1,
                             int n_iters, Trace* trace, double deadline) {
  AdamLoopResult res;
  if (n_iters <= 0 || w1 <= w0) return res;
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> grad;
  std::array<double, kNumVarFamilies> alpha{};
  for (int it = 0; it < n_iters; ++it) {
    const double t_w = w0 + (it + 0.5) / double(n_iters) * (w1 - w0);
    HomotopyState hom = schedule_homotopy(t_w, cfg.t0, cfg.tf, cfg.homotopy);
    PenaltyShape shape{hom.eps, hom.beta_scale, hom.rho};
    for (int f = 0; f < kNumVarFamilies; ++f)
      alpha[f] = schedule_step_size(t_w, cfg.t0, cfg.tf, cfg.adam.alpha0[f],
                                    cfg.adam.alphaf[f]);
    SurplusTerms terms = backprop_market_surplus(cs, st, shape, grad);
    double z_ctg = 0.0;
    if (ws && !ws->ctg.empty()) {
      FlowSet fl = eval_flows(cs, st);
      z_ctg = ctg_iteration(cs, st, fl, *ws, shape, st.iter, grad.data(),
                            /*full_eval=*/false);
    }
    terms.ctg = z_ctg;
    adam_step(st, grad, cfg.adam, alpha);
    res.iterations += 1;
    res.last_z_ms = terms.market_surplus();
    if (trace && (it % cfg.trace_stride == 0 || it == n_iters - 1)) {
      trace->rows.push_back({st.iter, t_w, terms.market_surplus(), z_ctg,
                             alpha[kPOn], hom.eps, hom.beta_scale, hom.rho});
    }
    if (deadline > 0.0) {
      double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      if (elapsed > deadline) {
        res.deadline_tripped = true;
        break;
      }
    }
  }
  return res;
}

}  // namespace acuc
