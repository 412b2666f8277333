#pragma once

#include <vector>

#include "acuc/sparse.hpp"
#include "acuc/surplus.hpp"

namespace acuc {

struct CtgConfig {
  double eps_pcg = 1e-8;
  double zeta = 0.0;          // backprop threshold on the contingency score
  double top_frac = 0.10;     // worst set size as a fraction of contingencies
  double stoch_frac = 0.05;   // stochastic draws per period
  int severity_window = 10;   // sliding-max window length
  std::uint64_t seed = 1;
};

// One-period outputs of a single contingency evaluation.
struct CtgScore {
  double z = 0.0;
  std::vector<double> overload_grad;  // dz/dp per branch (outaged row zero)
  std::vector<double> dq_fr, dq_to;   // dz/d(reactive flow) per branch
};

struct CtgWorkspace {
  int n_bus = 0, n_branch = 0, ref = -1;
  std::vector<int> red;  // bus -> reduced index, -1 at the reference
  std::vector<std::pair<int, int>> br_red;  // reduced branch endpoints
  std::vector<double> inv_x;
  SparseCsr Yb;  // reduced DC admittance
  IldlPrecond prec;
  CtgConfig cfg;

  struct CtgVectors {
    int branch = -1;
    bool islanding = false;
    std::vector<double> u_k;  // Yb^{-1} e_branch
    double w_coef = 0.0;      // sigma / (1 + sigma * e^T u_k)
  };
  std::vector<CtgVectors> ctg;

  // per-period scratch, rebuilt each iteration
  std::vector<std::vector<double>> theta_base;  // reduced angles
  std::vector<std::vector<double>> c_t;         // reduced rhs
  std::vector<int> base_pcg_iters;

  // severity records: ring buffer of the last few scores per (t, k)
  std::vector<std::vector<double>> severity_ring;  // [t*K+k][window]
  std::vector<int> severity_pos;
  std::vector<double> severity_max;
  std::vector<std::vector<int>> worst_set;  // K_t
  std::vector<std::vector<int>> stoch_set;  // S_t

  double severity(int t, int k) const {
    return severity_max[size_t(t) * ctg.size() + k];
  }
};

CtgWorkspace build_ctg_workspace(const Case& cs, const CtgConfig& cfg);

// theta_base - u_k (w_k . c); no-op islanding contingencies return base.
std::vector<double> smw_correct(const CtgWorkspace& ws,
                                const std::vector<double>& theta_base,
                                int k, const std::vector<double>& c_t);

// Directional overload score of contingency k at period t given reduced
// post-outage angles and base-case reactive flows. eps = 0 scores hard.
CtgScore score_contingency(const Case& cs, const CtgWorkspace& ws, int t,
                           int k, const std::vector<double>& theta_k,
                           const double* q_fr, const double* q_to, double eps,
                           bool want_grads);

// Gradient of a scored contingency with respect to bus injections (full bus
// space, mean-removed per the uniform slack rule) and to the branch offset
// vector b (pre-correction solve, used for the phase-shift chain).
struct CtgBackprop {
  std::vector<double> inj_grad;  // per bus, sums to ~0
  std::vector<double> b_grad;    // per branch
};
CtgBackprop backprop_contingency(const CtgWorkspace& ws, int t, int k,
                                 const std::vector<double>& overload_grad);

// One full engine pass: base pcg solves per period, SMW + score over the
// selected sets, backprop of scores above zeta into grad (loss convention),
// severity bookkeeping and worst/stochastic set update. Returns the summed
// score over everything evaluated. full_eval forces every contingency.
double ctg_iteration(const Case& cs, const FlatState& st, const FlowSet& fl,
                     CtgWorkspace& ws, const PenaltyShape& shape,
                     std::int64_t iter_index, double* grad, bool full_eval);

// Diagnostic dump: per-period worst contingency ids, their severities, and
// base-case pcg iteration counts from the last engine pass.
std::string ctg_diagnostics_json(const Case& cs, const CtgWorkspace& ws);

}  // namespace acuc
