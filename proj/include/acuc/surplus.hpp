#pragma once

#include <span>
#include <vector>

#include "acuc/case.hpp"

namespace acuc {

// Softening/penalty knobs driven by the homotopy schedules.
// eps == 0 selects the hard (exact-score) forms.
struct PenaltyShape {
  double eps = 1e-2;        // soft-abs / soft-ReLU softening
  double beta_scale = 1.0;  // balance-penalty magnitude scale in [0.1, 1]
  double rho = 100.0;       // penalized-constraint weight

  static PenaltyShape hard() { return PenaltyShape{0.0, 1.0, 0.0}; }
};

// Branch flows and bus mismatch sums, recomputed from a state (no caching
// across state mutations). Mismatches are consumption-positive.
struct FlowSet {
  int T = 0, n_branch = 0, n_bus = 0;
  std::vector<double> p_fr, q_fr, p_to, q_to;  // [t * n_branch + j]
  std::vector<double> p_bus, q_bus;            // [t * n_bus + i]

  void resize(int T_, int n_branch_, int n_bus_) {
    T = T_;
    n_branch = n_branch_;
    n_bus = n_bus_;
    p_fr.assign(size_t(T) * n_branch, 0.0);
    q_fr.assign(size_t(T) * n_branch, 0.0);
    p_to.assign(size_t(T) * n_branch, 0.0);
    q_to.assign(size_t(T) * n_branch, 0.0);
    p_bus.assign(size_t(T) * n_bus, 0.0);
    q_bus.assign(size_t(T) * n_bus, 0.0);
  }
};

// pi-model flows of one branch at one period, with all partials needed for
// backpropagation. delta = theta_fr - theta_to - phi.
struct BranchEval {
  double p_fr, q_fr, p_to, q_to;
  double dpfr_dvf, dpfr_dvt, dpfr_dd, dpfr_dtau;
  double dqfr_dvf, dqfr_dvt, dqfr_dd, dqfr_dtau;
  double dpto_dvf, dpto_dvt, dpto_dd, dpto_dtau;
  double dqto_dvf, dqto_dvt, dqto_dd, dqto_dtau;
};

BranchEval eval_branch(const Branch& br, double v_fr, double v_to,
                       double theta_fr, double theta_to, double phi,
                       double tau);

// Fills the t-slice of flows from the state.
void eval_branch_flows(const Case& cs, const FlatState& st, int t, FlowSet& fl);
FlowSet eval_flows(const Case& cs, const FlatState& st);

// Piecewise-linear energy cost over cumulative blocks. dzdp is the marginal
// of the active block (left-derivative at knots). `exceeded` flags p beyond
// the total block capacity, where the cost clips flat and the marginal is 0.
struct EnergyCost {
  double z = 0.0;
  double dzdp = 0.0;
  bool exceeded = false;
};
EnergyCost energy_cost(double p, std::span<const CostBlock> blocks, double d_t);

// Directional overload of one branch side pair; penalty on the worse side.
struct OverloadEval {
  double z = 0.0;
  double dp_fr = 0.0, dq_fr = 0.0, dp_to = 0.0, dq_to = 0.0;
};
OverloadEval line_overload_penalty(double p_fr, double q_fr, double p_to,
                                   double q_to, double s_max, double d_t,
                                   double c_s, double eps);

double power_balance_penalty(double mismatch, double d_t, double c,
                             const PenaltyShape& shape, double* grad);

struct SurplusTerms {
  double en_cost = 0.0;    // producer energy cost
  double en_value = 0.0;   // consumer energy value
  double on_cost = 0.0;
  double su_cost = 0.0;
  double sd_cost = 0.0;
  double ac_overload = 0.0;   // plain lines
  double xfm_overload = 0.0;  // transformers
  double p_balance = 0.0;
  double q_balance = 0.0;
  double reserve_device = 0.0;
  double reserve_zonal = 0.0;
  double penalized_linear = 0.0;
  double ctg = 0.0;  // filled by the contingency engine
  bool block_capacity_exceeded = false;

  double market_surplus() const {
    return en_value - en_cost - on_cost - su_cost - sd_cost - ac_overload -
           xfm_overload - p_balance - q_balance - reserve_device -
           reserve_zonal - penalized_linear - ctg;
  }
  // minimized objective
  double loss() const { return -market_surplus(); }
};

// All terms except ctg. Deterministic for a fixed (state, shape) and any
// worker count.
SurplusTerms eval_market_surplus(const Case& cs, const FlatState& st,
                                 const PenaltyShape& shape);

// Gradient of loss() (= -market surplus) for every basis entry, written into
// grad (resized and zeroed here). Also returns the evaluated terms.
SurplusTerms backprop_market_surplus(const Case& cs, const FlatState& st,
                                     const PenaltyShape& shape,
                                     std::vector<double>& grad);

// Number of soft constraint rows per device per period (ramp pair, headroom
// pair, offline caps, reactive pair).
constexpr int kRowsPerDeviceTime = 9;

// Penalized-row values for one device at one period, oriented so feasible
// points give row <= 0. w_prev is the previous-period dispatched power.
void device_rows(const Device& dev, double u, double p_on, double q,
                 const double* reserves, double w_prev,
                 double out_rows[kRowsPerDeviceTime]);

}  // namespace acuc
