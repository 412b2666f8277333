#pragma once

#include <string>
#include <vector>

#include "acuc/dense.hpp"

namespace acuc {

// Sparse linear row: a . x (= | <=) rhs
struct LinearRow {
  std::vector<std::pair<int, double>> a;
  double rhs = 0.0;
  bool eq = false;
};

// min 1/2 x'Qx + c'x subject to rows and variable bounds. Q is either the
// diagonal q_diag (possibly empty for an LP) or the dense q_dense block.
struct QpProblem {
  int n = 0;
  std::vector<double> c;
  std::vector<double> q_diag;
  DenseMat q_dense;
  std::vector<LinearRow> rows;
  std::vector<double> lo, hi;
  double tol_scale = 1.0;  // < 1 tightens the convergence tolerances

  int add_var(double lo_, double hi_, double cost = 0.0, double q = 0.0) {
    c.push_back(cost);
    q_diag.push_back(q);
    lo.push_back(lo_);
    hi.push_back(hi_);
    return n++;
  }
  void add_row(LinearRow r) { rows.push_back(std::move(r)); }
  void add_le(std::vector<std::pair<int, double>> a, double rhs) {
    rows.push_back({std::move(a), rhs, false});
  }
  void add_eq(std::vector<std::pair<int, double>> a, double rhs) {
    rows.push_back({std::move(a), rhs, true});
  }
};

using LpProblem = QpProblem;  // q terms simply unused

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kIterLimit, kNumerical };

const char* to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::kNumerical;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> row_duals;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
  std::string message;

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

// Primal-dual interior point (predictor-corrector). Diagonal-Q problems and
// LPs go through normal equations; dense-Q problems through the augmented
// KKT system.
SolveResult solve_qp(const QpProblem& p);
SolveResult solve_lp(const LpProblem& p);

// Independent feasibility/optimality audit of a candidate point.
struct KktCheck {
  double primal = 0.0;  // worst row/bound violation
  double stationarity = 0.0;
  double complementarity = 0.0;
};
KktCheck check_kkt(const QpProblem& p, const SolveResult& r);

// Text dump in LP-ish format, for debugging subproblems.
std::string dump_problem(const QpProblem& p);

}  // namespace acuc
