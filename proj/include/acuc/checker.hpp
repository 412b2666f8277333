#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "acuc/case.hpp"
#include "acuc/io.hpp"
#include "acuc/surplus.hpp"

namespace acuc {

struct Violation {
  std::string constraint;
  std::string entity;
  int t = 0;
  double magnitude = 0.0;
};

// Recomputed from (case, solution file) alone with hard (eps = 0) forms and
// dense per-contingency solves; shares no numerical path with the solver's
// contingency engine.
struct SolutionReport {
  SurplusTerms terms;
  double z_ms = 0.0;
  double z_ctg_min = 0.0;  // single worst contingency's total penalty
  double z_ctg_avg = 0.0;  // mean over contingencies
  std::vector<Violation> violations;
  double z_ed = std::numeric_limits<double>::quiet_NaN();
  double gap_percent = std::numeric_limits<double>::quiet_NaN();

  bool feasible() const { return violations.empty(); }
  std::string to_json() const;
};

SolutionReport score_solution(
    const Case& cs, const Solution& sol,
    double z_ed = std::numeric_limits<double>::quiet_NaN());

std::vector<Violation> check_feasibility(const Case& cs, const Solution& sol);

}  // namespace acuc
