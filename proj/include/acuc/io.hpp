#pragma once

#include <string>

#include "acuc/case.hpp"

namespace acuc {

Case load_case(const std::string& path);
void save_case(const Case& cs, const std::string& path);
Case case_from_json_text(const std::string& text);
std::string case_to_json_text(const Case& cs);

// Solution files carry one per-period array per basis family.
struct Solution {
  StateLayout layout;
  std::vector<double> x;

  static Solution from_state(const FlatState& st) {
    return Solution{st.layout, st.x};
  }
  double get(VarFamily f, int t, int i) const { return x[layout.at(f, t, i)]; }
};

Solution load_solution(const Case& cs, const std::string& path);
void save_solution(const Case& cs, const Solution& sol, const std::string& path);
std::string solution_to_json_text(const Case& cs, const Solution& sol);
Solution solution_from_json_text(const Case& cs, const std::string& text);

}  // namespace acuc
