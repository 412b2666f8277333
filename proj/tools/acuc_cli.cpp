#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "acuc/checker.hpp"
#include "acuc/generator.hpp"
#include "acuc/io.hpp"
#include "acuc/parallel.hpp"
#include "acuc/pipeline.hpp"

using namespace acuc;

int main(int argc, char** argv) {
  CLI::App app{"reserve- and security-constrained AC unit commitment solver"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic case");
  int gen_buses = 14, gen_periods = 4;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "case.json";
  gen->add_option("--buses", gen_buses, "bus count (>= 2)");
  gen->add_option("--periods", gen_periods, "period count (>= 1)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output case file");

  auto* solve = app.add_subcommand("solve", "solve a case");
  std::string solve_case, solve_out = "solution.json";
  std::string solve_trace, solve_timing;
  double solve_budget = 60.0;
  std::uint64_t solve_seed = 1;
  int solve_workers = 0;
  double solve_rate = 0.0;
  solve->add_option("--case", solve_case, "case file")->required();
  solve->add_option("--budget", solve_budget, "wall-clock budget, seconds");
  solve->add_option("--seed", solve_seed, "run seed");
  solve->add_option("--out", solve_out, "output solution file");
  solve->add_option("--workers", solve_workers, "worker threads (0 = current)");
  solve->add_option("--trace", solve_trace, "write iteration trace CSV here");
  solve->add_option("--timing", solve_timing, "write stage timing JSON here");
  std::string solve_ctg_diag;
  solve->add_option("--ctg-diag", solve_ctg_diag,
                    "write contingency engine diagnostics JSON here");
  solve->add_option("--rate", solve_rate,
                    "iterations per budget-second (0 = auto)");

  auto* check = app.add_subcommand("check", "list hard violations of a solution");
  auto* score = app.add_subcommand("score", "score a solution");
  std::string in_case, in_sol;
  double score_zed = std::numeric_limits<double>::quiet_NaN();
  for (auto* sub : {check, score}) {
    sub->add_option("--case", in_case, "case file")->required();
    sub->add_option("--solution", in_sol, "solution file")->required();
  }
  score->add_option("--z-ed", score_zed, "dispatch bound for the gap row");

  auto* tplot = app.add_subcommand("trace-plot", "render a trace CSV as SVG");
  std::string tp_in, tp_out = "trace.svg";
  tplot->add_option("--trace", tp_in, "trace CSV")->required();
  tplot->add_option("--out", tp_out, "output SVG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      Case cs = generate_synthetic_case(gen_buses, gen_periods, gen_seed);
      save_case(cs, gen_out);
      std::cout << "wrote " << gen_out << " (" << cs.buses.size() << " buses, "
                << cs.branches.size() << " branches, " << cs.devices.size()
                << " devices, " << cs.contingencies.size()
                << " contingencies, T=" << cs.time.periods() << ")\n";
      return 0;
    }
    if (solve->parsed()) {
      Case cs = load_case(solve_case);
      PipelineConfig cfg;
      cfg.budget_s = solve_budget;
      cfg.seed = solve_seed;
      cfg.workers = solve_workers;
      cfg.nominal_rate = solve_rate;
      PipelineResult res = run_pipeline(cs, cfg);
      save_solution(cs, res.solution, solve_out);
      if (!solve_trace.empty()) res.trace.to_csv(solve_trace);
      if (!solve_timing.empty()) {
        std::ofstream tn(solve_timing);
        tn << res.timing_json();
      }
      if (!solve_ctg_diag.empty()) {
        std::ofstream cd(solve_ctg_diag);
        cd << res.ctg_diagnostics;
      }
      std::cout << "z_ms " << res.report.z_ms << "  z_ed " << res.z_ed
                << "  gap " << res.report.gap_percent << "%  violations "
                << res.report.violations.size()
                << (res.fallback_used ? "  [fallback]" : "") << "\n";
      return res.report.feasible() ? 0 : 1;
    }
    if (check->parsed()) {
      Case cs = load_case(in_case);
      Solution sol = load_solution(cs, in_sol);
      std::vector<Violation> v = check_feasibility(cs, sol);
      for (const Violation& x : v)
        std::cout << x.constraint << " " << x.entity << " t=" << x.t
                  << " magnitude=" << x.magnitude << "\n";
      std::cout << (v.empty() ? "feasible" : "infeasible") << " (" << v.size()
                << " violations)\n";
      return v.empty() ? 0 : 1;
    }
    if (score->parsed()) {
      Case cs = load_case(in_case);
      Solution sol = load_solution(cs, in_sol);
      SolutionReport rep = score_solution(cs, sol, score_zed);
      std::cout << rep.to_json();
      return rep.feasible() ? 0 : 1;
    }
    if (tplot->parsed()) {
      write_trace_svg(tp_in, tp_out);
      std::cout << "wrote " << tp_out << "\n";
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
