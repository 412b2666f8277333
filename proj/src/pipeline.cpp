#include "acuc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "acuc/parallel.hpp"
#include "json.hpp"

namespace acuc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double auto_rate(const Case& cs) {
  // rough per-iteration work units, calibrated on the test host
  double nb = double(cs.buses.size());
  double nbr = double(cs.branches.size());
  double nd = double(cs.devices.size());
  double nk = double(cs.contingencies.size());
  double T = double(cs.time.periods());
  double work = T * (4.0 * nb + 14.0 * nbr + 24.0 * nd +
                     0.25 * nk * (nb + nbr) + 40.0);
  return std::max(20.0, 2.2e6 / work);
}

struct SnapshotScore {
  Solution sol;
  double z_ms = -kInf;
  bool valid = false;
};

// Fully projected, feasibility-certified copy of the current state: every
// device projected integral, shunts snapped, ramp-constrained flow, reserve
// cleanup.
SnapshotScore make_snapshot(const Case& cs, const FlatState& st,
                            const PipelineConfig& cfg, double z_ed) {
  FlatState s = st;
  const int T = s.layout.T;
  const int nd = static_cast<int>(cs.devices.size());
  std::vector<int> no_freeze(T, -1);
  std::vector<std::vector<int>> frozen(nd, no_freeze);
  bool ok = true;
  parallel_for(nd, [&](int lo, int hi) {
    for (int d = lo; d < hi; ++d) {
      DeviceSolution ds = project_device(cs, d, s, frozen[d]);
      if (ds.status != SolveStatus::kOptimal) ok = false;
    }
  });
  SnapshotScore snap;
  if (!ok) return snap;
  snap_shunts(cs, s);
  FreezeGroups groups = assign_freeze_groups(cs, cfg.seed);
  FlatState entering = s;
  parallel_for(T, [&](int lo, int hi) {
    for (int t = lo; t < hi; ++t)
      ramp_constrained_pf(cs, s, entering, groups, t, cfg.proj);
  });
  parallel_for(T, [&](int lo, int hi) {
    for (int t = lo; t < hi; ++t) reserve_cleanup(cs, s, t);
  });
  Solution sol = Solution::from_state(s);
  SolutionReport rep = score_solution(cs, sol, z_ed);
  if (!rep.feasible()) return snap;
  snap.sol = std::move(sol);
  snap.z_ms = rep.z_ms;
  snap.valid = true;
  return snap;
}

}  // namespace

int fix_binaries_round(const std::vector<double>& relaxed,
                       const std::vector<double>& projected, int T,
                       std::vector<std::vector<int>>& frozen, int n_plus) {
  struct Entry {
    double dist;
    int d, t;
  };
  const int nd = static_cast<int>(frozen.size());
  std::vector<Entry> entries;
  for (int d = 0; d < nd; ++d)
    for (int t = 0; t < T; ++t) {
      if (frozen[d][t] >= 0) continue;
      entries.push_back(
          {std::abs(relaxed[d * T + t] - projected[d * T + t]), d, t});
    }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.d != b.d) return a.d < b.d;
    return a.t < b.t;
  });
  int fixed = 0;
  for (const Entry& e : entries) {
    if (fixed >= n_plus) break;
    frozen[e.d][e.t] = int(std::round(projected[e.d * T + e.t]));
    ++fixed;
  }
  return fixed;
}

void snap_shunts(const Case& cs, FlatState& st) {
  const StateLayout& ly = st.layout;
  for (int t = 0; t < ly.T; ++t)
    for (size_t s = 0; s < cs.shunts.size(); ++s) {
      int i = ly.at(kUSh, t, int(s));
      // round half up, clip into the step range
      double snapped = std::floor(st.x[i] + 0.5);
      st.x[i] = clip(snapped, st.lo[i], st.hi[i]);
      st.frozen[i] = 1;
    }
}

std::string PipelineResult::timing_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const StageTiming& s : timings)
    j.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  return j.dump(2) + "\n";
}

PipelineResult run_pipeline(const Case& cs, const PipelineConfig& cfg) {
  const auto t_start = Clock::now();
  if (cfg.workers > 0) set_workers(cfg.workers);
  PipelineResult out;
  const int T = cs.time.periods();
  const int nd = static_cast<int>(cs.devices.size());
  const double B = cfg.budget_s;
  const double deadline = cfg.guard_factor * B;
  auto stage = [&](const std::string& name, auto&& fn) {
    auto t0 = Clock::now();
    fn();
    out.timings.push_back({name, seconds_since(t0)});
  };

  FlatState st = init_state(cs);
  CtgWorkspace ws;
  stage("setup", [&] {
    CtgConfig ctg_cfg = cfg.ctg;
    ctg_cfg.seed = cfg.seed;
    ws = build_ctg_workspace(cs, ctg_cfg);
  });
  stage("economic_dispatch", [&] {
    EdResult ed = economic_dispatch(cs, st, cfg.proj);
    out.z_ed = ed.z_ed;
  });

  // always-feasible baseline (device projection + ramp flow + cleanup)
  SnapshotScore best;
  stage("baseline_snapshot",
        [&] { best = make_snapshot(cs, st, cfg, out.z_ed); });

  AdamLoopConfig loop_cfg;
  loop_cfg.adam = cfg.adam;
  loop_cfg.homotopy = cfg.homotopy;
  loop_cfg.t0 = 0.0;
  loop_cfg.tf = B;
  loop_cfg.trace_stride = cfg.trace_stride;
  const double rate = cfg.nominal_rate > 0 ? cfg.nominal_rate : auto_rate(cs);

  // binary-fixing rounds
  std::vector<std::vector<int>> frozen(nd, std::vector<int>(T, -1));
  const int n_b = nd * T;
  int n_fixed = 0;
  const int rounds = static_cast<int>(cfg.round_fracs.size());
  const double rounds_window = cfg.frac_rounds * B;
  const double round_len = rounds_window / std::max(1, rounds);
  try {
  for (int r = 0; r < rounds && n_fixed < n_b; ++r) {
    const std::string tag = "round" + std::to_string(r + 1);
    if (seconds_since(t_start) > deadline) {
      out.guard_tripped = true;
      break;
    }
    stage(tag + ":linpf", [&] {
      parallel_for(T, [&](int lo, int hi) {
        for (int t = lo; t < hi; ++t) linearized_power_flow(cs, st, t, cfg.proj);
      });
    });
    stage(tag + ":reserve", [&] {
      parallel_for(T, [&](int lo, int hi) {
        for (int t = lo; t < hi; ++t) reserve_cleanup(cs, st, t);
      });
    });
    const double w0 = cfg.frac_setup * B + r * round_len;
    const double w1 = w0 + round_len;
    stage(tag + ":adam", [&] {
      int iters = std::max(1, int(rate * round_len));
      double slice_deadline = deadline - seconds_since(t_start);
      AdamLoopResult ar = run_adam_loop(cs, st, &ws, loop_cfg, w0, w1, iters,
                                        &out.trace, slice_deadline);
      out.guard_tripped |= ar.deadline_tripped;
    });
    // project devices, then fix the binaries closest to their relaxation
    std::vector<double> relaxed(nd * T), projected(nd * T);
    for (int d = 0; d < nd; ++d)
      for (int t = 0; t < T; ++t) relaxed[d * T + t] = st.get(kUOn, t, d);
    FlatState proj_state = st;
    bool proj_ok = true;
    stage(tag + ":project", [&] {
      parallel_for(nd, [&](int lo, int hi) {
        for (int d = lo; d < hi; ++d) {
          DeviceSolution ds = project_device(cs, d, proj_state, frozen[d]);
          if (ds.status != SolveStatus::kOptimal) proj_ok = false;
        }
      });
    });
    if (!proj_ok) {
      out.fallback_used = true;
      break;
    }
    for (int d = 0; d < nd; ++d)
      for (int t = 0; t < T; ++t)
        projected[d * T + t] = proj_state.get(kUOn, t, d);
    int remaining = n_b - n_fixed;
    int n_plus = r + 1 == rounds
                     ? remaining
                     : std::max(1, int(std::ceil(cfg.round_fracs[r] * remaining)));
    n_fixed += fix_binaries_round(relaxed, projected, T, frozen, n_plus);
    // pin the newly fixed binaries in the relaxed state
    for (int d = 0; d < nd; ++d)
      for (int t = 0; t < T; ++t)
        if (frozen[d][t] >= 0) {
          int i = st.layout.at(kUOn, t, d);
          st.x[i] = double(frozen[d][t]);
          st.frozen[i] = 1;
        }
    stage(tag + ":snapshot", [&] {
      SnapshotScore snap = make_snapshot(cs, st, cfg, out.z_ed);
      if (snap.valid && snap.z_ms > best.z_ms) best = snap;
    });
  }
  // any stragglers (guard trips) get pinned to their projected baseline
  if (n_fixed < n_b) {
    FlatState proj_state = st;
    parallel_for(nd, [&](int lo, int hi) {
      for (int d = lo; d < hi; ++d) project_device(cs, d, proj_state, frozen[d]);
    });
    for (int d = 0; d < nd; ++d)
      for (int t = 0; t < T; ++t)
        if (frozen[d][t] < 0) {
          int i = st.layout.at(kUOn, t, d);
          st.x[i] = std::round(proj_state.get(kUOn, t, d));
          st.frozen[i] = 1;
        }
  }

  snap_shunts(cs, st);
  if (seconds_since(t_start) <= deadline) {
    stage("final:linpf", [&] {
      parallel_for(T, [&](int lo, int hi) {
        for (int t = lo; t < hi; ++t) linearized_power_flow(cs, st, t, cfg.proj);
      });
    });
    stage("final:reserve", [&] {
      parallel_for(T, [&](int lo, int hi) {
        for (int t = lo; t < hi; ++t) reserve_cleanup(cs, st, t);
      });
    });
    stage("final:adam", [&] {
      const double w0 = (cfg.frac_setup + cfg.frac_rounds) * B;
      const double w1 = 0.97 * B;
      int iters = std::max(1, int(rate * (w1 - w0)));
      double slice_deadline = deadline - seconds_since(t_start);
      AdamLoopResult ar = run_adam_loop(cs, st, &ws, loop_cfg, w0, w1, iters,
                                        &out.trace, slice_deadline);
      out.guard_tripped |= ar.deadline_tripped;
    });
  } else {
    out.guard_tripped = true;
  }

  // final feasibility-producing sequence
  stage("final:project", [&] {
    parallel_for(nd, [&](int lo, int hi) {
      for (int d = lo; d < hi; ++d) project_device(cs, d, st, frozen[d]);
    });
  });
  stage("final:ramp_pf", [&] {
    FreezeGroups groups = assign_freeze_groups(cs, cfg.seed);
    FlatState entering = st;
    parallel_for(T, [&](int lo, int hi) {
      for (int t = lo; t < hi; ++t)
        ramp_constrained_pf(cs, st, entering, groups, t, cfg.proj);
    });
  });
  stage("final:cleanup", [&] {
    parallel_for(T, [&](int lo, int hi) {
      for (int t = lo; t < hi; ++t) reserve_cleanup(cs, st, t);
    });
  });
  } catch (const SolverError& e) {
    // a failed stage falls back to the last feasibility-certified snapshot
    std::cerr << "warning: stage failure (" << e.what()
              << "), falling back to the last feasible snapshot\n";
    out.fallback_used = true;
  }

  Solution sol = Solution::from_state(st);
  SolutionReport rep = score_solution(cs, sol, out.z_ed);
  // keep the better of the final sequence and the best feasible snapshot
  if (best.valid && (!rep.feasible() || best.z_ms > rep.z_ms)) {
    out.fallback_used = !rep.feasible();
    sol = best.sol;
    rep = score_solution(cs, sol, out.z_ed);
  }
  out.ctg_diagnostics = ctg_diagnostics_json(cs, ws);
  out.state = std::move(st);
  out.solution = std::move(sol);
  out.report = std::move(rep);
  return out;
}

void write_trace_svg(const std::string& csv_path, const std::string& out_path) {
  std::ifstream in(csv_path);
  if (!in) throw ParseError("cannot open trace file: " + csv_path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> iters, z;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::atof(cell.c_str()));
    if (cells.size() >= 3) {
      iters.push_back(cells[0]);
      z.push_back(cells[2]);
    }
  }
  if (iters.empty()) throw ParseError("trace file has no rows: " + csv_path);
  const double W = 720, H = 420, ml = 70, mr = 20, mt = 20, mb = 50;
  double xmin = iters.front(), xmax = std::max(iters.back(), xmin + 1);
  double zmin = z[0], zmax = z[0];
  for (double v : z) {
    zmin = std::min(zmin, v);
    zmax = std::max(zmax, v);
  }
  if (zmax == zmin) zmax = zmin + 1;
  auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto Y = [&](double v) {
    return H - mb - (v - zmin) / (zmax - zmin) * (H - mt - mb);
  };
  std::ofstream out(out_path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"#1953a0\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < iters.size(); ++i)
    out << X(iters[i]) << "," << Y(z[i]) << " ";
  out << "\"/>\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"12\">iteration</text>",
                0.5 * W, H - 15.0);
  out << buf;
  std::snprintf(
      buf, sizeof(buf),
      "<text x=\"15\" y=\"%g\" font-size=\"12\" transform=\"rotate(-90 15 %g)\">"
      "market surplus</text>",
      0.6 * H, 0.6 * H);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"10\">%.4g</text>", 5.0,
                Y(zmax) + 4, zmax);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"10\">%.4g</text>", 5.0,
                Y(zmin) + 4, zmin);
  out << buf;
  out << "</svg>\n";
}

}  // namespace acuc
