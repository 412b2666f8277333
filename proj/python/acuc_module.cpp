#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "acuc/adam.hpp"
#include "acuc/checker.hpp"
#include "acuc/generator.hpp"
#include "acuc/io.hpp"
#include "acuc/parallel.hpp"
#include "acuc/pipeline.hpp"

namespace py = pybind11;
using namespace acuc;

namespace {

py::dict report_to_dict(const SolutionReport& rep) {
  py::dict d;
  d["z_ms"] = rep.z_ms;
  d["z_ctg_min"] = rep.z_ctg_min;
  d["z_ctg_avg"] = rep.z_ctg_avg;
  d["feasible"] = rep.feasible();
  d["gap_percent"] = rep.gap_percent;
  py::list viols;
  for (const Violation& v : rep.violations) {
    py::dict vd;
    vd["constraint"] = v.constraint;
    vd["entity"] = v.entity;
    vd["t"] = v.t;
    vd["magnitude"] = v.magnitude;
    viols.append(vd);
  }
  d["violations"] = viols;
  d["json"] = rep.to_json();
  return d;
}

}  // namespace

PYBIND11_MODULE(_acuc, m) {
  m.doc() = "AC unit commitment solver core";

  py::class_<Case>(m, "Case")
      .def_property_readonly("id", [](const Case& c) { return c.id; })
      .def_property_readonly("n_bus",
                             [](const Case& c) { return c.buses.size(); })
      .def_property_readonly("n_branch",
                             [](const Case& c) { return c.branches.size(); })
      .def_property_readonly("n_device",
                             [](const Case& c) { return c.devices.size(); })
      .def_property_readonly(
          "n_contingency", [](const Case& c) { return c.contingencies.size(); })
      .def_property_readonly("periods",
                             [](const Case& c) { return c.time.periods(); });

  py::class_<Solution>(m, "Solution")
      .def("value", [](const Solution& s, const std::string& family, int t,
                       int i) {
        for (int f = 0; f < kNumVarFamilies; ++f)
          if (family == kVarFamilyNames[f])
            return s.get(static_cast<VarFamily>(f), t, i);
        throw std::invalid_argument("unknown family: " + family);
      });

  m.def("set_workers", &set_workers, py::arg("n"));
  m.def("generate_case", &generate_synthetic_case, py::arg("n_bus"),
        py::arg("periods"), py::arg("seed"));
  m.def("load_case", &load_case, py::arg("path"));
  m.def("save_case", &save_case, py::arg("case"), py::arg("path"));
  m.def("load_solution", &load_solution, py::arg("case"), py::arg("path"));
  m.def("save_solution", &save_solution, py::arg("case"), py::arg("solution"),
        py::arg("path"));

  m.def("schedule_step_size", &schedule_step_size, py::arg("t_w"),
        py::arg("t0"), py::arg("tf"), py::arg("alpha0"), py::arg("alphaf"));

  m.def(
      "solve",
      [](const Case& cs, double budget, std::uint64_t seed, int workers) {
        PipelineConfig cfg;
        cfg.budget_s = budget;
        cfg.seed = seed;
        cfg.workers = workers;
        PipelineResult res = run_pipeline(cs, cfg);
        py::dict d;
        d["solution"] = res.solution;
        d["z_ed"] = res.z_ed;
        d["report"] = report_to_dict(res.report);
        return d;
      },
      py::arg("case"), py::arg("budget") = 10.0, py::arg("seed") = 1,
      py::arg("workers") = 0);

  m.def(
      "score",
      [](const Case& cs, const Solution& sol, double z_ed) {
        return report_to_dict(score_solution(cs, sol, z_ed));
      },
      py::arg("case"), py::arg("solution"),
      py::arg("z_ed") = std::numeric_limits<double>::quiet_NaN());

  m.def("check", [](const Case& cs, const Solution& sol) {
    py::list out;
    for (const Violation& v : check_feasibility(cs, sol)) {
      py::dict vd;
      vd["constraint"] = v.constraint;
      vd["entity"] = v.entity;
      vd["t"] = v.t;
      vd["magnitude"] = v.magnitude;
      out.append(vd);
    }
    return out;
  });

  m.def("market_surplus", [](const Case& cs, const Solution& sol) {
    return score_solution(cs, sol).z_ms;
  });
}
