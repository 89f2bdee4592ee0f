#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lodgpe/config.hpp"
#include "lodgpe/errors.hpp"
#include "lodgpe/parallel.hpp"
#include "lodgpe/study.hpp"

namespace py = pybind11;
using namespace lodgpe;

namespace {

py::object opt(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict rates_dict(const FittedRates& r) {
  py::dict d;
  d["h1"] = opt(r.h1);
  d["l2"] = opt(r.l2);
  d["energy"] = opt(r.energy);
  d["eigenvalue"] = opt(r.eigenvalue);
  return d;
}

py::dict row_dict(const StudyRow& r) {
  py::dict d;
  d["H"] = r.H;
  d["ok"] = r.ok;
  d["failure"] = r.failure;
  d["err_h1"] = r.err_h1;
  d["err_l2"] = r.err_l2;
  d["err_energy"] = r.err_energy;
  d["err_eigenvalue"] = r.err_eigenvalue;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["saturated"] = r.saturated;
  d["dofs"] = r.dofs;
  d["energy"] = r.energy;
  d["eigenvalue"] = r.eigenvalue;
  d["cache"] = r.cache;
  d["wall_time"] = r.wall_time;
  return d;
}

py::list rows_list(const std::vector<StudyRow>& rows) {
  py::list l;
  for (const auto& r : rows) l.append(row_dict(r));
  return l;
}

py::array_t<double> to_numpy(const DenseVector& v) {
  py::array_t<double> a(v.size());
  std::copy(v.data(), v.data() + v.size(), a.mutable_data());
  return a;
}

py::dict solve(const std::string& text, const std::vector<std::string>& overrides) {
  const RunConfig cfg = parse_config(text, overrides);
  SolveOutcome so;
  {
    py::gil_scoped_release release;
    so = solve_ground_state(cfg.study, cfg.solve.space, cfg.solve.H);
  }
  const GroundState& gs = so.state;
  const TriMesh& m = *so.fine_mesh;
  const DenseVector nodal = to_nodal(so.fine_ops->dofs, m.num_nodes(), gs.fine_coeffs);
  DenseVector x(static_cast<Eigen::Index>(m.num_nodes())), y(x.size());
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    x[static_cast<Eigen::Index>(i)] = m.nodes[i].x;
    y[static_cast<Eigen::Index>(i)] = m.nodes[i].y;
  }
  py::dict d;
  d["space"] = to_string(cfg.solve.space);
  d["dofs"] = so.dofs;
  d["fine_dofs"] = so.fine_ops->dofs.size();
  d["energy"] = gs.energy;
  d["eigenvalue"] = gs.eigenvalue;
  d["steps"] = gs.steps_taken;
  d["converged"] = gs.converged;
  d["residual"] = gs.residual;
  d["energy_history"] = gs.energy_history;
  d["x"] = to_numpy(x);
  d["y"] = to_numpy(y);
  d["u"] = to_numpy(nodal);
  d["cache"] = so.cache ? py::cast(std::string(to_string(*so.cache))) : py::none();
  return d;
}

py::dict study(const std::string& text, const std::vector<std::string>& overrides) {
  const RunConfig cfg = parse_config(text, overrides);
  StudyResult r;
  {
    py::gil_scoped_release release;
    r = run_study(cfg.study);
  }
  py::dict ref;
  ref["energy"] = r.reference.energy;
  ref["eigenvalue"] = r.reference.eigenvalue;
  ref["fine_dofs"] = r.reference.fine_dofs;
  ref["steps"] = r.reference.steps;
  ref["converged"] = r.reference.converged;
  ref["residual"] = r.reference.residual;
  py::dict d;
  d["rows"] = rows_list(r.rows);
  d["baseline_rows"] = rows_list(r.baseline_rows);
  d["rates"] = rates_dict(r.rates);
  d["baseline_rates"] = rates_dict(r.baseline_rates);
  d["reference"] = ref;
  d["valid"] = r.valid;
  d["nested_monotone"] = r.nested_monotone;
  d["cache_hits"] = r.cache_hits;
  d["cache_misses"] = r.cache_misses;
  d["warnings"] = r.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_lodgpe, m) {
  m.doc() = "LOD ground states of the Gross-Pitaevskii equation";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("solve", &solve, py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        "Ground state for a configuration text; returns energy, eigenvalue and the nodal field.");
  m.def("study", &study, py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        "Convergence study against the reference solution.");
  m.def(
      "resolve_config",
      [](const std::string& text, const std::vector<std::string>& overrides) {
        return serialize_config(parse_config(text, overrides));
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
      "Configuration with every key spelled out.");
  m.def(
      "fit_rate", [](const std::vector<double>& hs, const std::vector<double>& errs) { return fit_rate(hs, errs); },
      py::arg("hs"), py::arg("errs"), "Least-squares log-log slope.");
  m.def("set_threads", &set_thread_count, py::arg("n"));
  m.def("thread_count", &thread_count);
}
