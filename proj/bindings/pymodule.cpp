#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fingrav/pipeline.hpp"

namespace py = pybind11;
using namespace fingrav;

namespace {

py::dict guidance_dict(const binning::GuidanceEntry& g) {
  py::dict d;
  d["exec_range_lo_ns"] = g.exec_lo;
  d["exec_range_hi_ns"] = g.exec_hi == binning::kOpenEnd ? py::object(py::none())
                                                         : py::object(py::int_(g.exec_hi));
  d["runs"] = g.runs;
  d["loi_density_ns"] = g.loi_density;
  d["margin_rel"] = g.margin_rel;
  d["extrapolated"] = g.extrapolated;
  return d;
}

py::dict fit_dict(const stitch::PolyFit& f) {
  py::dict d;
  d["degree"] = f.degree;
  d["coefficients"] = f.coefficients;
  d["rms_residual_w"] = f.rms_residual;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fingrav, m) {
  m.doc() = "Fine-grain GPU power profile reconstruction: simulator and analysis operations";

  m.def(
      "lookup_guidance",
      [](Nanos exec_time_ns) { return guidance_dict(binning::lookup_guidance(exec_time_ns)); },
      py::arg("exec_time_ns"), "Profiling guidance row for a kernel execution time.");

  m.def("compute_ssp_executions", &phase::compute_ssp_executions,
        py::arg("averaging_window_ns"), py::arg("exec_time_ns"), py::arg("sse_execs") = 4,
        "Executions per run needed for a steady-state power profile.");

  m.def("detect_warmup_count", &phase::detect_warmup_count, py::arg("exec_times_ns"),
        py::arg("eps_rel") = 0.02,
        "Number of leading executions whose time has not yet stabilized.");

  m.def(
      "calibrate_read_delay",
      [](std::vector<Nanos> samples) { return sync::calibrate_read_delay(std::move(samples)); },
      py::arg("samples_ns"), "Median of benchmarked timestamp-read latencies.");

  m.def(
      "golden_runs",
      [](const std::map<std::string, Nanos>& ssp_exec_times, double margin_rel) {
        return binning::select_golden_runs(binning::bin_runs(ssp_exec_times, margin_rel));
      },
      py::arg("ssp_exec_times_ns"), py::arg("margin_rel"),
      "Run ids in the largest execution-time bin.");

  m.def(
      "loi_deficit",
      [](const std::vector<Nanos>& tois, Nanos exec_time_ns, Nanos density_ns) {
        binning::GuidanceEntry g;
        g.loi_density = density_ns;
        std::vector<LoiSample> lois;
        lois.reserve(tois.size());
        for (Nanos t : tois) {
          LoiSample s;
          s.toi = t;
          lois.push_back(std::move(s));
        }
        return binning::loi_sufficiency(lois, exec_time_ns, g).deficit;
      },
      py::arg("tois_ns"), py::arg("exec_time_ns"), py::arg("loi_density_ns"),
      "How many LOIs are still missing at the requested TOI density.");

  m.def(
      "fit_poly",
      [](const std::vector<Nanos>& tois, const std::vector<double>& powers, Nanos anchor_ns,
         int degree) {
        if (tois.size() != powers.size())
          throw std::invalid_argument("fit_poly: tois and powers differ in length");
        stitch::StitchedProfile p;
        p.exec_time_anchor = anchor_ns;
        for (size_t i = 0; i < tois.size(); ++i) p.points.push_back({tois[i], powers[i], ""});
        return fit_dict(stitch::fit_poly(p, degree));
      },
      py::arg("tois_ns"), py::arg("powers_w"), py::arg("exec_time_anchor_ns"),
      py::arg("degree") = 4, "Least-squares polynomial over the normalized TOI domain.");

  m.def("preset_names", &pipeline::preset_names);

  m.def(
      "preset_config_json",
      [](const std::string& name) {
        return pipeline::config_to_json(pipeline::preset_config(name)).dump(2);
      },
      py::arg("name"), "Full config document for a named preset.");

  m.def(
      "run_experiment_json",
      [](const std::string& config_json) {
        auto cfg = pipeline::parse_config(nlohmann::json::parse(config_json));
        return pipeline::report_to_string(pipeline::run_experiment(cfg));
      },
      py::arg("config_json"),
      "Run the full pipeline for a config document; returns the report as json text.");
}
