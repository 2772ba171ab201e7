#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "robinf/analysis.hpp"
#include "robinf/error.hpp"
#include "robinf/mht.hpp"

namespace py = pybind11;

namespace {

// Set by the Python package: an exception type taking
// (code, exit_code, message, hint, indices).
py::object error_type;

[[noreturn]] void raise(const robinf::Error& e) {
  if (!error_type) throw std::runtime_error(e.what());
  PyErr_SetObject(error_type.ptr(),
                  py::make_tuple(std::string(robinf::to_string(e.code())), robinf::exit_code(e.code()),
                                 std::string(e.what()), e.hint(), e.indices())
                      .ptr());
  throw py::error_already_set();
}

// Runs the configured analysis; returns the report serialised exactly as the
// batch front end writes it.
std::string analyze(const std::string& config_json, const std::string& base_dir,
                    std::optional<std::vector<std::string>> columns,
                    std::optional<std::vector<std::vector<std::string>>> rows) {
  try {
    robinf::AnalysisConfig config;
    robinf::Json report;
    {
      py::gil_scoped_release release;
      robinf::Json doc;
      try {
        doc = robinf::Json::parse(config_json);
      } catch (const robinf::Json::exception& e) {
        throw robinf::Error(robinf::ErrorCode::ConfigError, std::string("malformed configuration: ") + e.what());
      }
      config = robinf::config_from_json(doc, base_dir);
      if (columns) {
        robinf::CsvTable table;
        table.columns = std::move(*columns);
        if (rows) table.rows = std::move(*rows);
        table.lines.resize(table.rows.size());
        for (std::size_t i = 0; i < table.lines.size(); ++i) table.lines[i] = i + 2;
        report = robinf::run_analysis(config, table);
      } else {
        report = robinf::run_analysis(config);
      }
    }
    return report.dump(2) + "\n";
  } catch (const robinf::Error& e) {
    raise(e);
  }
}

py::list adjust(const std::vector<std::string>& ids, const std::vector<double>& pvalues, const std::string& method,
                double alpha) {
  try {
    if (ids.size() != pvalues.size())
      throw robinf::Error(robinf::ErrorCode::ShapeMismatch, "ids and p-values differ in length");
    const auto parsed = robinf::parse_mht_method(method);
    if (!parsed) throw robinf::Error(robinf::ErrorCode::ConfigError, "unknown method '" + method + "'");
    robinf::PValueFamily family;
    family.alpha = alpha;
    for (std::size_t i = 0; i < ids.size(); ++i) family.hypotheses.push_back({ids[i], pvalues[i], std::nullopt});
    const auto report = robinf::adjust(family, *parsed);
    py::list out;
    for (const auto& r : report.results) {
      py::dict d;
      d["id"] = r.id;
      d["raw_p"] = r.raw_p;
      d["adjusted_p"] = r.adjusted_p;
      d["rejected"] = r.rejected;
      out.append(d);
    }
    return out;
  } catch (const robinf::Error& e) {
    raise(e);
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = robinf::kVersion;
  m.def("_set_error_type", [](py::object type) { error_type = std::move(type); });
  m.def("analyze", &analyze, py::arg("config_json"), py::arg("base_dir") = std::string(),
        py::arg("columns") = py::none(), py::arg("rows") = py::none());
  m.def("adjust", &adjust, py::arg("ids"), py::arg("pvalues"), py::arg("method"), py::arg("alpha") = 0.05);
}
