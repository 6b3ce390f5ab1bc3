#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "pilot/error.hpp"
#include "pilot/interpret.hpp"
#include "pilot/predict.hpp"
#include "pilot/tree.hpp"

namespace py = pybind11;
using namespace pilot;

namespace {

// (name, data): data is float64 values or level strings.
using ColumnData = std::variant<std::vector<double>, std::vector<std::string>>;
using ColumnList = std::vector<std::pair<std::string, ColumnData>>;

Column categorical_from_strings(const std::string& name, const std::vector<std::string>& cells) {
  // Same level encoding as the CSV reader: first appearance order.
  RawTable raw;
  raw.header = {name};
  raw.rows.reserve(cells.size());
  for (const auto& c : cells) raw.rows.push_back({c});
  FeatureTable t = type_columns(raw, {name});
  return std::move(t.columns.at(0));
}

FeatureTable to_table(const ColumnList& cols) {
  if (cols.empty()) throw DataError("no feature columns");
  FeatureTable table;
  table.n_rows = std::visit([](const auto& v) { return v.size(); }, cols.front().second);
  for (const auto& [name, data] : cols) {
    if (const auto* nums = std::get_if<std::vector<double>>(&data)) {
      Column c;
      c.meta.name = name;
      c.values = *nums;
      table.add(std::move(c));
    } else {
      const auto& cells = std::get<std::vector<std::string>>(data);
      if (cells.size() != table.n_rows)
        throw DataError("column '" + name + "' has " + std::to_string(cells.size()) + " rows, expected " +
                        std::to_string(table.n_rows));
      if (cells.empty()) {
        Column c;
        c.meta.name = name;
        c.meta.kind = ColumnKind::Categorical;
        table.add(std::move(c));
      } else {
        table.add(categorical_from_strings(name, cells));
      }
    }
  }
  return table;
}

template <typename T>
T as(const py::handle& v, const std::string& key) {
  try {
    return v.cast<T>();
  } catch (const py::cast_error&) {
    throw ConfigError("parameter '" + key + "' has the wrong type");
  }
}

Hyperparams to_hyperparams(const py::dict& params) {
  Hyperparams hp;
  for (const auto& [k, v] : params) {
    const std::string key = py::str(k);
    if (key == "max_depth") hp.max_depth = as<int>(v, key);
    else if (key == "min_fit") hp.min_fit = as<int>(v, key);
    else if (key == "min_leaf") hp.min_leaf = as<int>(v, key);
    else if (key == "min_unique_for_lin_blin") hp.min_unique_for_lin_blin = as<int>(v, key);
    else if (key == "min_unique_per_child_for_plin") hp.min_unique_per_child_for_plin = as<int>(v, key);
    else if (key == "rss_floor_scale") hp.rss_floor_scale = as<double>(v, key);
    else if (key == "max_lin_chain") hp.max_lin_chain = as<int>(v, key);
    else if (key == "min_rel_gain_lin") hp.min_rel_gain_lin = as<double>(v, key);
    else if (key == "allowed_kinds") {
      // CON stays allowed, as on the command line.
      KindSet set({ModelKind::Con});
      for (const auto& name : as<std::vector<std::string>>(v, key)) set.insert(parse_kind(name));
      hp.allowed_kinds = set;
    } else {
      throw ConfigError("unknown parameter '" + key +
                        "' (expected max_depth, min_fit, min_leaf, allowed_kinds, min_unique_for_lin_blin, "
                        "min_unique_per_child_for_plin, rss_floor_scale, max_lin_chain, min_rel_gain_lin)");
    }
  }
  hp.validate();
  return hp;
}

using Model = std::shared_ptr<const PilotTree>;

Model fit(const ColumnList& cols, const std::vector<double>& target, const py::dict& params,
          const std::string& target_name, int threads) {
  if (target.empty()) throw DataError("target is empty");
  const Hyperparams hp = to_hyperparams(params);
  if (threads < 1) throw ConfigError("threads must be >= 1 (got " + std::to_string(threads) + ")");
  Dataset data = make_dataset(to_table(cols), target, target_name);
  BuildOptions opt;
  opt.threads = threads;
  py::gil_scoped_release nogil;
  return std::make_shared<const PilotTree>(build_tree(data, hp, opt));
}

py::array_t<double> predict(const Model& model, const ColumnList& cols) {
  const FeatureTable table = to_table(cols);
  std::vector<double> out;
  {
    py::gil_scoped_release nogil;
    out = predict_batch(*model, table);
  }
  return py::array_t<double>(static_cast<py::ssize_t>(out.size()), out.data());
}

}  // namespace

PYBIND11_MODULE(_pilot, m) {
  m.doc() = "Linear model trees (native core)";
  m.attr("__version__") = PILOT_VERSION;
  m.attr("SCHEMA_VERSION") = kSchemaVersion;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const FormatError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DataError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<PilotTree, std::shared_ptr<PilotTree>>(m, "Model")
      .def_property_readonly("feature_names",
                             [](const PilotTree& t) {
                               std::vector<std::string> names;
                               for (const auto& c : t.columns) names.push_back(c.name);
                               return names;
                             })
      .def_property_readonly("categorical",
                             [](const PilotTree& t) {
                               std::vector<bool> cat;
                               for (const auto& c : t.columns) cat.push_back(!c.is_numeric());
                               return cat;
                             })
      .def_property_readonly("target", [](const PilotTree& t) { return t.target; })
      .def_property_readonly("n_nodes", [](const PilotTree& t) { return t.nodes.size(); })
      .def_property_readonly("depth", [](const PilotTree& t) { return t.stats.max_depth; })
      .def("to_json", &model_to_json)
      .def("__str__", &render_text)
      .def("__repr__", [](const PilotTree& t) {
        return "<pilot.Model nodes=" + std::to_string(t.nodes.size()) + " depth=" +
               std::to_string(t.stats.max_depth) + ">";
      });

  m.def(
      "fit",
      [](const ColumnList& cols, const std::vector<double>& target, const py::dict& params,
         const std::string& target_name, int threads) {
        return std::const_pointer_cast<PilotTree>(fit(cols, target, params, target_name, threads));
      },
      py::arg("columns"), py::arg("target"), py::arg("params"), py::arg("target_name") = "y",
      py::arg("threads") = 1);
  m.def("predict", [](const std::shared_ptr<PilotTree>& t, const ColumnList& cols) { return predict(t, cols); },
        py::arg("model"), py::arg("columns"));
  m.def(
      "importance",
      [](const std::shared_ptr<PilotTree>& t) {
        const auto v = feature_importance(*t);
        return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
      },
      py::arg("model"));
  m.def(
      "save", [](const std::shared_ptr<PilotTree>& t, const std::string& path) { save_model(*t, path); },
      py::arg("model"), py::arg("path"));
  m.def(
      "load", [](const std::string& path) { return std::make_shared<PilotTree>(load_model(path)); },
      py::arg("path"));
}
