#include "pilot/predict.hpp"

#include <algorithm>
#include <cmath>

#include "pilot/error.hpp"

namespace pilot {

namespace {

bool routes_left(const TreeNode& node, double value) {
  const NodeFit& fit = node.fit;
  if (fit.is_numeric_pivot()) return value <= fit.threshold();
  const auto level = static_cast<LevelId>(value);
  if (level == kUnseenLevel) return fit.n_left >= fit.n_right;
  const LevelSet& set = fit.level_set();
  return std::binary_search(set.begin(), set.end(), level);
}

template <typename OnStep>
double walk(const PilotTree& tree, std::span<const double> encoded, OnStep&& on_step) {
  if (encoded.size() != tree.columns.size())
    throw DataError("record has " + std::to_string(encoded.size()) + " values, model expects " +
                    std::to_string(tree.columns.size()));
  const double bound = tree.bound_B;
  double pred = 0.0;
  std::int32_t id = tree.nodes.empty() ? -1 : 0;
  while (id >= 0) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    const NodeFit& fit = node.fit;
    std::int32_t next = -1;
    LinearPiece piece = fit.left;
    double input = 0.0;
    bool numeric = false;
    if (fit.kind != ModelKind::Con) {
      const double raw = encoded[static_cast<std::size_t>(fit.predictor)];
      numeric = tree.columns[static_cast<std::size_t>(fit.predictor)].is_numeric();
      if (fit.kind == ModelKind::Lin) {
        next = node.left;
      } else if (routes_left(node, raw)) {
        next = node.left;
      } else {
        piece = *fit.right;
        next = node.right;
      }
      if (numeric) input = std::min(std::max(raw, node.x_min), node.x_max);
    }
    const double inc = numeric ? piece(input) : piece.intercept;
    pred = truncate_cumulative(pred + inc, bound);
    on_step(TraceStep{id, input, inc, pred});
    id = next;
  }
  return pred;
}

}  // namespace

std::vector<double> encode_record(const PilotTree& tree, const FeatureRecord& record) {
  std::vector<double> out(tree.columns.size());
  std::vector<std::string> missing;
  for (std::size_t j = 0; j < tree.columns.size(); ++j) {
    const ColumnMeta& meta = tree.columns[j];
    const auto it = record.find(meta.name);
    if (it == record.end()) {
      missing.push_back(meta.name);
      continue;
    }
    if (meta.is_numeric()) {
      const double* v = std::get_if<double>(&it->second);
      if (!v) throw DataError("column '" + meta.name + "' is numeric but got a string");
      if (!std::isfinite(*v)) throw DataError("column '" + meta.name + "' has a non-finite value");
      out[j] = *v;
    } else {
      const std::string* s = std::get_if<std::string>(&it->second);
      if (!s) throw DataError("column '" + meta.name + "' is categorical but got a number");
      out[j] = meta.find_level(*s);
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing feature(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw DataError(msg);
  }
  return out;
}

double predict_encoded(const PilotTree& tree, std::span<const double> encoded) {
  return walk(tree, encoded, [](const TraceStep&) {}) + tree.offset;
}

PredictionTrace trace_encoded(const PilotTree& tree, std::span<const double> encoded) {
  PredictionTrace trace;
  trace.centered = walk(tree, encoded, [&](const TraceStep& s) { trace.steps.push_back(s); });
  trace.prediction = trace.centered + tree.offset;
  return trace;
}

double predict_one(const PilotTree& tree, const FeatureRecord& record) {
  return predict_encoded(tree, encode_record(tree, record));
}

PredictionTrace trace_one(const PilotTree& tree, const FeatureRecord& record) {
  return trace_encoded(tree, encode_record(tree, record));
}

std::vector<double> predict_batch(const PilotTree& tree, const FeatureTable& table) {
  const std::size_t p = tree.columns.size();
  std::vector<int> source(p, -1);
  std::vector<std::string> missing, extra;
  for (std::size_t j = 0; j < p; ++j) {
    source[j] = table.find(tree.columns[j].name);
    if (source[j] < 0) missing.push_back(tree.columns[j].name);
  }
  for (const auto& col : table.columns) {
    const bool known = std::any_of(tree.columns.begin(), tree.columns.end(),
                                   [&](const ColumnMeta& m) { return m.name == col.meta.name; });
    if (!known) extra.push_back(col.meta.name);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "column mismatch with model:";
    if (!missing.empty()) {
      msg += " missing";
      for (const auto& m : missing) msg += " '" + m + "'";
    }
    if (!extra.empty()) {
      msg += missing.empty() ? " extra" : "; extra";
      for (const auto& e : extra) msg += " '" + e + "'";
    }
    throw DataError(msg);
  }

  // Per-column level translation from the table's ids to training ids.
  std::vector<std::vector<LevelId>> remap(p);
  for (std::size_t j = 0; j < p; ++j) {
    const ColumnMeta& want = tree.columns[j];
    const Column& have = table.columns[static_cast<std::size_t>(source[j])];
    if (want.is_numeric() != have.meta.is_numeric())
      throw DataError("column '" + want.name + "' must be " + (want.is_numeric() ? "numeric" : "categorical"));
    if (!want.is_numeric())
      for (const auto& level : have.meta.levels) remap[j].push_back(want.find_level(level));
  }

  std::vector<double> out(table.n_rows);
  std::vector<double> row(p);
  for (std::size_t i = 0; i < table.n_rows; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const Column& col = table.columns[static_cast<std::size_t>(source[j])];
      if (col.meta.is_numeric()) {
        row[j] = col.values[i];
      } else {
        const LevelId code = col.codes[i];
        row[j] = (code >= 0 && static_cast<std::size_t>(code) < remap[j].size()) ? remap[j][code] : kUnseenLevel;
      }
    }
    out[i] = predict_encoded(tree, row);
  }
  return out;
}

}  // namespace pilot
