#pragma once

#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pilot/dataset.hpp"
#include "pilot/tree.hpp"

namespace pilot {

/// A single observation by column name. Numeric columns take doubles,
/// categorical columns take level names.
using FeatureValue = std::variant<double, std::string>;
using FeatureRecord = std::map<std::string, FeatureValue, std::less<>>;

struct TraceStep {
  std::int32_t node = -1;
  double input = 0.0;       // predictor value after range clamping (0 for CON / categorical)
  double increment = 0.0;   // model output added at this node
  double cumulative = 0.0;  // centered cumulative prediction after clipping to [-3B, 3B]
};

struct PredictionTrace {
  std::vector<TraceStep> steps;
  double centered = 0.0;    // final cumulative prediction
  double prediction = 0.0;  // centered + offset
};

/// Encodes a record into the tree's column order: numeric values as-is,
/// categorical values as training level ids (kUnseenLevel when unknown).
/// Throws DataError naming any missing column or a type mismatch.
std::vector<double> encode_record(const PilotTree& tree, const FeatureRecord& record);

/// Walks the tree with both truncations: inputs clamped into each node's
/// training range before evaluating its model, cumulative prediction clipped
/// to [-3B, 3B]. Routing compares the unclamped value with the pivot.
double predict_encoded(const PilotTree& tree, std::span<const double> encoded);
PredictionTrace trace_encoded(const PilotTree& tree, std::span<const double> encoded);

double predict_one(const PilotTree& tree, const FeatureRecord& record);
PredictionTrace trace_one(const PilotTree& tree, const FeatureRecord& record);

/// Column-aligned batch prediction. Columns are matched by name; categorical
/// levels are matched by level name. Throws DataError listing missing or
/// extra columns.
std::vector<double> predict_batch(const PilotTree& tree, const FeatureTable& table);

}  // namespace pilot
