#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pilot/tree.hpp"

namespace pilot {

inline constexpr int kSchemaVersion = 1;

/// Normalized impurity-gain importance per predictor (tree column order).
/// Each non-CON node adds w(T) * gain(T) to its predictor. All zeros for a
/// tree without any non-CON node.
std::vector<double> feature_importance(const PilotTree& tree);

/// Indented one-line-per-node description of the tree.
std::string render_text(const PilotTree& tree);

/// JSON model document. Doubles are written in shortest round-trip form, so
/// a loaded model predicts bit-identically to the saved one.
std::string model_to_json(const PilotTree& tree);
/// Throws FormatError with the JSON path (or byte offset) of the problem.
PilotTree model_from_json(const std::string& text);

void save_model(const PilotTree& tree, const std::filesystem::path& path);
PilotTree load_model(const std::filesystem::path& path);

}  // namespace pilot
