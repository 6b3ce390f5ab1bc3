#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pilot/dataset.hpp"
#include "pilot/model_scan.hpp"

namespace pilot {

/// Why a node ended the recursion (or None for internal nodes).
enum class StopReason : std::uint8_t { None, MaxDepth, MinFit, ConSelected, LinChainCap };

std::string_view stop_name(StopReason reason);

/// One node of a fitted tree. Nodes live in PilotTree::nodes; children are
/// indices into that vector (-1 when absent).
///  - CON: leaf, no children.
///  - LIN: `left` is the continuation child over the same cases.
///  - PCON/BLIN/PLIN: `left` and `right` partition the cases.
struct TreeNode {
  NodeFit fit;
  double x_min = 0.0;  // training range of fit.predictor in this node (numeric predictors)
  double x_max = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  int depth = 0;  // reported depth: split ancestors only
  StopReason stop = StopReason::None;

  bool is_leaf() const { return left < 0 && right < 0; }
  /// (f(x_min), f(x_max)) of the left/right piece.
  std::pair<double, double> boundary_preds_left() const { return {fit.left(x_min), fit.left(x_max)}; }
  std::pair<double, double> boundary_preds_right() const;
};

struct TreeStats {
  std::size_t n_train = 0;
  std::size_t nodes = 0;
  std::size_t leaves = 0;
  int max_depth = 0;  // reported
  double train_rss = 0.0;
};

struct PilotTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double bound_B = 0.0;
  double offset = 0.0;
  Hyperparams hp;
  std::vector<ColumnMeta> columns;
  std::string target;
  TreeStats stats;

  const TreeNode& root() const { return nodes.front(); }
  /// Node weight t / n_train.
  double weight(const TreeNode& node) const;
};

/// Clips a cumulative (centered) prediction to [-3B, 3B].
double truncate_cumulative(double pred, double bound_B);

/// Node state seen by check_stop().
struct NodeState {
  std::size_t n_cases = 0;
  int depth = 0;      // reported depth
  int lin_chain = 0;  // consecutive LIN fits already made on this case set
};

/// Pre-selection triggers (max depth, min_fit); None means "run model selection".
StopReason check_stop(const NodeState& node, const Hyperparams& hp);
/// Post-selection triggers (CON chosen, LIN chain exhausted or negligible).
StopReason check_stop(const NodeState& node, const NodeFit& selected, const Hyperparams& hp);

/// Called once per model selection during building.
struct NodeVisit {
  const NodeView& view;
  std::span<const double> residuals;  // residuals entering the node, indexed by row
  const Selection& selection;
  const NodeState& state;
};

struct BuildOptions {
  int threads = 1;
  std::function<void(const NodeVisit&)> observer;
};

struct BuildResult {
  PilotTree tree;
  /// Fitted value of every training row (cumulative truncated prediction + offset).
  std::vector<double> fitted;
  /// Final residuals (centered response minus cumulative prediction).
  std::vector<double> residuals;
  /// Centered cumulative prediction per row.
  std::vector<double> cumulative;
};

BuildResult build_tree_detailed(const Dataset& data, const Hyperparams& hp, const BuildOptions& options = {});
PilotTree build_tree(const Dataset& data, const Hyperparams& hp = {}, const BuildOptions& options = {});

}  // namespace pilot
