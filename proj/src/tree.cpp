#include "pilot/tree.hpp"

#include <algorithm>
#include <cmath>

#include "pilot/error.hpp"

namespace pilot {

std::string_view stop_name(StopReason reason) {
  switch (reason) {
    case StopReason::None: return "none";
    case StopReason::MaxDepth: return "max_depth";
    case StopReason::MinFit: return "min_fit";
    case StopReason::ConSelected: return "con";
    case StopReason::LinChainCap: return "lin_chain";
  }
  return "?";
}

std::pair<double, double> TreeNode::boundary_preds_right() const {
  const LinearPiece p = fit.right.value_or(fit.left);
  return {p(x_min), p(x_max)};
}

double PilotTree::weight(const TreeNode& node) const {
  return stats.n_train ? static_cast<double>(node.fit.n_cases) / static_cast<double>(stats.n_train) : 0.0;
}

double truncate_cumulative(double pred, double bound_B) {
  const double limit = 3.0 * bound_B;
  return std::min(std::max(pred, -limit), limit);
}

StopReason check_stop(const NodeState& node, const Hyperparams& hp) {
  if (node.depth >= hp.max_depth) return StopReason::MaxDepth;
  if (node.n_cases < static_cast<std::size_t>(hp.min_fit)) return StopReason::MinFit;
  return StopReason::None;
}

StopReason check_stop(const NodeState& node, const NodeFit& selected, const Hyperparams& hp) {
  if (selected.kind == ModelKind::Con) return StopReason::ConSelected;
  if (selected.kind == ModelKind::Lin) {
    if (node.lin_chain >= hp.max_lin_chain) return StopReason::LinChainCap;
    if (selected.gain * static_cast<double>(selected.n_cases) < hp.min_rel_gain_lin * selected.rss_before)
      return StopReason::LinChainCap;
  }
  return StopReason::None;
}

namespace {

struct NodeRows {
  std::vector<RowId> rows;
  std::vector<std::vector<RowId>> ordered;  // per column, empty for categorical
};

class Builder {
 public:
  Builder(const Dataset& data, const Hyperparams& hp, const BuildOptions& options)
      : data_(data), hp_(hp), options_(options) {}

  BuildResult run() {
    const std::size_t n = data_.n_rows();
    const CenteredResponse centered = center_response(data_.response);
    yc_ = centered.values;
    bound_ = centered.bound_B;
    cum_.assign(n, 0.0);
    resid_ = yc_;
    goes_left_.assign(n, 0);

    tree_.bound_B = bound_;
    tree_.offset = centered.offset;
    tree_.hp = hp_;
    tree_.columns = data_.features.metas();
    tree_.target = data_.target;
    tree_.stats.n_train = n;

    NodeRows root;
    root.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) root.rows[i] = static_cast<RowId>(i);
    root.ordered = data_.sorted_index;
    build(std::move(root), NodeState{n, 0, 0});

    auto& st = tree_.stats;
    st.nodes = tree_.nodes.size();
    for (const auto& node : tree_.nodes) {
      if (node.is_leaf()) ++st.leaves;
      st.max_depth = std::max(st.max_depth, node.depth + (is_split(node.fit.kind) ? 1 : 0));
    }
    st.train_rss = 0.0;
    for (double r : resid_) st.train_rss += r * r;

    BuildResult out;
    out.fitted.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.fitted[i] = cum_[i] + tree_.offset;
    out.tree = std::move(tree_);
    out.residuals = std::move(resid_);
    out.cumulative = std::move(cum_);
    return out;
  }

 private:
  NodeView view_of(const NodeRows& node) const {
    NodeView v;
    v.rows = node.rows;
    v.ordered.reserve(node.ordered.size());
    for (const auto& o : node.ordered) v.ordered.emplace_back(o);
    return v;
  }

  // Adds the node's model increment to every case and refreshes residuals.
  void apply(const NodeFit& fit, const LinearPiece& piece, std::span<const RowId> rows) {
    const bool uses_x = fit.kind != ModelKind::Con && data_.column(fit.predictor).meta.is_numeric();
    const double* x = uses_x ? data_.column(fit.predictor).values.data() : nullptr;
    for (RowId r : rows) {
      const double inc = uses_x ? piece(x[r]) : piece.intercept;
      cum_[r] = truncate_cumulative(cum_[r] + inc, bound_);
      resid_[r] = yc_[r] - cum_[r];
    }
  }

  std::int32_t make_leaf(NodeFit fit, const NodeRows& node, const NodeState& state, StopReason why) {
    apply(fit, fit.left, node.rows);
    TreeNode leaf;
    leaf.fit = std::move(fit);
    leaf.depth = state.depth;
    leaf.stop = why;
    tree_.nodes.push_back(std::move(leaf));
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  NodeFit con_fit(const NodeRows& node) const {
    const NodeView v = view_of(node);
    Hyperparams con_only = hp_;
    con_only.allowed_kinds = KindSet({ModelKind::Con});
    return select_model(data_, v, resid_, con_only).best;
  }

  std::int32_t build(NodeRows node, NodeState state) {
    if (const StopReason pre = check_stop(state, hp_); pre != StopReason::None)
      return make_leaf(con_fit(node), node, state, pre);

    const NodeView view = view_of(node);
    Selection sel = select_model(data_, view, resid_, hp_, options_.threads);
    if (options_.observer) options_.observer(NodeVisit{view, resid_, sel, state});

    if (const StopReason post = check_stop(state, sel.best, hp_); post != StopReason::None) {
      NodeFit fit = post == StopReason::ConSelected ? sel.best : *sel.per_kind[ModelKind::Con];
      return make_leaf(std::move(fit), node, state, post);
    }

    const NodeFit& fit = sel.best;
    TreeNode tn;
    tn.fit = fit;
    tn.depth = state.depth;
    const Column& col = data_.column(fit.predictor);
    if (col.meta.is_numeric()) {
      const auto& order = node.ordered[fit.predictor];
      tn.x_min = col.values[order.front()];
      tn.x_max = col.values[order.back()];
    }
    const auto idx = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(std::move(tn));

    if (fit.kind == ModelKind::Lin) {
      apply(fit, fit.left, node.rows);
      const std::int32_t child = build(std::move(node), {state.n_cases, state.depth, state.lin_chain + 1});
      tree_.nodes[idx].left = child;
      return idx;
    }

    auto [left, right] = partition(node, fit);
    node = {};
    apply(fit, fit.left, left.rows);
    apply(fit, *fit.right, right.rows);
    const NodeState ls{left.rows.size(), state.depth + 1, 0};
    const NodeState rs{right.rows.size(), state.depth + 1, 0};
    const std::int32_t l = build(std::move(left), ls);
    const std::int32_t r = build(std::move(right), rs);
    tree_.nodes[idx].left = l;
    tree_.nodes[idx].right = r;
    return idx;
  }

  // Stable filtering keeps every child list in presorted order.
  std::pair<NodeRows, NodeRows> partition(const NodeRows& node, const NodeFit& fit) {
    const Column& col = data_.column(fit.predictor);
    if (col.meta.is_numeric()) {
      const double pivot = fit.threshold();
      for (RowId r : node.rows) goes_left_[r] = col.values[r] <= pivot;
    } else {
      const LevelSet& set = fit.level_set();
      for (RowId r : node.rows) goes_left_[r] = std::binary_search(set.begin(), set.end(), col.codes[r]);
    }
    auto split = [&](std::span<const RowId> in, std::vector<RowId>& l, std::vector<RowId>& r) {
      l.reserve(fit.n_left);
      r.reserve(fit.n_right);
      for (RowId row : in) (goes_left_[row] ? l : r).push_back(row);
    };
    NodeRows left, right;
    split(node.rows, left.rows, right.rows);
    left.ordered.resize(node.ordered.size());
    right.ordered.resize(node.ordered.size());
    for (std::size_t j = 0; j < node.ordered.size(); ++j)
      if (!node.ordered[j].empty()) split(node.ordered[j], left.ordered[j], right.ordered[j]);
    return {std::move(left), std::move(right)};
  }

  const Dataset& data_;
  const Hyperparams& hp_;
  const BuildOptions& options_;
  std::vector<double> yc_, cum_, resid_;
  std::vector<std::uint8_t> goes_left_;
  double bound_ = 0.0;
  PilotTree tree_;
};

}  // namespace

BuildResult build_tree_detailed(const Dataset& data, const Hyperparams& hp, const BuildOptions& options) {
  hp.validate();
  if (data.n_rows() == 0) throw DataError("cannot build a tree on an empty dataset");
  if (data.sorted_index.size() != data.n_cols()) throw DataError("dataset is not presorted");
  return Builder(data, hp, options).run();
}

PilotTree build_tree(const Dataset& data, const Hyperparams& hp, const BuildOptions& options) {
  return build_tree_detailed(data, hp, options).tree;
}

}  // namespace pilot
