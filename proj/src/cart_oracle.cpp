// Brute-force piecewise-constant reference: every candidate split is refit
// from scratch, no running sums are shared between pivots.
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "pilot/error.hpp"
#include "pilot/eval.hpp"

namespace pilot::eval {

namespace {

double mean_of(const std::vector<double>& r, const std::vector<RowId>& rows) {
  double s = 0.0;
  for (RowId i : rows) s += r[i];
  return s / static_cast<double>(rows.size());
}

double rss_of(const std::vector<double>& r, const std::vector<RowId>& rows) {
  const double m = mean_of(r, rows);
  double s = 0.0;
  for (RowId i : rows) s += (r[i] - m) * (r[i] - m);
  return s;
}

struct Candidate {
  double bic = std::numeric_limits<double>::infinity();
  int v = 1;
  int predictor = -1;
  double key = 0.0;
  double threshold = 0.0;
  std::vector<LevelId> levels;
};

bool precedes(const Candidate& a, const Candidate& b) {
  if (a.bic != b.bic) return a.bic < b.bic;
  if (a.v != b.v) return a.v < b.v;
  if (a.predictor != b.predictor) return a.predictor < b.predictor;
  return a.key < b.key;
}

class OracleBuilder {
 public:
  OracleBuilder(const Dataset& data, const Hyperparams& hp) : data_(data), hp_(hp) {
    const auto [lo, hi] = std::minmax_element(data.response.begin(), data.response.end());
    tree_.offset = (*lo + *hi) / 2.0;
    for (double y : data.response) {
      r_.push_back(y - tree_.offset);
      tree_.bound_B = std::max(tree_.bound_B, std::abs(y - tree_.offset));
    }
    cum_.assign(r_.size(), 0.0);
    yc_ = r_;
  }

  OracleTree run() {
    std::vector<RowId> all(data_.n_rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<RowId>(i);
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  double bic(double rss, std::size_t t, int v, double sum_sq) const {
    const double floor = hp_.rss_floor_scale * std::max(1.0, sum_sq);
    const double td = static_cast<double>(t);
    return td * std::log(std::max(rss, floor) / td) + v * std::log(td);
  }

  void add(const std::vector<RowId>& rows, double inc) {
    const double cap = 3.0 * tree_.bound_B;
    for (RowId i : rows) {
      cum_[i] = std::clamp(cum_[i] + inc, -cap, cap);
      r_[i] = yc_[i] - cum_[i];
    }
  }

  int leaf(const std::vector<RowId>& rows) {
    OracleNode node;
    node.n_cases = rows.size();
    node.leaf_value = mean_of(r_, rows);
    add(rows, node.leaf_value);
    tree_.nodes.push_back(std::move(node));
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  void try_split(const std::vector<RowId>& rows, const std::vector<RowId>& left, const std::vector<RowId>& right,
                 double sum_sq, Candidate cand, Candidate& best) const {
    if (left.size() < static_cast<std::size_t>(hp_.min_leaf) || right.size() < static_cast<std::size_t>(hp_.min_leaf))
      return;
    cand.v = 5;
    cand.bic = bic(rss_of(r_, left) + rss_of(r_, right), rows.size(), 5, sum_sq);
    if (precedes(cand, best)) best = std::move(cand);
  }

  int grow(const std::vector<RowId>& rows, int depth) {
    if (depth >= hp_.max_depth || rows.size() < static_cast<std::size_t>(hp_.min_fit)) return leaf(rows);

    double sum_sq = 0.0;
    for (RowId i : rows) sum_sq += r_[i] * r_[i];
    Candidate best;
    best.v = 1;
    best.bic = bic(rss_of(r_, rows), rows.size(), 1, sum_sq);

    if (hp_.allowed_kinds.contains(ModelKind::Pcon)) {
      for (std::size_t j = 0; j < data_.n_cols(); ++j) {
        const Column& col = data_.column(j);
        if (col.meta.is_numeric()) {
          std::set<double> distinct;
          for (RowId i : rows) distinct.insert(col.values[i]);
          if (distinct.size() < 2) continue;
          distinct.erase(std::prev(distinct.end()));
          for (double s : distinct) {
            std::vector<RowId> left, right;
            for (RowId i : rows) (col.values[i] <= s ? left : right).push_back(i);
            Candidate c;
            c.predictor = static_cast<int>(j);
            c.key = s;
            c.threshold = s;
            try_split(rows, left, right, sum_sq, std::move(c), best);
          }
        } else {
          std::map<LevelId, std::vector<RowId>> by_level;
          for (RowId i : rows) by_level[col.codes[i]].push_back(i);
          if (by_level.size() < 2) continue;
          std::vector<std::pair<double, LevelId>> order;
          for (const auto& [level, members] : by_level) order.emplace_back(mean_of(r_, members), level);
          std::stable_sort(order.begin(), order.end(),
                           [](const auto& a, const auto& b) { return a.first < b.first; });
          for (std::size_t q = 1; q < order.size(); ++q) {
            std::set<LevelId> in_left;
            for (std::size_t k = 0; k < q; ++k) in_left.insert(order[k].second);
            std::vector<RowId> left, right;
            for (RowId i : rows) (in_left.count(col.codes[i]) ? left : right).push_back(i);
            Candidate c;
            c.predictor = static_cast<int>(j);
            c.key = static_cast<double>(q);
            c.levels.assign(in_left.begin(), in_left.end());
            try_split(rows, left, right, sum_sq, std::move(c), best);
          }
        }
      }
    }

    if (best.predictor < 0) return leaf(rows);

    const Column& col = data_.column(static_cast<std::size_t>(best.predictor));
    std::vector<RowId> left, right;
    for (RowId i : rows) {
      const bool goes_left = col.meta.is_numeric()
                                 ? col.values[i] <= best.threshold
                                 : std::binary_search(best.levels.begin(), best.levels.end(), col.codes[i]);
      (goes_left ? left : right).push_back(i);
    }
    OracleNode node;
    node.predictor = best.predictor;
    node.categorical = !col.meta.is_numeric();
    node.threshold = best.threshold;
    node.left_levels = best.levels;
    node.left_value = mean_of(r_, left);
    node.right_value = mean_of(r_, right);
    node.n_cases = rows.size();
    node.n_left = left.size();
    node.n_right = right.size();
    add(left, node.left_value);
    add(right, node.right_value);

    const auto id = tree_.nodes.size();
    tree_.nodes.push_back(std::move(node));
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return static_cast<int>(id);
  }

  const Dataset& data_;
  const Hyperparams& hp_;
  OracleTree tree_;
  std::vector<double> yc_, r_, cum_;
};

}  // namespace

OracleTree cart_oracle(const Dataset& data, const Hyperparams& hp) {
  if (data.n_rows() == 0) throw DataError("empty training set");
  return OracleBuilder(data, hp).run();
}

double oracle_predict(const OracleTree& tree, const FeatureTable& table, std::size_t row) {
  const double cap = 3.0 * tree.bound_B;
  double pred = 0.0;
  int id = 0;
  while (id >= 0) {
    const OracleNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.predictor < 0) {
      pred = std::clamp(pred + node.leaf_value, -cap, cap);
      break;
    }
    const Column& col = table.columns[static_cast<std::size_t>(node.predictor)];
    bool goes_left;
    if (node.categorical) {
      const LevelId code = col.codes[row];
      goes_left = std::binary_search(node.left_levels.begin(), node.left_levels.end(), code);
    } else {
      goes_left = col.values[row] <= node.threshold;
    }
    pred = std::clamp(pred + (goes_left ? node.left_value : node.right_value), -cap, cap);
    id = goes_left ? node.left : node.right;
  }
  return pred + tree.offset;
}

}  // namespace pilot::eval
