#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "pilot/dataset.hpp"

namespace pilot {

enum class ModelKind : std::uint8_t { Con = 0, Lin = 1, Pcon = 2, Blin = 3, Plin = 4 };

inline constexpr std::array<ModelKind, 5> kAllKinds = {ModelKind::Con, ModelKind::Lin, ModelKind::Pcon,
                                                       ModelKind::Blin, ModelKind::Plin};

/// BIC degrees of freedom: coefficients plus the charge for a split point.
constexpr int dof(ModelKind kind) {
  constexpr int table[] = {1, 2, 5, 5, 7};
  return table[static_cast<int>(kind)];
}

constexpr bool is_split(ModelKind kind) {
  return kind == ModelKind::Pcon || kind == ModelKind::Blin || kind == ModelKind::Plin;
}

std::string_view kind_name(ModelKind kind);
/// Accepts "con", "CON", ... Throws ConfigError on unknown names.
ModelKind parse_kind(std::string_view name);

/// Set of model kinds; CON is always a member.
class KindSet {
 public:
  KindSet() : bits_(0x1F) {}
  explicit KindSet(std::initializer_list<ModelKind> kinds);

  static KindSet all() { return KindSet(); }
  static KindSet cart() { return KindSet({ModelKind::Con, ModelKind::Pcon}); }

  bool contains(ModelKind k) const { return bits_ & (1u << static_cast<unsigned>(k)); }
  void insert(ModelKind k) { bits_ |= 1u << static_cast<unsigned>(k); }
  std::vector<ModelKind> kinds() const;
  bool operator==(const KindSet&) const = default;

 private:
  std::uint8_t bits_;
};

struct Hyperparams {
  int max_depth = 12;
  int min_fit = 10;
  int min_leaf = 5;
  KindSet allowed_kinds;
  int min_unique_for_lin_blin = 5;
  int min_unique_per_child_for_plin = 5;
  double rss_floor_scale = 1e-12;
  int max_lin_chain = 100;
  double min_rel_gain_lin = 1e-10;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

/// Running sums over a set of cases.
struct Moments {
  double n = 0, sx = 0, sxx = 0, sy = 0, sxy = 0, syy = 0;

  void add(double x, double y) {
    n += 1;
    sx += x;
    sxx += x * x;
    sy += y;
    sxy += x * y;
    syy += y * y;
  }
  Moments operator-(const Moments& o) const {
    return {n - o.n, sx - o.sx, sxx - o.sxx, sy - o.sy, sxy - o.sxy, syy - o.syy};
  }
  Moments operator+(const Moments& o) const {
    return {n + o.n, sx + o.sx, sxx + o.sxx, sy + o.sy, sxy + o.sxy, syy + o.syy};
  }
  /// Centered sums: sum (x-xbar)^2, sum (x-xbar)(y-ybar), sum (y-ybar)^2.
  double cxx() const { return n > 0 ? sxx - sx * sx / n : 0.0; }
  double cxy() const { return n > 0 ? sxy - sx * sy / n : 0.0; }
  double cyy() const { return n > 0 ? syy - sy * sy / n : 0.0; }
};

/// intercept + slope * x
struct LinearPiece {
  double intercept = 0.0;
  double slope = 0.0;

  double operator()(double x) const { return intercept + slope * x; }
  bool operator==(const LinearPiece&) const = default;
};

struct PieceFit {
  LinearPiece piece;
  double rss = 0.0;
};

/// Left/right moments for a pivot sweep in ascending predictor order.
/// Cases move from the right side to the left one at a time; the right side
/// is always total - left, so left + right equals the node's moments.
class SplitScanState {
 public:
  explicit SplitScanState(const Moments& total) : total_(total) {}

  void move_left(double x, double y) { left_.add(x, y); }

  const Moments& total() const { return total_; }
  const Moments& left() const { return left_; }
  Moments right() const { return total_ - left_; }

  /// Gram entries of the hinge column h = (x - knot)_+ for knot at the
  /// current pivot; h is nonzero on the right side only.
  struct Hinge {
    double s1;  // sum h
    double sx;  // sum x h
    double sh;  // sum h^2
    double sy;  // sum h y
  };
  Hinge hinge(double knot) const;

 private:
  Moments total_;
  Moments left_;
};

/// Scaled-determinant threshold below which a local normal system is treated as singular.
inline constexpr double kSingularTol = 1e-12;

PieceFit fit_con(const Moments& m);
/// Empty when fewer than 2 cases or the predictor is (numerically) constant.
std::optional<PieceFit> fit_lin(const Moments& m);
/// Continuous two-piece fit with knot at `knot`: returns the left and right
/// pieces (equal at the knot) and the RSS. Empty when the 3-column system is singular.
struct BrokenFit {
  LinearPiece left, right;
  double rss = 0.0;
};
std::optional<BrokenFit> fit_blin(const SplitScanState& state, double knot);

/// Floored RSS used inside BIC: max(rss, floor_scale * max(1, sum_sq)).
double floored_rss(double rss, double sum_sq, double floor_scale);
/// t * log(rss / t) + v * log(t), rss floored as in floored_rss().
double bic_score(double rss, std::size_t t, int v, double sum_sq = 0.0, double floor_scale = 1e-12);

/// Categorical pivot: the level ids routed to the left child.
using LevelSet = std::vector<LevelId>;
using Pivot = std::variant<std::monostate, double, LevelSet>;

/// Outcome of model selection at one node.
struct NodeFit {
  ModelKind kind = ModelKind::Con;
  int predictor = -1;  // -1 for CON
  Pivot pivot;
  LinearPiece left;                  // CON/LIN: the only model
  std::optional<LinearPiece> right;  // split kinds only
  double bic = 0.0;
  double rss_before = 0.0;  // sum of squared residuals entering the node
  double rss_after = 0.0;
  double gain = 0.0;  // per-case impurity decrease (rss_before - rss_after) / t
  std::size_t n_cases = 0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
  /// Orders pivots for tie-breaking: the value for numeric pivots, the left
  /// prefix length (in level-mean order) for categorical ones.
  double pivot_key = 0.0;

  bool has_pivot() const { return !std::holds_alternative<std::monostate>(pivot); }
  bool is_numeric_pivot() const { return std::holds_alternative<double>(pivot); }
  double threshold() const { return std::get<double>(pivot); }
  const LevelSet& level_set() const { return std::get<LevelSet>(pivot); }
};

/// Deterministic preference: lower BIC, then fewer dof, then smaller
/// predictor index, then smaller pivot.
bool better_fit(const NodeFit& a, const NodeFit& b);

/// Best candidate per model kind for one predictor (or for the whole node).
struct KindBests {
  std::array<std::optional<NodeFit>, 5> by_kind;

  std::optional<NodeFit>& operator[](ModelKind k) { return by_kind[static_cast<int>(k)]; }
  const std::optional<NodeFit>& operator[](ModelKind k) const { return by_kind[static_cast<int>(k)]; }
  /// Keeps the better of the current entry and `fit` for fit.kind.
  void offer(const NodeFit& fit);
  void merge(const KindBests& other);
};

/// Per-pivot RSS report from a numeric scan, used by verification code.
struct PivotReport {
  ModelKind kind;
  std::size_t n_left;  // cases with value <= pivot
  double pivot;
  double rss;
};
using PivotObserver = std::function<void(const PivotReport&)>;

/// Evaluates LIN, PCON, BLIN and PLIN on one numeric predictor.
/// `rows` must be the node's cases in ascending predictor order.
KindBests scan_numeric_predictor(std::span<const double> x, std::span<const RowId> rows,
                                 std::span<const double> residuals, const Hyperparams& hp, int predictor,
                                 const PivotObserver& observer = {});

/// PCON over mean-ordered prefix splits of a categorical predictor.
KindBests scan_categorical_predictor(std::span<const LevelId> codes, std::size_t n_levels,
                                     std::span<const RowId> rows, std::span<const double> residuals,
                                     const Hyperparams& hp, int predictor);

/// The cases of one node: `rows` in original order, and for each numeric
/// predictor the same cases in ascending predictor order.
struct NodeView {
  std::span<const RowId> rows;
  std::vector<std::span<const RowId>> ordered;  // per column; empty span for categorical columns
};

struct Selection {
  NodeFit best;
  KindBests per_kind;  // best candidate of each kind over all predictors
};

/// Lowest-BIC (predictor, model) over all predictors and allowed kinds.
/// `threads` > 1 scans predictors concurrently; the result does not depend on it.
Selection select_model(const Dataset& data, const NodeView& node, std::span<const double> residuals,
                       const Hyperparams& hp, int threads = 1);

}  // namespace pilot
