#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pilot/dataset.hpp"
#include "pilot/model_scan.hpp"
#include "pilot/tree.hpp"

namespace pilot::eval {

// ---------------------------------------------------------------------------
// Synthetic data

/// X ~ U[0,1]^p, y = X beta + sigma * N(0,1). Columns are named x1..xp.
Dataset gen_linear(std::size_t n, std::size_t p, std::span<const double> beta, double sigma, std::uint64_t seed);

/// p = 4 additive model: 2*x1 (linear) + 1{x2 > 0.5} (step) + (1 - exp(-4*x3))
/// (saturating) + 0 * x4, plus sigma * N(0,1).
Dataset gen_additive(std::size_t n, std::uint64_t seed, double sigma = 0.1);

/// p = 3 step-only model: 1{x1 > 0.3} + 2*1{x2 > 0.6} - 1.5*1{x1 > 0.8}, x3 unused,
/// plus sigma * N(0,1).
Dataset gen_piecewise(std::size_t n, std::uint64_t seed, double sigma = 0.1);

// ---------------------------------------------------------------------------
// Yeo-Johnson power transform

double yeo_johnson_apply(double lambda, double x);
double yeo_johnson_inverse(double lambda, double y);
/// Gaussian profile log-likelihood of the transformed column.
double yeo_johnson_loglik(double lambda, std::span<const double> column);
/// Maximum-likelihood lambda over [-5, 5] by golden-section search (tol 1e-6).
/// Returns 1 (identity) for a zero-variance column.
double yeo_johnson_fit(std::span<const double> column);

/// Per-column lambdas for the numeric columns of a table (categorical: unused).
struct YeoJohnsonModel {
  std::vector<double> lambdas;
  std::vector<bool> active;
};
YeoJohnsonModel fit_yeo_johnson(const FeatureTable& table);
FeatureTable apply_yeo_johnson(const YeoJohnsonModel& model, const FeatureTable& table);

// ---------------------------------------------------------------------------
// Cross validation

/// Fold id per row: rows are shuffled with `seed`, then dealt round-robin,
/// so fold sizes differ by at most one.
std::vector<int> assign_folds(std::size_t n, int k, std::uint64_t seed);

/// Trains on `train` and returns predictions for `test`.
struct Method {
  std::string name;
  std::function<std::vector<double>(const Dataset& train, const FeatureTable& test)> fit_predict;
};

Method pilot_method(const Hyperparams& hp = {}, std::string name = "PILOT");
/// PILOT restricted to {CON, PCON}.
Method cart_method(Hyperparams hp = {}, std::string name = "CART");
/// Fits Yeo-Johnson on each training fold's numeric predictors and applies it to both folds.
Method with_yeo_johnson(Method inner);

struct EvalEntry {
  std::string dataset;
  std::string method;
  bool ok = false;
  double mse = 0.0;    // mean of per-fold test MSE
  double ratio = 0.0;  // mse / lowest successful mse of the dataset
  double seconds = 0.0;
  std::string error;
};

struct EvalReport {
  std::uint64_t seed = 0;
  int folds = 0;
  std::vector<EvalEntry> entries;  // grouped by dataset, methods in given order

  bool any_failed() const;
  const EvalEntry* find(std::string_view dataset, std::string_view method) const;
  /// dataset,method,mse,ratio,status (+ seconds when `timing`).
  std::string to_csv(bool timing = false) const;
  /// Aligned ratio table, one row per dataset; failures shown as "**".
  std::string to_table(bool timing = false) const;
};

/// k-fold cross-validated MSE of every method on `data`. A method that throws
/// on any fold is recorded as failed; ratios use the successful methods only.
EvalReport kfold_cv(const Dataset& data, const std::string& dataset_name, int k, std::span<const Method> methods,
                    std::uint64_t seed);
/// Appends the entries of `more` (same seed and folds expected).
void append(EvalReport& report, const EvalReport& more);

double mean_squared_error(std::span<const double> predicted, std::span<const double> actual);

// ---------------------------------------------------------------------------
// Brute-force CART reference

/// Piecewise-constant tree grown by exhaustive refitting at every node,
/// mirroring PILOT's CON/PCON rules (BIC choice, n_fit, n_leaf, max depth,
/// +-3B clipping of cumulative predictions).
struct OracleNode {
  int predictor = -1;  // -1 for a leaf
  bool categorical = false;
  double threshold = 0.0;
  std::vector<LevelId> left_levels;  // sorted
  double left_value = 0.0;           // PCON increments
  double right_value = 0.0;
  double leaf_value = 0.0;  // CON increment (leaves)
  std::size_t n_cases = 0;
  std::size_t n_left = 0, n_right = 0;
  int left = -1, right = -1;
};

struct OracleTree {
  std::vector<OracleNode> nodes;  // preorder, root first
  double offset = 0.0;
  double bound_B = 0.0;
};

OracleTree cart_oracle(const Dataset& data, const Hyperparams& hp);
/// Prediction for row `row` of `table` (same column layout as training).
double oracle_predict(const OracleTree& tree, const FeatureTable& table, std::size_t row);

}  // namespace pilot::eval
