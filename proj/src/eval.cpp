#include "pilot/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "pilot/error.hpp"
#include "pilot/predict.hpp"

namespace pilot::eval {

namespace {

FeatureTable uniform_features(std::size_t n, std::size_t p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  FeatureTable table;
  table.n_rows = n;
  for (std::size_t j = 0; j < p; ++j) {
    Column c;
    c.meta.name = "x" + std::to_string(j + 1);
    c.meta.kind = ColumnKind::Numeric;
    c.values.resize(n);
    table.columns.push_back(std::move(c));
  }
  // Row-major draws so a prefix of a larger sample is the smaller sample.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) table.columns[j].values[i] = unif(rng);
  return table;
}

void require_rows(std::size_t n) {
  if (n == 0) throw ConfigError("generator needs n >= 1");
}

std::string fmt(const char* pattern, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

Dataset gen_linear(std::size_t n, std::size_t p, std::span<const double> beta, double sigma, std::uint64_t seed) {
  require_rows(n);
  if (p == 0) throw ConfigError("gen_linear needs p >= 1");
  if (beta.size() != p) throw ConfigError("gen_linear: beta has " + std::to_string(beta.size()) + " entries, p = " +
                                          std::to_string(p));
  if (!(sigma >= 0.0)) throw ConfigError("gen_linear: sigma must be >= 0");
  std::mt19937_64 rng(seed);
  FeatureTable x = uniform_features(n, p, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t j = 0; j < p; ++j) f += beta[j] * x.columns[j].values[i];
    y[i] = f + (sigma > 0.0 ? sigma * noise(rng) : 0.0);
  }
  return make_dataset(std::move(x), std::move(y), "y");
}

Dataset gen_additive(std::size_t n, std::uint64_t seed, double sigma) {
  require_rows(n);
  std::mt19937_64 rng(seed);
  FeatureTable x = uniform_features(n, 4, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = x.columns[0].values[i], x2 = x.columns[1].values[i], x3 = x.columns[2].values[i];
    y[i] = 2.0 * x1 + (x2 > 0.5 ? 1.0 : 0.0) + (1.0 - std::exp(-4.0 * x3)) + sigma * noise(rng);
  }
  return make_dataset(std::move(x), std::move(y), "y");
}

Dataset gen_piecewise(std::size_t n, std::uint64_t seed, double sigma) {
  require_rows(n);
  std::mt19937_64 rng(seed);
  FeatureTable x = uniform_features(n, 3, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = x.columns[0].values[i], x2 = x.columns[1].values[i];
    y[i] = (x1 > 0.3 ? 1.0 : 0.0) + (x2 > 0.6 ? 2.0 : 0.0) - (x1 > 0.8 ? 1.5 : 0.0) + sigma * noise(rng);
  }
  return make_dataset(std::move(x), std::move(y), "y");
}

double yeo_johnson_apply(double lambda, double x) {
  if (x >= 0.0) {
    if (lambda == 0.0) return std::log1p(x);
    return std::expm1(lambda * std::log1p(x)) / lambda;
  }
  const double mu = 2.0 - lambda;
  if (mu == 0.0) return -std::log1p(-x);
  return -std::expm1(mu * std::log1p(-x)) / mu;
}

double yeo_johnson_inverse(double lambda, double y) {
  if (y >= 0.0) {
    if (lambda == 0.0) return std::expm1(y);
    return std::expm1(std::log1p(lambda * y) / lambda);
  }
  const double mu = 2.0 - lambda;
  if (mu == 0.0) return -std::expm1(-y);
  return -std::expm1(std::log1p(-mu * y) / mu);
}

double yeo_johnson_loglik(double lambda, std::span<const double> column) {
  const auto n = static_cast<double>(column.size());
  double mean = 0.0, jacobian = 0.0;
  for (double x : column) {
    mean += yeo_johnson_apply(lambda, x);
    jacobian += std::copysign(std::log1p(std::abs(x)), x);
  }
  mean /= n;
  double var = 0.0;
  for (double x : column) {
    const double d = yeo_johnson_apply(lambda, x) - mean;
    var += d * d;
  }
  var /= n;
  if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * jacobian;
}

double yeo_johnson_fit(std::span<const double> column) {
  if (column.size() < 2) return 1.0;
  const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  if (*lo == *hi) return 1.0;

  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -5.0, b = 5.0;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = yeo_johnson_loglik(c, column), fd = yeo_johnson_loglik(d, column);
  while (b - a > 1e-6) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = yeo_johnson_loglik(c, column);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = yeo_johnson_loglik(d, column);
    }
  }
  return (a + b) / 2.0;
}

YeoJohnsonModel fit_yeo_johnson(const FeatureTable& table) {
  YeoJohnsonModel m;
  for (const auto& col : table.columns) {
    m.active.push_back(col.meta.is_numeric());
    m.lambdas.push_back(col.meta.is_numeric() ? yeo_johnson_fit(col.values) : 1.0);
  }
  return m;
}

FeatureTable apply_yeo_johnson(const YeoJohnsonModel& model, const FeatureTable& table) {
  if (model.lambdas.size() != table.n_cols()) throw DataError("Yeo-Johnson model does not match table columns");
  FeatureTable out = table;
  for (std::size_t j = 0; j < out.n_cols(); ++j) {
    if (!model.active[j]) continue;
    for (double& v : out.columns[j].values) v = yeo_johnson_apply(model.lambdas[j], v);
  }
  return out;
}

std::vector<int> assign_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("number of folds must be >= 2");
  if (n < static_cast<std::size_t>(k)) throw ConfigError("need at least as many rows as folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return fold;
}

Method pilot_method(const Hyperparams& hp, std::string name) {
  return {std::move(name), [hp](const Dataset& train, const FeatureTable& test) {
            return predict_batch(build_tree(train, hp), test);
          }};
}

Method cart_method(Hyperparams hp, std::string name) {
  hp.allowed_kinds = KindSet::cart();
  return pilot_method(hp, std::move(name));
}

Method with_yeo_johnson(Method inner) {
  auto fit = inner.fit_predict;
  return {inner.name + "+YJ", [fit](const Dataset& train, const FeatureTable& test) {
            const YeoJohnsonModel yj = fit_yeo_johnson(train.features);
            Dataset transformed = make_dataset(apply_yeo_johnson(yj, train.features), train.response, train.target);
            return fit(transformed, apply_yeo_johnson(yj, test));
          }};
}

double mean_squared_error(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw DataError("prediction/response length mismatch");
  if (actual.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = predicted[i] - actual[i];
    s += d * d;
  }
  return s / static_cast<double>(actual.size());
}

namespace {

void compute_ratios(std::vector<EvalEntry>& entries, std::size_t begin) {
  // Zero MSE is floored so an all-perfect row still has ratios of exactly 1.
  const double floor = std::numeric_limits<double>::min();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = begin; i < entries.size(); ++i)
    if (entries[i].ok) best = std::min(best, std::max(entries[i].mse, floor));
  for (std::size_t i = begin; i < entries.size(); ++i)
    entries[i].ratio = entries[i].ok ? std::max(entries[i].mse, floor) / best : 0.0;
}

}  // namespace

EvalReport kfold_cv(const Dataset& data, const std::string& dataset_name, int k, std::span<const Method> methods,
                    std::uint64_t seed) {
  const std::vector<int> fold = assign_folds(data.n_rows(), k, seed);
  EvalReport report;
  report.seed = seed;
  report.folds = k;
  for (const auto& m : methods) report.entries.push_back({dataset_name, m.name, false, 0.0, 0.0, 0.0, {}});

  std::vector<double> fold_mse_sum(methods.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    std::vector<RowId> train_rows, test_rows;
    for (std::size_t i = 0; i < data.n_rows(); ++i)
      (fold[i] == f ? test_rows : train_rows).push_back(static_cast<RowId>(i));
    const Dataset train = subset_rows(data, train_rows);
    const FeatureTable test = subset_rows(data.features, test_rows);
    std::vector<double> test_y;
    for (RowId r : test_rows) test_y.push_back(data.response[r]);

    for (std::size_t m = 0; m < methods.size(); ++m) {
      EvalEntry& e = report.entries[m];
      if (!e.error.empty()) continue;
      const auto start = std::chrono::steady_clock::now();
      try {
        const std::vector<double> pred = methods[m].fit_predict(train, test);
        fold_mse_sum[m] += mean_squared_error(pred, test_y);
      } catch (const std::exception& ex) {
        e.error = ex.what();
        if (e.error.empty()) e.error = "failed";
      }
      e.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    EvalEntry& e = report.entries[m];
    e.ok = e.error.empty();
    e.mse = e.ok ? fold_mse_sum[m] / k : 0.0;
  }
  compute_ratios(report.entries, 0);
  return report;
}

void append(EvalReport& report, const EvalReport& more) {
  if (report.entries.empty()) {
    report.seed = more.seed;
    report.folds = more.folds;
  }
  report.entries.insert(report.entries.end(), more.entries.begin(), more.entries.end());
}

bool EvalReport::any_failed() const {
  return std::any_of(entries.begin(), entries.end(), [](const EvalEntry& e) { return !e.ok; });
}

const EvalEntry* EvalReport::find(std::string_view dataset, std::string_view method) const {
  for (const auto& e : entries)
    if (e.dataset == dataset && e.method == method) return &e;
  return nullptr;
}

std::string EvalReport::to_csv(bool timing) const {
  std::string out = timing ? "dataset,method,mse,ratio,status,seconds\n" : "dataset,method,mse,ratio,status\n";
  for (const auto& e : entries) {
    out += e.dataset + "," + e.method + ",";
    out += e.ok ? fmt("%.17g", e.mse) + "," + fmt("%.17g", e.ratio) + ",ok" : std::string(",,failed");
    if (timing) out += "," + fmt("%.3f", e.seconds);
    out += "\n";
  }
  return out;
}

std::string EvalReport::to_table(bool timing) const {
  std::vector<std::string> datasets, methods;
  for (const auto& e : entries) {
    if (std::find(datasets.begin(), datasets.end(), e.dataset) == datasets.end()) datasets.push_back(e.dataset);
    if (std::find(methods.begin(), methods.end(), e.method) == methods.end()) methods.push_back(e.method);
  }
  std::size_t w0 = 7;
  for (const auto& d : datasets) w0 = std::max(w0, d.size());
  std::vector<std::size_t> widths;
  for (const auto& m : methods) widths.push_back(std::max<std::size_t>(m.size(), timing ? 16 : 6));

  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() >= w) return s;
    return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
  };
  std::string out = pad("dataset", w0, true);
  for (std::size_t m = 0; m < methods.size(); ++m) out += "  " + pad(methods[m], widths[m], false);
  out += "  " + pad("best_mse", 12, false) + "\n";
  for (const auto& d : datasets) {
    out += pad(d, w0, true);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const EvalEntry* e = find(d, methods[m]);
      std::string cell = "-";
      if (e) {
        cell = e->ok ? fmt("%.2f", e->ratio) : std::string("**");
        if (e->ok) best = std::min(best, e->mse);
        if (timing) cell += " (" + fmt("%.2f", e->seconds) + "s)";
      }
      out += "  " + pad(cell, widths[m], false);
    }
    out += "  " + pad(std::isfinite(best) ? fmt("%.6g", best) : std::string("-"), 12, false) + "\n";
  }
  return out;
}

}  // namespace pilot::eval
