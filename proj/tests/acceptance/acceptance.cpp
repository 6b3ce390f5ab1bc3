// Acceptance checks. One PASS/FAIL line per criterion; exit code 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pilot/eval.hpp"
#include "pilot/interpret.hpp"
#include "pilot/predict.hpp"
#include "pilot/tree.hpp"
#include "test_util.hpp"

using namespace pilot;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------

Outcome cart_oracle_equivalence() {
  const auto t0 = Clock::now();
  Outcome o;
  int compared_nodes = 0;
  for (std::uint64_t seed = 0; seed < 20 && o.pass; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 1);
    const std::size_t n = 80 + rng() % 121;           // 80..200
    const std::size_t p_cat = 1 + seed % 2;           // 1..2
    const std::size_t p_num = 1 + (seed / 2) % 2;     // 1..2, so p <= 4
    const double round_to = seed % 3 == 0 ? 0.05 : 0.0;
    const int levels = 3 + static_cast<int>(seed % 4);
    const Dataset d = testutil::random_dataset(seed, n, p_num, p_cat, levels, round_to);
    const Dataset fresh = testutil::random_dataset(seed + 1000, 200, p_num, p_cat, levels, round_to);
    Hyperparams hp;
    hp.allowed_kinds = KindSet::cart();
    hp.max_depth = 3 + static_cast<int>(seed % 4);

    const PilotTree t = build_tree(d, hp);
    const eval::OracleTree ref = eval::cart_oracle(d, hp);
    auto mismatch = [&](const std::string& what) {
      o.pass = false;
      o.detail = "seed " + std::to_string(seed) + ": " + what;
    };
    if (t.nodes.size() != ref.nodes.size()) {
      mismatch("node count " + std::to_string(t.nodes.size()) + " vs " + std::to_string(ref.nodes.size()));
      break;
    }
    for (std::size_t i = 0; i < t.nodes.size() && o.pass; ++i) {
      const TreeNode& a = t.nodes[i];
      const eval::OracleNode& b = ref.nodes[i];
      ++compared_nodes;
      if (b.predictor < 0) {
        if (a.fit.kind != ModelKind::Con) mismatch("node " + std::to_string(i) + " should be a leaf");
        else if (std::abs(a.fit.left.intercept - b.leaf_value) > 1e-10) mismatch("leaf value at " + std::to_string(i));
        continue;
      }
      if (a.fit.kind != ModelKind::Pcon || a.fit.predictor != b.predictor || a.fit.n_left != b.n_left ||
          a.fit.n_right != b.n_right || a.left != b.left || a.right != b.right) {
        mismatch("split structure at node " + std::to_string(i));
        continue;
      }
      const bool same_pivot = b.categorical ? a.fit.level_set() == b.left_levels : a.fit.threshold() == b.threshold;
      if (!same_pivot) mismatch("pivot at node " + std::to_string(i));
      if (std::abs(a.fit.left.intercept - b.left_value) > 1e-10 ||
          std::abs(a.fit.right->intercept - b.right_value) > 1e-10)
        mismatch("split values at node " + std::to_string(i));
    }
    if (!o.pass) break;
    for (const Dataset* data : {&d, &fresh}) {
      const auto pred = predict_batch(t, data->features);
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (std::abs(pred[i] - eval::oracle_predict(ref, data->features, i)) > 1e-10) {
          mismatch("prediction row " + std::to_string(i));
          break;
        }
    }
  }
  const double secs = seconds_since(t0);
  if (o.pass && secs >= 30.0) {
    o.pass = false;
    o.detail = "took " + fmt("%.1f", secs) + " s";
  }
  if (o.pass) o.detail = "20 datasets, " + std::to_string(compared_nodes) + " nodes, " + fmt("%.2f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------

Outcome gain_representations() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> nd(10, 100);
  std::normal_distribution<double> g(0, 1);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t t = static_cast<std::size_t>(nd(rng));
    std::vector<double> x(t), r(t);
    const double shift = 2 * g(rng), slope = g(rng);
    const bool ties = rep % 4 == 0;
    for (std::size_t i = 0; i < t; ++i) {
      x[i] = ties ? std::round(4 * g(rng)) : g(rng);
      r[i] = shift + slope * x[i] + (x[i] > 0 ? 1.0 : 0.0) + g(rng);
    }
    std::vector<RowId> rows = testutil::iota_rows(t);
    std::stable_sort(rows.begin(), rows.end(), [&](RowId a, RowId b) { return x[a] < x[b]; });
    const KindBests b = scan_numeric_predictor(x, rows, r, Hyperparams{}, 0);

    double xbar = 0, rbar = 0;
    for (std::size_t i = 0; i < t; ++i) {
      xbar += x[i];
      rbar += r[i];
    }
    xbar /= static_cast<double>(t);
    rbar /= static_cast<double>(t);
    double var = 0;
    for (double v : x) var += (v - xbar) * (v - xbar);
    var /= static_cast<double>(t);

    if (b[ModelKind::Lin]) {
      double ip = 0;
      for (std::size_t i = 0; i < t; ++i) ip += r[i] * (x[i] - xbar) / std::sqrt(var);
      ip /= static_cast<double>(t);
      worst = std::max(worst, oracle::rel_diff(b[ModelKind::Lin]->gain, ip * ip + rbar * rbar, 1e-300));
    } else if (!ties) {
      o.pass = false;
      o.detail = "no LIN candidate on instance " + std::to_string(rep);
      return o;
    }
    if (b[ModelKind::Pcon]) {
      const NodeFit& p = *b[ModelKind::Pcon];
      const double q = static_cast<double>(p.n_left) / static_cast<double>(t);
      double ip = 0;
      for (std::size_t i = 0; i < t; ++i) ip += r[i] * ((x[i] <= p.threshold() ? 1.0 : 0.0) - q);
      ip /= static_cast<double>(t) * std::sqrt(q * (1 - q));
      worst = std::max(worst, oracle::rel_diff(p.gain, ip * ip + rbar * rbar, 1e-300));
    }
  }
  o.pass = worst <= 1e-8;
  o.detail = "1000 nodes, max rel err " + fmt("%.2e", worst);
  return o;
}

// ---------------------------------------------------------------------------

Outcome incremental_vs_naive() {
  Outcome o;
  double worst = 0.0;
  std::size_t pivots = 0;
  std::mt19937_64 rng(77);
  for (std::uint64_t inst = 0; inst < 200; ++inst) {
    const std::size_t n = 10 + rng() % 291;  // 10..300
    const Dataset d = testutil::random_dataset(inst + 5000, n, 1, 0, 2, inst % 2 ? 0.02 : 0.0);
    const std::vector<double>& r = d.response;
    double sum_sq = 0;
    for (double v : r) sum_sq += v * v;
    const double floor = 1e-12 * std::max(1.0, sum_sq);
    std::vector<double> xs, ys;
    for (RowId row : d.sorted_index[0]) {
      xs.push_back(d.column(0).values[row]);
      ys.push_back(r[row]);
    }
    Hyperparams hp;
    hp.min_leaf = 1 + static_cast<int>(inst % 5);
    auto obs = [&](const PivotReport& p) {
      double naive = 0;
      switch (p.kind) {
        case ModelKind::Pcon: naive = oracle::pcon_rss(xs, ys, p.pivot); break;
        case ModelKind::Plin: naive = oracle::plin_rss(xs, ys, p.pivot); break;
        case ModelKind::Blin: naive = oracle::blin_rss(xs, ys, p.pivot); break;
        default: return;
      }
      ++pivots;
      worst = std::max(worst, oracle::rel_diff(p.rss, naive, floor));
    };
    scan_numeric_predictor(d.column(0).values, d.sorted_index[0], r, hp, 0, obs);
  }
  o.pass = worst <= 1e-8 && pivots > 0;
  o.detail = "200 instances, " + std::to_string(pivots) + " pivot fits, max rel err " + fmt("%.2e", worst);
  return o;
}

// ---------------------------------------------------------------------------

Outcome gain_ratio_and_absorption() {
  Outcome o;
  std::size_t lin_checks = 0, blin_checks = 0, con_checks = 0;
  double worst_margin = INFINITY;
  for (std::uint64_t seed = 0; seed < 50 && o.pass; ++seed) {
    Dataset d;
    switch (seed % 3) {
      case 0: {
        const std::vector<double> beta{1.0, -2.0, 0.5};
        d = eval::gen_linear(400, 3, beta, 0.3, seed);
        break;
      }
      case 1: d = eval::gen_additive(400, seed, 0.2); break;
      default: d = testutil::random_dataset(seed, 400, 3, 1, 4, seed % 2 ? 0.02 : 0.0); break;
    }
    const Hyperparams hp;
    BuildOptions opt;
    opt.observer = [&](const NodeVisit& v) {
      const Selection full = select_model(d, v.view, v.residuals, hp);
      const NodeFit& best = full.best;
      if (best.kind == ModelKind::Lin && full.per_kind[ModelKind::Pcon]) {
        ++lin_checks;
        const double margin = best.gain - full.per_kind[ModelKind::Pcon]->gain / 4.0;
        worst_margin = std::min(worst_margin, margin);
        if (margin < -1e-12) {
          o.pass = false;
          o.detail = "LIN/PCON ratio violated, seed " + std::to_string(seed);
        }
      }
      if (best.kind == ModelKind::Blin && full.per_kind[ModelKind::Plin]) {
        ++blin_checks;
        if (best.gain < full.per_kind[ModelKind::Plin]->gain * 2.0 / 3.0 - 1e-12) {
          o.pass = false;
          o.detail = "BLIN/PLIN ratio violated, seed " + std::to_string(seed);
        }
      }
      if (best.kind == ModelKind::Con) {
        ++con_checks;
        std::vector<double> updated(v.residuals.begin(), v.residuals.end());
        for (RowId row : v.view.rows) updated[row] -= best.left.intercept;
        const Selection again = select_model(d, v.view, updated, hp);
        if (again.best.kind != ModelKind::Con) {
          o.pass = false;
          o.detail = "CON not absorbing, seed " + std::to_string(seed) + " reselected " +
                     std::string(kind_name(again.best.kind));
        }
      }
    };
    build_tree(d, hp, opt);
  }
  if (o.pass && (lin_checks == 0 || con_checks == 0)) {
    o.pass = false;
    o.detail = "criterion never exercised";
  }
  if (o.pass)
    o.detail = "50 datasets, " + std::to_string(lin_checks) + " LIN-vs-PCON nodes (min margin " +
               fmt("%.3g", worst_margin) + "), " + std::to_string(blin_checks) + " BLIN-vs-PLIN, " +
               std::to_string(con_checks) + " CON nodes";
  return o;
}

// ---------------------------------------------------------------------------

Outcome linear_convergence() {
  const auto t0 = Clock::now();
  Outcome o;
  const std::vector<double> beta{1.0, -2.0, 3.0, -1.0, 0.5};
  int improved = 0;
  bool pilot_wins = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset test = eval::gen_linear(20000, 5, beta, 0.0, seed + 100);  // noiseless f(X)
    const Dataset small = eval::gen_linear(500, 5, beta, 0.1, seed);
    const Dataset large = eval::gen_linear(8000, 5, beta, 0.1, seed + 50);
    Hyperparams cart;
    cart.allowed_kinds = KindSet::cart();
    auto excess = [&](const Dataset& train, const Hyperparams& hp) {
      return eval::mean_squared_error(predict_batch(build_tree(train, hp), test.features), test.response);
    };
    const double e_small = excess(small, Hyperparams{}), e_large = excess(large, Hyperparams{});
    const double c_small = excess(small, cart), c_large = excess(large, cart);
    if (e_large < 0.5 * e_small) ++improved;
    if (e_small > c_small || e_large > c_large) pilot_wins = false;
    detail += " s" + std::to_string(seed) + ":" + fmt("%.2e", e_small) + "->" + fmt("%.2e", e_large);
  }
  const double secs = seconds_since(t0);
  o.pass = improved >= 3 && pilot_wins && secs < 120.0;
  o.detail = std::to_string(improved) + "/5 seeds halve excess, PILOT<=CART " + (pilot_wins ? "all" : "not all") +
             ", " + fmt("%.1f", secs) + " s;" + detail;
  return o;
}

// ---------------------------------------------------------------------------

Outcome truncation_safety() {
  Outcome o;
  const Dataset d = testutil::random_dataset(8, 3000, 4, 1, 5);
  const PilotTree t = build_tree(d);
  const double lo = t.offset - 3 * t.bound_B, hi = t.offset + 3 * t.bound_B;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_int_distribution<int> lvl(-1, 6);
  const double extremes[] = {-1e9, 1e9, -1e9 + 0.5, 1e9 - 0.5, 0.0, 1.0};
  std::size_t bad = 0;
  std::vector<double> rec(t.columns.size());
  for (int i = 0; i < 100000; ++i) {
    for (std::size_t j = 0; j < rec.size(); ++j)
      rec[j] = t.columns[j].is_numeric() ? extremes[pick(rng)] : std::min(lvl(rng), 4);
    const double p = predict_encoded(t, rec);
    if (!std::isfinite(p) || p < lo || p > hi) ++bad;
  }
  o.pass = bad == 0;
  o.detail = "1e5 points, " + std::to_string(bad) + " outside [" + fmt("%.4g", lo) + ", " + fmt("%.4g", hi) + "]";
  return o;
}

// ---------------------------------------------------------------------------

FeatureTable wide_features(std::size_t n, std::uint64_t seed, std::vector<double>& y) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g(0, 0.1);
  std::vector<std::vector<double>> cols(10, std::vector<double>(n));
  y.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 10; ++j) cols[j][i] = u(rng);
    double f = cols[0][i] > 0.5 ? 1.0 : 0.0;
    for (std::size_t j = 0; j < 10; ++j) f += std::sin(3.0 * cols[j][i] + static_cast<double>(j));
    y[i] = f + g(rng);
  }
  std::vector<Column> c;
  for (std::size_t j = 0; j < 10; ++j) c.push_back(testutil::numeric_column("x" + std::to_string(j + 1), cols[j]));
  return testutil::table_of(std::move(c));
}

Outcome complexity_scaling() {
  Outcome o;
  Hyperparams hp;
  hp.max_depth = 6;
  std::map<std::size_t, std::pair<double, double>> timing;  // n -> (build, presort+build)
  for (std::size_t n : {100000u, 200000u}) {
    std::vector<double> y;
    const FeatureTable x = wide_features(n, 7, y);
    std::vector<double> build, total;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = Clock::now();
      const Dataset d = make_dataset(x, y, "y");
      const auto t1 = Clock::now();
      build_tree(d, hp);
      const auto t2 = Clock::now();
      build.push_back(std::chrono::duration<double>(t2 - t1).count());
      total.push_back(std::chrono::duration<double>(t2 - t0).count());
    }
    timing[n] = {median(build), median(total)};
  }
  const double r_build = timing[200000].first / timing[100000].first;
  const double r_total = timing[200000].second / timing[100000].second;
  o.pass = r_build <= 2.6 && r_total <= 2.8;
  o.detail = "build " + fmt("%.3f", timing[100000].first) + "s -> " + fmt("%.3f", timing[200000].first) +
             "s (x" + fmt("%.2f", r_build) + "), with presort x" + fmt("%.2f", r_total);
  return o;
}

// ---------------------------------------------------------------------------

Outcome shift_equivariance() {
  Outcome o;
  double worst_pred = 0.0, worst_slope = 0.0;
  std::size_t nodes = 0;
  for (std::uint64_t seed = 0; seed < 5 && o.pass; ++seed) {
    const Dataset d = seed < 3 ? testutil::random_dataset(seed, 500, 3, 1) : eval::gen_additive(500, seed);
    std::vector<double> shifted = d.response;
    for (double& v : shifted) v += 100.0;
    const Dataset d2 = make_dataset(d.features, shifted, d.target);
    const PilotTree a = build_tree(d), b = build_tree(d2);
    if (a.nodes.size() != b.nodes.size()) {
      o.pass = false;
      o.detail = "node count differs, seed " + std::to_string(seed);
      break;
    }
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      const NodeFit &fa = a.nodes[i].fit, &fb = b.nodes[i].fit;
      ++nodes;
      if (fa.kind != fb.kind || fa.predictor != fb.predictor || fa.pivot != fb.pivot ||
          a.nodes[i].left != b.nodes[i].left || a.nodes[i].right != b.nodes[i].right) {
        o.pass = false;
        o.detail = "structure differs at node " + std::to_string(i) + ", seed " + std::to_string(seed);
        break;
      }
      worst_slope = std::max(worst_slope, std::abs(fa.left.slope - fb.left.slope));
      if (fa.right) worst_slope = std::max(worst_slope, std::abs(fa.right->slope - fb.right->slope));
    }
    const auto pa = predict_batch(a, d.features), pb = predict_batch(b, d.features);
    for (std::size_t i = 0; i < pa.size(); ++i) worst_pred = std::max(worst_pred, std::abs(pb[i] - pa[i] - 100.0));
  }
  if (o.pass) {
    o.pass = worst_pred <= 1e-9 && worst_slope <= 1e-9;
    o.detail = std::to_string(nodes) + " nodes match; max slope diff " + fmt("%.1e", worst_slope) +
               ", max |shift-100| " + fmt("%.1e", worst_pred);
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome deep_round_trip() {
  Outcome o;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g(0, 0.02);
  const std::size_t n = 30000;
  std::vector<double> x1(n), x2(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = u(rng);
    x2[i] = u(rng);
    y[i] = std::sin(60 * x1[i]) * std::cos(45 * x2[i]) + (x1[i] * 37 - std::floor(x1[i] * 37)) + g(rng);
  }
  const Dataset d = testutil::numeric_dataset({x1, x2}, y);
  const PilotTree t = build_tree(d);
  if (t.stats.max_depth != 12) {
    o.pass = false;
    o.detail = "tree depth " + std::to_string(t.stats.max_depth) + ", wanted 12";
    return o;
  }
  const auto path = std::filesystem::temp_directory_path() / "pilot_acceptance_depth12.json";
  save_model(t, path);
  const PilotTree back = load_model(path);
  std::filesystem::remove(path);

  std::vector<double> q1(20000), q2(20000);
  for (std::size_t i = 0; i < q1.size(); ++i) {
    q1[i] = 1.4 * u(rng) - 0.2;
    q2[i] = 1.4 * u(rng) - 0.2;
  }
  const FeatureTable probe = testutil::table_of(
      {testutil::numeric_column("x1", q1), testutil::numeric_column("x2", q2)});
  const auto a1 = predict_batch(t, d.features), b1 = predict_batch(back, d.features);
  const auto a2 = predict_batch(t, probe), b2 = predict_batch(back, probe);
  const bool same = std::memcmp(a1.data(), b1.data(), a1.size() * sizeof(double)) == 0 &&
                    std::memcmp(a2.data(), b2.data(), a2.size() * sizeof(double)) == 0;
  o.pass = same;
  o.detail = std::to_string(t.nodes.size()) + " nodes, depth 12, " + std::to_string(a1.size() + a2.size()) +
             " predictions " + (same ? "bit-identical" : "differ");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"cart-oracle-equivalence", cart_oracle_equivalence},
      {"gain-representations", gain_representations},
      {"incremental-vs-naive-scan", incremental_vs_naive},
      {"bic-gain-ratio-and-con-absorption", gain_ratio_and_absorption},
      {"linear-convergence-vs-cart", linear_convergence},
      {"truncation-safety", truncation_safety},
      {"complexity-scaling", complexity_scaling},
      {"shift-equivariance", shift_equivariance},
      {"depth12-save-load-roundtrip", deep_round_trip},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
