#include "pilot/model_scan.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "pilot/error.hpp"

namespace pilot {

std::string_view kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Con: return "CON";
    case ModelKind::Lin: return "LIN";
    case ModelKind::Pcon: return "PCON";
    case ModelKind::Blin: return "BLIN";
    case ModelKind::Plin: return "PLIN";
  }
  return "?";
}

ModelKind parse_kind(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (ModelKind k : kAllKinds)
    if (kind_name(k) == upper) return k;
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected con, lin, pcon, blin, plin)");
}

KindSet::KindSet(std::initializer_list<ModelKind> kinds) : bits_(1u) {
  for (ModelKind k : kinds) insert(k);
}

std::vector<ModelKind> KindSet::kinds() const {
  std::vector<ModelKind> out;
  for (ModelKind k : kAllKinds)
    if (contains(k)) out.push_back(k);
  return out;
}

void Hyperparams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (max_depth < 1) fail("max_depth must be >= 1 (got " + std::to_string(max_depth) + ")");
  if (min_fit < 1) fail("min_fit must be >= 1 (got " + std::to_string(min_fit) + ")");
  if (min_leaf < 1) fail("min_leaf must be >= 1 (got " + std::to_string(min_leaf) + ")");
  if (!allowed_kinds.contains(ModelKind::Con)) fail("allowed_kinds must contain CON");
  if (min_unique_for_lin_blin < 2) fail("min_unique_for_lin_blin must be >= 2");
  if (min_unique_per_child_for_plin < 2) fail("min_unique_per_child_for_plin must be >= 2");
  if (!(rss_floor_scale > 0.0) || !std::isfinite(rss_floor_scale)) fail("rss_floor_scale must be positive");
  if (max_lin_chain < 0) fail("max_lin_chain must be >= 0");
  if (!(min_rel_gain_lin >= 0.0) || !std::isfinite(min_rel_gain_lin)) fail("min_rel_gain_lin must be >= 0");
}

SplitScanState::Hinge SplitScanState::hinge(double knot) const {
  const Moments r = right();
  Hinge h{};
  if (r.n <= 0) return h;
  const double mean = r.sx / r.n;
  h.s1 = r.sx - r.n * knot;
  h.sh = r.cxx() + r.n * (mean - knot) * (mean - knot);
  h.sx = h.sh + knot * h.s1;
  h.sy = r.sxy - knot * r.sy;
  return h;
}

PieceFit fit_con(const Moments& m) {
  PieceFit f;
  if (m.n <= 0) return f;
  f.piece.intercept = m.sy / m.n;
  f.rss = std::max(0.0, m.cyy());
  return f;
}

std::optional<PieceFit> fit_lin(const Moments& m) {
  if (m.n < 2) return std::nullopt;
  const double cxx = m.cxx();
  if (!(cxx > 0.0) || cxx <= kSingularTol * m.sxx) return std::nullopt;
  const double cxy = m.cxy();
  PieceFit f;
  f.piece.slope = cxy / cxx;
  f.piece.intercept = (m.sy - f.piece.slope * m.sx) / m.n;
  f.rss = std::max(0.0, m.cyy() - cxy * cxy / cxx);
  return f;
}

std::optional<BrokenFit> fit_blin(const SplitScanState& state, double knot) {
  const Moments& t = state.total();
  if (t.n < 3) return std::nullopt;
  const auto h = state.hinge(knot);
  // Column-centered normal equations in (x, h); the intercept is recovered from the means.
  const double a11 = t.cxx();
  const double a12 = h.sx - t.sx * h.s1 / t.n;
  const double a22 = h.sh - h.s1 * h.s1 / t.n;
  if (!(a11 > 0.0) || !(a22 > 0.0)) return std::nullopt;
  const double det = a11 * a22 - a12 * a12;
  if (!(det > kSingularTol * a11 * a22)) return std::nullopt;
  const double b1 = t.cxy();
  const double b2 = h.sy - t.sy * h.s1 / t.n;
  // Hinge orthogonalized against x; the rss drops from the LIN fit by e2^2 / s22.
  const double s22 = a22 - a12 * a12 / a11;
  const double e2 = b2 - a12 * b1 / a11;
  if (!(s22 > 0.0)) return std::nullopt;
  const double beta_h = e2 / s22;
  const double beta_x = (b1 - a12 * beta_h) / a11;
  const double intercept = (t.sy - beta_x * t.sx - beta_h * h.s1) / t.n;

  BrokenFit f;
  f.left = {intercept, beta_x};
  f.right = {intercept - beta_h * knot, beta_x + beta_h};
  f.rss = std::max(0.0, t.cyy() - b1 * b1 / a11 - e2 * beta_h);
  return f;
}

double floored_rss(double rss, double sum_sq, double floor_scale) {
  return std::max(rss, floor_scale * std::max(1.0, sum_sq));
}

double bic_score(double rss, std::size_t t, int v, double sum_sq, double floor_scale) {
  const double n = static_cast<double>(t);
  return n * std::log(floored_rss(rss, sum_sq, floor_scale) / n) + v * std::log(n);
}

bool better_fit(const NodeFit& a, const NodeFit& b) {
  if (a.bic != b.bic) return a.bic < b.bic;
  const int va = dof(a.kind), vb = dof(b.kind);
  if (va != vb) return va < vb;
  if (a.predictor != b.predictor) return a.predictor < b.predictor;
  return a.pivot_key < b.pivot_key;
}

void KindBests::offer(const NodeFit& fit) {
  auto& slot = (*this)[fit.kind];
  if (!slot || better_fit(fit, *slot)) slot = fit;
}

void KindBests::merge(const KindBests& other) {
  for (const auto& f : other.by_kind)
    if (f) offer(*f);
}

namespace {

// Maps a piece fitted on shifted data (x - x0, y - y0) back to raw coordinates.
LinearPiece unshift(const LinearPiece& p, double x0, double y0) {
  return {p.intercept + y0 - p.slope * x0, p.slope};
}

void set_scores(NodeFit& f, double sum_sq, const Hyperparams& hp) {
  f.rss_before = sum_sq;
  f.bic = bic_score(f.rss_after, f.n_cases, dof(f.kind), sum_sq, hp.rss_floor_scale);
  f.gain = (sum_sq - f.rss_after) / static_cast<double>(f.n_cases);
}

struct Candidate {
  double score = 0.0;  // floored rss
  bool valid = false;
  std::size_t k = 0;  // last left position
  double rss = 0.0;
  LinearPiece left, right;
};

void consider(Candidate& best, double floored, std::size_t k, double rss, LinearPiece l, LinearPiece r) {
  if (!best.valid || floored < best.score) best = {floored, true, k, rss, l, r};
}

}  // namespace

KindBests scan_numeric_predictor(std::span<const double> x, std::span<const RowId> rows,
                                 std::span<const double> residuals, const Hyperparams& hp, int predictor,
                                 const PivotObserver& observer) {
  KindBests out;
  const std::size_t t = rows.size();
  if (t == 0) return out;
  const KindSet& kinds = hp.allowed_kinds;
  const bool want_lin = kinds.contains(ModelKind::Lin);
  const bool want_pcon = kinds.contains(ModelKind::Pcon);
  const bool want_blin = kinds.contains(ModelKind::Blin);
  const bool want_plin = kinds.contains(ModelKind::Plin);
  if (!(want_lin || want_pcon || want_blin || want_plin)) return out;

  thread_local std::vector<double> xs, ys;
  xs.resize(t);
  ys.resize(t);
  double x0 = 0.0, y0 = 0.0, sum_sq = 0.0;
  std::size_t unique = 0;
  for (std::size_t k = 0; k < t; ++k) {
    const RowId r = rows[k];
    xs[k] = x[r];
    ys[k] = residuals[r];
    x0 += xs[k];
    y0 += ys[k];
    sum_sq += ys[k] * ys[k];
    if (k == 0 || xs[k] != xs[k - 1]) ++unique;
  }
  x0 /= static_cast<double>(t);
  y0 /= static_cast<double>(t);

  Moments total;
  for (std::size_t k = 0; k < t; ++k) total.add(xs[k] - x0, ys[k] - y0);
  const double floor_sum = sum_sq;
  auto floor = [&](double rss) { return floored_rss(rss, floor_sum, hp.rss_floor_scale); };

  auto make_fit = [&](ModelKind kind, double rss) {
    NodeFit f;
    f.kind = kind;
    f.predictor = predictor;
    f.n_cases = t;
    f.rss_after = rss;
    set_scores(f, sum_sq, hp);
    return f;
  };

  const bool lin_eligible = unique >= static_cast<std::size_t>(hp.min_unique_for_lin_blin);
  if (want_lin && lin_eligible) {
    if (auto lin = fit_lin(total)) {
      NodeFit f = make_fit(ModelKind::Lin, lin->rss);
      f.left = unshift(lin->piece, x0, y0);
      out.offer(f);
    }
  }

  const std::size_t n_leaf = static_cast<std::size_t>(hp.min_leaf);
  if (!(want_pcon || want_blin || want_plin) || t < 2 * n_leaf || unique < 2) return out;

  const std::size_t plin_min = static_cast<std::size_t>(hp.min_unique_per_child_for_plin);
  Candidate pcon, blin, plin;
  SplitScanState state(total);
  std::size_t left_unique = 0;
  for (std::size_t k = 0; k + 1 < t; ++k) {
    const double xk = xs[k] - x0;
    state.move_left(xk, ys[k] - y0);
    if (k == 0 || xs[k] != xs[k - 1]) ++left_unique;
    if (xs[k] == xs[k + 1]) continue;  // pivots sit between distinct values
    const std::size_t nl = k + 1, nr = t - nl;
    if (nr < n_leaf) break;
    if (nl < n_leaf) continue;

    const Moments& L = state.left();
    const Moments R = state.right();
    if (want_pcon) {
      const auto cl = fit_con(L), cr = fit_con(R);
      const double rss = cl.rss + cr.rss;
      consider(pcon, floor(rss), k, rss, cl.piece, cr.piece);
      if (observer) observer({ModelKind::Pcon, nl, xs[k], rss});
    }
    if (want_plin && left_unique >= plin_min && unique - left_unique >= plin_min) {
      const auto fl = fit_lin(L), fr = fit_lin(R);
      if (fl && fr) {
        const double rss = fl->rss + fr->rss;
        consider(plin, floor(rss), k, rss, fl->piece, fr->piece);
        if (observer) observer({ModelKind::Plin, nl, xs[k], rss});
      }
    }
    if (want_blin && lin_eligible) {
      if (auto fb = fit_blin(state, xk)) {
        consider(blin, floor(fb->rss), k, fb->rss, fb->left, fb->right);
        if (observer) observer({ModelKind::Blin, nl, xs[k], fb->rss});
      }
    }
  }

  auto emit = [&](ModelKind kind, const Candidate& c) {
    if (!c.valid) return;
    NodeFit f = make_fit(kind, c.rss);
    f.pivot = xs[c.k];
    f.pivot_key = xs[c.k];
    f.left = unshift(c.left, x0, y0);
    f.right = unshift(c.right, x0, y0);
    f.n_left = c.k + 1;
    f.n_right = t - f.n_left;
    out.offer(f);
  };
  emit(ModelKind::Pcon, pcon);
  emit(ModelKind::Blin, blin);
  emit(ModelKind::Plin, plin);
  return out;
}

KindBests scan_categorical_predictor(std::span<const LevelId> codes, std::size_t n_levels,
                                     std::span<const RowId> rows, std::span<const double> residuals,
                                     const Hyperparams& hp, int predictor) {
  KindBests out;
  const std::size_t t = rows.size();
  if (t == 0 || !hp.allowed_kinds.contains(ModelKind::Pcon)) return out;

  std::vector<double> count(n_levels, 0.0), sum(n_levels, 0.0);
  double y0 = 0.0, sum_sq = 0.0;
  for (RowId r : rows) {
    const double y = residuals[r];
    y0 += y;
    sum_sq += y * y;
  }
  y0 /= static_cast<double>(t);
  double cyy = 0.0;
  std::vector<double> csum(n_levels, 0.0);  // sums of y - y0
  for (RowId r : rows) {
    const auto c = static_cast<std::size_t>(codes[r]);
    const double y = residuals[r];
    count[c] += 1;
    sum[c] += y;
    csum[c] += y - y0;
    cyy += (y - y0) * (y - y0);
  }

  std::vector<LevelId> present;
  for (std::size_t c = 0; c < n_levels; ++c)
    if (count[c] > 0) present.push_back(static_cast<LevelId>(c));
  if (present.size() < 2) return out;
  std::stable_sort(present.begin(), present.end(),
                   [&](LevelId a, LevelId b) { return sum[a] / count[a] < sum[b] / count[b]; });

  const double n_leaf = hp.min_leaf;
  bool found = false;
  double best_score = 0.0, best_rss = 0.0, best_nl = 0.0, best_sl = 0.0;
  std::size_t best_q = 0;
  double nl = 0.0, sl = 0.0;
  for (std::size_t q = 1; q < present.size(); ++q) {
    nl += count[present[q - 1]];
    sl += csum[present[q - 1]];
    const double nr = static_cast<double>(t) - nl;
    if (nl < n_leaf || nr < n_leaf) continue;
    const double sr = -sl;
    const double rss = std::max(0.0, cyy - sl * sl / nl - sr * sr / nr);
    const double score = floored_rss(rss, sum_sq, hp.rss_floor_scale);
    if (!found || score < best_score) {
      found = true;
      best_score = score;
      best_rss = rss;
      best_q = q;
      best_nl = nl;
      best_sl = sl;
    }
  }
  if (!found) return out;

  NodeFit f;
  f.kind = ModelKind::Pcon;
  f.predictor = predictor;
  f.n_cases = t;
  f.rss_after = best_rss;
  set_scores(f, sum_sq, hp);
  LevelSet left(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(best_q));
  std::sort(left.begin(), left.end());
  f.pivot = std::move(left);
  f.pivot_key = static_cast<double>(best_q);
  const double best_nr = static_cast<double>(t) - best_nl;
  f.left = {y0 + best_sl / best_nl, 0.0};
  f.right = LinearPiece{y0 - best_sl / best_nr, 0.0};
  f.n_left = static_cast<std::size_t>(best_nl);
  f.n_right = t - f.n_left;
  out.offer(f);
  return out;
}

namespace {

KindBests scan_predictor(const Dataset& data, const NodeView& node, std::span<const double> residuals,
                         const Hyperparams& hp, std::size_t j) {
  const Column& col = data.column(j);
  if (col.meta.is_numeric())
    return scan_numeric_predictor(col.values, node.ordered[j], residuals, hp, static_cast<int>(j));
  return scan_categorical_predictor(col.codes, col.meta.levels.size(), node.rows, residuals, hp,
                                    static_cast<int>(j));
}

}  // namespace

Selection select_model(const Dataset& data, const NodeView& node, std::span<const double> residuals,
                       const Hyperparams& hp, int threads) {
  const std::size_t t = node.rows.size();
  const std::size_t p = data.n_cols();
  Selection sel;

  double mean = 0.0, sum_sq = 0.0;
  for (RowId r : node.rows) {
    mean += residuals[r];
    sum_sq += residuals[r] * residuals[r];
  }
  mean /= static_cast<double>(std::max<std::size_t>(t, 1));
  double cyy = 0.0;
  for (RowId r : node.rows) cyy += (residuals[r] - mean) * (residuals[r] - mean);

  NodeFit con;
  con.kind = ModelKind::Con;
  con.n_cases = t;
  con.left = {mean, 0.0};
  con.rss_after = cyy;
  if (t > 0) set_scores(con, sum_sq, hp);
  sel.per_kind.offer(con);

  if (t > 0) {
    std::vector<KindBests> per_predictor(p);
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), p);
    if (workers <= 1) {
      for (std::size_t j = 0; j < p; ++j) per_predictor[j] = scan_predictor(data, node, residuals, hp, j);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t j = w; j < p; j += workers)
            per_predictor[j] = scan_predictor(data, node, residuals, hp, j);
        });
    }
    for (auto& bests : per_predictor) {
      // Rescore against the node-level sums so every candidate shares one floor.
      for (auto& f : bests.by_kind)
        if (f) set_scores(*f, sum_sq, hp);
      sel.per_kind.merge(bests);
    }
  }

  sel.best = *sel.per_kind[ModelKind::Con];
  for (const auto& f : sel.per_kind.by_kind)
    if (f && better_fit(*f, sel.best)) sel.best = *f;
  return sel;
}

}  // namespace pilot
