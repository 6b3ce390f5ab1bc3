#include "pilot/interpret.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pilot/error.hpp"

namespace pilot {

using nlohmann::json;

std::vector<double> feature_importance(const PilotTree& tree) {
  std::vector<double> imp(tree.columns.size(), 0.0);
  for (const auto& node : tree.nodes) {
    if (node.fit.kind == ModelKind::Con || node.fit.predictor < 0) continue;
    imp[static_cast<std::size_t>(node.fit.predictor)] += tree.weight(node) * std::max(0.0, node.fit.gain);
  }
  double total = 0.0;
  for (double v : imp) total += v;
  if (total > 0.0)
    for (double& v : imp) v /= total;
  return imp;
}

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string piece_text(const LinearPiece& p) { return "(" + g6(p.intercept) + ", " + g6(p.slope) + ")"; }

void render_node(const PilotTree& tree, std::int32_t id, int indent, const char* tag, std::string& out) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  const NodeFit& fit = node.fit;
  out.append(static_cast<std::size_t>(indent) * 2, ' ');
  out += tag;
  out += kind_name(fit.kind);
  if (fit.kind == ModelKind::Con) {
    out += " value=" + g6(fit.left.intercept) + " n=" + std::to_string(fit.n_cases) + "\n";
    return;
  }
  const ColumnMeta& col = tree.columns[static_cast<std::size_t>(fit.predictor)];
  out += " x=" + col.name;
  if (fit.kind == ModelKind::Lin) {
    out += " coef=" + piece_text(fit.left) + " range=[" + g6(node.x_min) + ", " + g6(node.x_max) + "]";
  } else {
    if (fit.is_numeric_pivot()) {
      out += " pivot<=" + g6(fit.threshold());
    } else {
      out += " pivot in {";
      const auto& set = fit.level_set();
      for (std::size_t i = 0; i < set.size(); ++i) {
        if (i) out += ",";
        out += col.levels.at(static_cast<std::size_t>(set[i]));
      }
      out += "}";
    }
    out += " left=" + piece_text(fit.left) + " right=" + piece_text(*fit.right);
    if (col.is_numeric()) out += " range=[" + g6(node.x_min) + ", " + g6(node.x_max) + "]";
  }
  out += " n=" + std::to_string(fit.n_cases) + "\n";
  if (fit.kind == ModelKind::Lin) {
    render_node(tree, node.left, indent + 1, "", out);
  } else {
    render_node(tree, node.left, indent + 1, "L: ", out);
    render_node(tree, node.right, indent + 1, "R: ", out);
  }
}

json piece_json(const LinearPiece& p) { return json::array({p.intercept, p.slope}); }

json node_json(const PilotTree& tree, std::int32_t id) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  const NodeFit& fit = node.fit;
  json j;
  j["kind"] = std::string(kind_name(fit.kind));
  j["predictor"] = fit.predictor;
  if (fit.is_numeric_pivot()) j["pivot"] = fit.threshold();
  if (std::holds_alternative<LevelSet>(fit.pivot)) j["pivot_set"] = fit.level_set();
  j["pivot_key"] = fit.pivot_key;
  j["coef_l"] = piece_json(fit.left);
  if (fit.right) j["coef_r"] = piece_json(*fit.right);
  j["range"] = json::array({node.x_min, node.x_max});
  j["n"] = fit.n_cases;
  j["n_left"] = fit.n_left;
  j["n_right"] = fit.n_right;
  j["bic"] = fit.bic;
  j["rss_before"] = fit.rss_before;
  j["rss_after"] = fit.rss_after;
  j["gain"] = fit.gain;
  j["depth"] = node.depth;
  j["stop"] = std::string(stop_name(node.stop));
  json children = json::array();
  if (node.left >= 0) children.push_back(node_json(tree, node.left));
  if (node.right >= 0) children.push_back(node_json(tree, node.right));
  j["children"] = std::move(children);
  return j;
}

json hyperparams_json(const Hyperparams& hp) {
  json kinds = json::array();
  for (ModelKind k : hp.allowed_kinds.kinds()) kinds.push_back(std::string(kind_name(k)));
  return {{"max_depth", hp.max_depth},
          {"min_fit", hp.min_fit},
          {"min_leaf", hp.min_leaf},
          {"allowed_kinds", kinds},
          {"min_unique_for_lin_blin", hp.min_unique_for_lin_blin},
          {"min_unique_per_child_for_plin", hp.min_unique_per_child_for_plin},
          {"rss_floor_scale", hp.rss_floor_scale},
          {"max_lin_chain", hp.max_lin_chain},
          {"min_rel_gain_lin", hp.min_rel_gain_lin}};
}

// Field access with the JSON path in every error message.
class Reader {
 public:
  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw FormatError("model file: at " + (path.empty() ? std::string("/") : path) + ": " + what);
  }

  static const json& field(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) fail(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(path, std::string("missing field '") + key + "'");
    return *it;
  }

  static double number(const json& obj, const std::string& path, const char* key) {
    const json& v = field(obj, path, key);
    if (!v.is_number()) fail(path + "/" + key, "expected a number");
    return v.get<double>();
  }

  template <typename Int>
  static Int integer(const json& obj, const std::string& path, const char* key) {
    const json& v = field(obj, path, key);
    if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
    return v.get<Int>();
  }

  static std::string string(const json& obj, const std::string& path, const char* key) {
    const json& v = field(obj, path, key);
    if (!v.is_string()) fail(path + "/" + key, "expected a string");
    return v.get<std::string>();
  }

  static LinearPiece piece(const json& obj, const std::string& path, const char* key) {
    const json& v = field(obj, path, key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(path + "/" + key, "expected [intercept, slope]");
    return {v[0].get<double>(), v[1].get<double>()};
  }
};

StopReason parse_stop(const std::string& s, const std::string& path) {
  for (StopReason r : {StopReason::None, StopReason::MaxDepth, StopReason::MinFit, StopReason::ConSelected,
                       StopReason::LinChainCap})
    if (stop_name(r) == s) return r;
  Reader::fail(path, "unknown stop reason '" + s + "'");
}

std::int32_t read_node(const json& j, const std::string& path, PilotTree& tree) {
  TreeNode node;
  NodeFit& fit = node.fit;
  try {
    fit.kind = parse_kind(Reader::string(j, path, "kind"));
  } catch (const ConfigError& e) {
    Reader::fail(path + "/kind", e.what());
  }
  fit.predictor = Reader::integer<int>(j, path, "predictor");
  const int p = static_cast<int>(tree.columns.size());
  if (fit.kind == ModelKind::Con ? fit.predictor != -1 : (fit.predictor < 0 || fit.predictor >= p))
    Reader::fail(path + "/predictor", "predictor index out of range");
  fit.pivot_key = Reader::number(j, path, "pivot_key");
  fit.left = Reader::piece(j, path, "coef_l");
  if (is_split(fit.kind)) {
    fit.right = Reader::piece(j, path, "coef_r");
    const ColumnMeta& col = tree.columns[static_cast<std::size_t>(fit.predictor)];
    if (col.is_numeric()) {
      fit.pivot = Reader::number(j, path, "pivot");
    } else {
      const json& set = Reader::field(j, path, "pivot_set");
      if (!set.is_array()) Reader::fail(path + "/pivot_set", "expected an array");
      LevelSet levels;
      for (const auto& v : set) {
        if (!v.is_number_integer() || v.get<LevelId>() < 0 ||
            v.get<std::size_t>() >= col.levels.size())
          Reader::fail(path + "/pivot_set", "invalid level id");
        levels.push_back(v.get<LevelId>());
      }
      if (!std::is_sorted(levels.begin(), levels.end())) Reader::fail(path + "/pivot_set", "level ids not sorted");
      fit.pivot = std::move(levels);
    }
  }
  const json& range = Reader::field(j, path, "range");
  if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
    Reader::fail(path + "/range", "expected [min, max]");
  node.x_min = range[0].get<double>();
  node.x_max = range[1].get<double>();
  fit.n_cases = Reader::integer<std::size_t>(j, path, "n");
  fit.n_left = Reader::integer<std::size_t>(j, path, "n_left");
  fit.n_right = Reader::integer<std::size_t>(j, path, "n_right");
  fit.bic = Reader::number(j, path, "bic");
  fit.rss_before = Reader::number(j, path, "rss_before");
  fit.rss_after = Reader::number(j, path, "rss_after");
  fit.gain = Reader::number(j, path, "gain");
  node.depth = Reader::integer<int>(j, path, "depth");
  node.stop = parse_stop(Reader::string(j, path, "stop"), path + "/stop");

  const json& children = Reader::field(j, path, "children");
  if (!children.is_array()) Reader::fail(path + "/children", "expected an array");
  const std::size_t want = fit.kind == ModelKind::Con ? 0 : fit.kind == ModelKind::Lin ? 1 : 2;
  if (children.size() != want)
    Reader::fail(path + "/children", "expected " + std::to_string(want) + " children for " +
                                         std::string(kind_name(fit.kind)));

  const auto idx = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.push_back(std::move(node));
  if (want >= 1) {
    const std::int32_t l = read_node(children[0], path + "/children/0", tree);
    tree.nodes[static_cast<std::size_t>(idx)].left = l;
  }
  if (want == 2) {
    const std::int32_t r = read_node(children[1], path + "/children/1", tree);
    tree.nodes[static_cast<std::size_t>(idx)].right = r;
  }
  return idx;
}

Hyperparams read_hyperparams(const json& j, const std::string& path) {
  Hyperparams hp;
  hp.max_depth = Reader::integer<int>(j, path, "max_depth");
  hp.min_fit = Reader::integer<int>(j, path, "min_fit");
  hp.min_leaf = Reader::integer<int>(j, path, "min_leaf");
  const json& kinds = Reader::field(j, path, "allowed_kinds");
  if (!kinds.is_array()) Reader::fail(path + "/allowed_kinds", "expected an array");
  KindSet set({ModelKind::Con});
  for (const auto& k : kinds) {
    if (!k.is_string()) Reader::fail(path + "/allowed_kinds", "expected kind names");
    try {
      set.insert(parse_kind(k.get<std::string>()));
    } catch (const ConfigError& e) {
      Reader::fail(path + "/allowed_kinds", e.what());
    }
  }
  hp.allowed_kinds = set;
  hp.min_unique_for_lin_blin = Reader::integer<int>(j, path, "min_unique_for_lin_blin");
  hp.min_unique_per_child_for_plin = Reader::integer<int>(j, path, "min_unique_per_child_for_plin");
  hp.rss_floor_scale = Reader::number(j, path, "rss_floor_scale");
  hp.max_lin_chain = Reader::integer<int>(j, path, "max_lin_chain");
  hp.min_rel_gain_lin = Reader::number(j, path, "min_rel_gain_lin");
  try {
    hp.validate();
  } catch (const ConfigError& e) {
    Reader::fail(path, e.what());
  }
  return hp;
}

}  // namespace

std::string render_text(const PilotTree& tree) {
  std::string out;
  if (!tree.nodes.empty()) render_node(tree, 0, 0, "", out);
  return out;
}

std::string model_to_json(const PilotTree& tree) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["target"] = tree.target;
  doc["hyperparams"] = hyperparams_json(tree.hp);
  doc["offset"] = tree.offset;
  doc["bound_B"] = tree.bound_B;
  doc["n_train"] = tree.stats.n_train;
  doc["train_rss"] = tree.stats.train_rss;
  json cols = json::array();
  for (const auto& c : tree.columns) {
    json col = {{"name", c.name}, {"kind", c.is_numeric() ? "numeric" : "categorical"}};
    if (!c.is_numeric()) col["levels"] = c.levels;
    cols.push_back(std::move(col));
  }
  doc["columns"] = std::move(cols);
  doc["root"] = tree.nodes.empty() ? json() : node_json(tree, 0);
  return doc.dump(1) + "\n";
}

PilotTree model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model file: malformed JSON at byte ") + std::to_string(e.byte) + ": " +
                      e.what());
  }
  const int version = Reader::integer<int>(doc, "", "schema_version");
  if (version != kSchemaVersion)
    Reader::fail("/schema_version", "unsupported schema_version " + std::to_string(version) + " (expected " +
                                        std::to_string(kSchemaVersion) + ")");
  PilotTree tree;
  tree.target = Reader::string(doc, "", "target");
  tree.hp = read_hyperparams(Reader::field(doc, "", "hyperparams"), "/hyperparams");
  tree.offset = Reader::number(doc, "", "offset");
  tree.bound_B = Reader::number(doc, "", "bound_B");
  tree.stats.n_train = Reader::integer<std::size_t>(doc, "", "n_train");
  tree.stats.train_rss = Reader::number(doc, "", "train_rss");

  const json& cols = Reader::field(doc, "", "columns");
  if (!cols.is_array()) Reader::fail("/columns", "expected an array");
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const std::string path = "/columns/" + std::to_string(i);
    ColumnMeta meta;
    meta.name = Reader::string(cols[i], path, "name");
    const std::string kind = Reader::string(cols[i], path, "kind");
    if (kind == "numeric") {
      meta.kind = ColumnKind::Numeric;
    } else if (kind == "categorical") {
      meta.kind = ColumnKind::Categorical;
      const json& levels = Reader::field(cols[i], path, "levels");
      if (!levels.is_array()) Reader::fail(path + "/levels", "expected an array");
      for (const auto& l : levels) {
        if (!l.is_string()) Reader::fail(path + "/levels", "expected strings");
        meta.levels.push_back(l.get<std::string>());
      }
    } else {
      Reader::fail(path + "/kind", "unknown column kind '" + kind + "'");
    }
    tree.columns.push_back(std::move(meta));
  }
  read_node(Reader::field(doc, "", "root"), "/root", tree);

  auto& st = tree.stats;
  st.nodes = tree.nodes.size();
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) ++st.leaves;
    st.max_depth = std::max(st.max_depth, node.depth + (is_split(node.fit.kind) ? 1 : 0));
  }
  return tree;
}

void save_model(const PilotTree& tree, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file '" + path.string() + "'");
  out << model_to_json(tree);
  if (!out) throw Error("failed writing model file '" + path.string() + "'");
}

PilotTree load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace pilot
