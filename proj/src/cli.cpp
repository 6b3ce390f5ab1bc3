#include "pilot/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "pilot/dataset.hpp"
#include "pilot/error.hpp"
#include "pilot/eval.hpp"
#include "pilot/interpret.hpp"
#include "pilot/predict.hpp"
#include "pilot/tree.hpp"

namespace pilot::cli {

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct Config {
  std::string data, target, model, out;
  std::vector<std::string> categorical;
  std::vector<std::string> kinds;
  std::string mode = "full";
  Hyperparams hp;
  int threads = 1;
  std::uint64_t seed = 0;
  int folds = 5;
  std::vector<std::string> synthetic;
  std::size_t n_synthetic = 1000;
  bool yeo_johnson = false;
  bool timing = false;
};

void add_hyperparams(CLI::App* cmd, Config& c) {
  cmd->add_option("--max-depth", c.hp.max_depth, "Maximum number of split levels")->capture_default_str();
  cmd->add_option("--min-fit", c.hp.min_fit, "Nodes with fewer cases become leaves")->capture_default_str();
  cmd->add_option("--min-leaf", c.hp.min_leaf, "Minimum cases per child of a split")->capture_default_str();
  cmd->add_option("--max-lin-chain", c.hp.max_lin_chain, "Cap on consecutive LIN fits")->capture_default_str();
  cmd->add_option("--min-rel-gain-lin", c.hp.min_rel_gain_lin, "LIN chain stops below this relative gain")
      ->capture_default_str();
  cmd->add_option("--rss-floor-scale", c.hp.rss_floor_scale, "Relative RSS floor inside BIC")->capture_default_str();
  auto* mode = cmd->add_option("--mode", c.mode, "full: all five models; cart: CON and PCON only")
                   ->check(CLI::IsMember({"full", "cart"}))
                   ->capture_default_str();
  cmd->add_option("--kinds", c.kinds, "Allowed model kinds, e.g. con,lin,pcon (CON is always allowed)")
      ->delimiter(',')
      ->excludes(mode);
  cmd->add_option("--threads", c.threads, "Worker threads for predictor scans")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

// Applies --mode/--kinds and validates.
void finish_hyperparams(Config& c) {
  if (c.mode == "cart") c.hp.allowed_kinds = KindSet::cart();
  if (!c.kinds.empty()) {
    KindSet set({ModelKind::Con});
    try {
      for (const auto& k : c.kinds) set.insert(parse_kind(k));
    } catch (const ConfigError& e) {
      throw UsageError(std::string("--kinds: ") + e.what());
    }
    c.hp.allowed_kinds = set;
  }
  try {
    c.hp.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

std::set<std::string> categorical_set(const Config& c) { return {c.categorical.begin(), c.categorical.end()}; }

// Writes to --out when given, else to `out`.
void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path + "'");
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_train(Config& c, std::ostream& out) {
  finish_hyperparams(c);
  const Dataset data = ingest_csv(c.data, c.target, categorical_set(c));
  BuildOptions opts;
  opts.threads = c.threads;
  const PilotTree tree = build_tree(data, c.hp, opts);
  save_model(tree, c.out);
  out << "nodes=" << tree.stats.nodes << " leaves=" << tree.stats.leaves << " depth=" << tree.stats.max_depth
      << " train_rss=" << g17(tree.stats.train_rss) << "\n";
  return 0;
}

int cmd_predict(Config& c, std::ostream& out) {
  const PilotTree tree = load_model(c.model);
  const RawTable raw = read_csv(c.data);
  const FeatureTable table = type_columns_like(raw, tree.columns, tree.target);
  const std::vector<double> pred = predict_batch(tree, table);
  std::string text = "prediction\n";
  for (double v : pred) text += g17(v) + "\n";
  emit(text, c.out, out);
  return 0;
}

int cmd_importance(Config& c, std::ostream& out) {
  const PilotTree tree = load_model(c.model);
  const std::vector<double> imp = feature_importance(tree);
  std::string text = "predictor,importance\n";
  for (std::size_t j = 0; j < imp.size(); ++j) text += tree.columns[j].name + "," + g17(imp[j]) + "\n";
  emit(text, c.out, out);
  return 0;
}

int cmd_print(Config& c, std::ostream& out) {
  emit(render_text(load_model(c.model)), c.out, out);
  return 0;
}

eval::EvalReport eval_one(const Dataset& data, const std::string& name, const Config& c) {
  std::vector<eval::Method> methods;
  eval::Method pilot = eval::pilot_method(c.hp, "PILOT");
  eval::Method cart = eval::cart_method(c.hp, "CART");
  if (c.threads > 1) {
    const int threads = c.threads;
    auto threaded = [threads](const Hyperparams& hp, std::string nm) {
      return eval::Method{std::move(nm), [hp, threads](const Dataset& train, const FeatureTable& test) {
                            BuildOptions o;
                            o.threads = threads;
                            return predict_batch(build_tree(train, hp, o), test);
                          }};
    };
    Hyperparams cart_hp = c.hp;
    cart_hp.allowed_kinds = KindSet::cart();
    pilot = threaded(c.hp, "PILOT");
    cart = threaded(cart_hp, "CART");
  }
  methods.push_back(pilot);
  methods.push_back(cart);
  if (c.yeo_johnson) {
    methods.push_back(eval::with_yeo_johnson(pilot));
    methods.push_back(eval::with_yeo_johnson(cart));
  }
  return eval::kfold_cv(data, name, c.folds, methods, c.seed);
}

int cmd_eval(Config& c, std::ostream& out) {
  finish_hyperparams(c);
  eval::EvalReport report;
  if (!c.data.empty()) {
    const Dataset data = ingest_csv(c.data, c.target, categorical_set(c));
    std::string name = std::filesystem::path(c.data).stem().string();
    eval::append(report, eval_one(data, name, c));
  } else {
    std::vector<std::string> which = c.synthetic;
    if (which.empty() || std::find(which.begin(), which.end(), "all") != which.end())
      which = {"linear", "additive", "piecewise"};
    for (const auto& s : which) {
      Dataset data;
      if (s == "linear") {
        const std::vector<double> beta = {1.0, -2.0, 3.0, -1.0, 0.5};
        data = eval::gen_linear(c.n_synthetic, beta.size(), beta, 0.1, c.seed);
      } else if (s == "additive") {
        data = eval::gen_additive(c.n_synthetic, c.seed);
      } else {
        data = eval::gen_piecewise(c.n_synthetic, c.seed);
      }
      eval::append(report, eval_one(data, s, c));
    }
  }
  if (!c.out.empty()) emit(report.to_csv(c.timing), c.out, out);
  out << report.to_table(c.timing);
  for (const auto& e : report.entries)
    if (!e.ok) out << "failed: " << e.dataset << "/" << e.method << ": " << e.error << "\n";
  return report.any_failed() ? 1 : 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PILOT linear model trees", "pilot"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "Print the model schema version");

  Config c;

  auto* train = app.add_subcommand("train", "Fit a tree and write a model file");
  train->add_option("--data", c.data, "Training CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--target", c.target, "Response column")->required();
  train->add_option("--out", c.out, "Model file to write")->required();
  train->add_option("--categorical", c.categorical, "Columns to treat as categorical")->delimiter(',');
  add_hyperparams(train, c);

  auto* predict = app.add_subcommand("predict", "Predict a CSV with a saved model");
  predict->add_option("--model", c.model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", c.data, "Input CSV (a target column is ignored)")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", c.out, "Predictions CSV (default: stdout)");

  auto* eval = app.add_subcommand("eval", "Cross-validated MSE of PILOT and CART");
  auto* data_opt = eval->add_option("--data", c.data, "CSV dataset")->check(CLI::ExistingFile);
  auto* target_opt = eval->add_option("--target", c.target, "Response column");
  data_opt->needs(target_opt);
  target_opt->needs(data_opt);
  eval->add_option("--categorical", c.categorical, "Columns to treat as categorical")->delimiter(',');
  eval->add_option("--synthetic", c.synthetic, "Generators: linear, additive, piecewise, all (default all)")
      ->delimiter(',')
      ->check(CLI::IsMember({"linear", "additive", "piecewise", "all"}))
      ->excludes(data_opt);
  eval->add_option("--n", c.n_synthetic, "Rows per synthetic dataset")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000000}))
      ->capture_default_str();
  eval->add_option("--folds", c.folds, "Number of CV folds")->check(CLI::Range(2, 1000))->capture_default_str();
  eval->add_option("--seed", c.seed, "Seed for data generation and fold assignment")->capture_default_str();
  eval->add_flag("--yeo-johnson", c.yeo_johnson, "Also run each method on Yeo-Johnson transformed predictors");
  eval->add_flag("--timing", c.timing, "Include wall-clock seconds in the report");
  eval->add_option("--out", c.out, "Also write the report as CSV here");
  add_hyperparams(eval, c);

  auto* importance = app.add_subcommand("importance", "Normalized feature importance of a model");
  importance->add_option("--model", c.model, "Model file")->required()->check(CLI::ExistingFile);
  importance->add_option("--out", c.out, "Output file (default: stdout)");

  auto* print = app.add_subcommand("print", "Text rendering of a model");
  print->add_option("--model", c.model, "Model file")->required()->check(CLI::ExistingFile);
  print->add_option("--out", c.out, "Output file (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (version) {
      out << kSchemaVersion << "\n";
      return 0;
    }
    if (*train) return cmd_train(c, out);
    if (*predict) return cmd_predict(c, out);
    if (*eval) return cmd_eval(c, out);
    if (*importance) return cmd_importance(c, out);
    if (*print) return cmd_print(c, out);
    err << app.help();
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pilot::cli
