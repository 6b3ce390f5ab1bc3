#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pilot/cli.hpp"
#include "pilot/interpret.hpp"
#include "pilot/tree.hpp"
#include "test_util.hpp"

using namespace pilot;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pilot_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    std::ofstream f(path("d.csv"));
    write_csv(f, testutil::random_dataset(5, 300, 2, 1, 3));
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string read(const std::string& name) const {
    std::ifstream f(path(name));
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, TrainThenPredictReproducesFittedValues) {
  const Result tr = run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json")});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_NE(tr.out.find("nodes="), std::string::npos);
  EXPECT_NE(tr.out.find("leaves="), std::string::npos);
  EXPECT_NE(tr.out.find("depth="), std::string::npos);
  EXPECT_NE(tr.out.find("train_rss="), std::string::npos);

  const Result pr = run({"predict", "--model", path("m.json"), "--data", path("d.csv"), "--out", path("p.csv")});
  ASSERT_EQ(pr.code, 0) << pr.err;
  std::ifstream in(path("d.csv"));
  const Dataset d = ingest_csv(in, "y");
  const BuildResult res = build_tree_detailed(d, Hyperparams{});
  std::istringstream preds(read("p.csv"));
  std::string line;
  std::getline(preds, line);
  EXPECT_EQ(line, "prediction");
  std::size_t i = 0;
  while (std::getline(preds, line)) {
    ASSERT_LT(i, res.fitted.size());
    EXPECT_EQ(std::stod(line), res.fitted[i]) << i;
    ++i;
  }
  EXPECT_EQ(i, d.n_rows());
}

TEST_F(CliTest, MaxDepthZeroIsUsageError) {
  const Result r = run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json"), "--max-depth", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("max_depth"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({"train", "--bogus"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"train", "--data", path("missing.csv"), "--target", "y", "--out", path("m.json")}).code, 2);
  EXPECT_EQ(run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json"), "--mode", "cart",
                 "--kinds", "con,lin"})
                .code,
            2);
  EXPECT_EQ(run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json"), "--kinds", "tree"}).code,
            2);
  EXPECT_EQ(run({}).code, 2);
}

TEST_F(CliTest, RuntimeErrors) {
  EXPECT_EQ(run({"train", "--data", path("d.csv"), "--target", "nope", "--out", path("m.json")}).code, 1);
  std::ofstream(path("bad.json")) << "{not json";
  const Result r = run({"print", "--model", path("bad.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("byte"), std::string::npos) << r.err;
}

TEST_F(CliTest, ModeCartRestrictsKinds) {
  ASSERT_EQ(run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json"), "--mode", "cart"}).code, 0);
  const PilotTree t = load_model(path("m.json"));
  EXPECT_EQ(t.hp.allowed_kinds, KindSet::cart());
  for (const auto& n : t.nodes) EXPECT_TRUE(n.fit.kind == ModelKind::Con || n.fit.kind == ModelKind::Pcon);

  ASSERT_EQ(run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("k.json"), "--kinds", "pcon"}).code, 0);
  EXPECT_EQ(load_model(path("k.json")).hp.allowed_kinds, KindSet::cart());
}

TEST_F(CliTest, HyperparamFlags) {
  ASSERT_EQ(run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json"), "--max-depth", "2",
                 "--min-fit", "30", "--min-leaf", "7"})
                .code,
            0);
  const PilotTree t = load_model(path("m.json"));
  EXPECT_EQ(t.hp.max_depth, 2);
  EXPECT_EQ(t.hp.min_fit, 30);
  EXPECT_EQ(t.hp.min_leaf, 7);
  EXPECT_LE(t.stats.max_depth, 2);
}

TEST_F(CliTest, CategoricalOverride) {
  ASSERT_EQ(run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json"), "--categorical", "x2"})
                .code,
            0);
  EXPECT_FALSE(load_model(path("m.json")).columns[1].is_numeric());
}

TEST_F(CliTest, EvalIsByteIdentical) {
  const Result a = run({"eval", "--folds", "5", "--seed", "7", "--n", "300", "--out", path("a.csv")});
  const Result b = run({"eval", "--folds", "5", "--seed", "7", "--n", "300", "--out", path("b.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  EXPECT_NE(read("a.csv").find("linear,PILOT,"), std::string::npos);
}

TEST_F(CliTest, EvalOnCsvWithYeoJohnson) {
  const Result r = run({"eval", "--data", path("d.csv"), "--target", "y", "--folds", "3", "--yeo-johnson"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("PILOT+YJ"), std::string::npos);
  EXPECT_EQ(run({"eval", "--data", path("d.csv")}).code, 2);
}

TEST_F(CliTest, ImportancePrintVersion) {
  ASSERT_EQ(run({"train", "--data", path("d.csv"), "--target", "y", "--out", path("m.json")}).code, 0);
  const Result imp = run({"importance", "--model", path("m.json")});
  ASSERT_EQ(imp.code, 0);
  EXPECT_EQ(imp.out.rfind("predictor,importance\nx1,", 0), 0u) << imp.out;
  const Result pr = run({"print", "--model", path("m.json")});
  ASSERT_EQ(pr.code, 0);
  EXPECT_EQ(pr.out, render_text(load_model(path("m.json"))));
  const Result v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::to_string(kSchemaVersion) + "\n");
}
