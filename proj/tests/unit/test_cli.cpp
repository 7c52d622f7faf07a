#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "wi/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Runs the CLI with stdout discarded and stderr captured.
CliResult wi_cli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(WI_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return CliResult{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

/// Small duplicate-pair dataset plus a config file that points at it.
class CliDataset : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(wi::test::scratch_dir("cli"));
    const CliResult r = wi_cli("synth --out " + (*dir_ / "ds").string() +
                             " --writers 4 --docs 2 --width 256 --height 256 --duplicate-pairs --seed 3",
                         *dir_);
    ASSERT_EQ(r.code, 0) << r.err;
    wi::PipelineConfig cfg;
    cfg.data.manifest = (*dir_ / "ds" / "manifest.csv").string();
    cfg.preprocessing.resize = 1.0;
    cfg.preprocessing.aoi.dilation = {25, 25};
    cfg.preprocessing.patch_side = 16;
    cfg.extractor.hidden = {32};
    std::ofstream(*dir_ / "cfg.json") << wi::config_to_json(cfg);
  }
  static void TearDownTestSuite() { delete dir_; }

  static const fs::path& dir() { return *dir_; }
  static std::string cfg() { return (*dir_ / "cfg.json").string(); }

 private:
  static inline fs::path* dir_ = nullptr;
};

}  // namespace

TEST(Cli, DefaultsPrintsLoadableConfig) {
  const auto dir = wi::test::scratch_dir("cli_defaults");
  const std::string cmd = std::string(WI_CLI_PATH) + " defaults > " + (dir / "d.json").string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(wi::config_to_json(wi::config_from_json(slurp(dir / "d.json"))), wi::config_to_json(wi::PipelineConfig{}));
}

TEST(Cli, MissingConfigKeyExitsWithConfigError) {
  const auto dir = wi::test::scratch_dir("cli_missing");
  json j = json::parse(wi::config_to_json(wi::PipelineConfig{}));
  j["loss"]["triplet"].erase("margin");
  std::ofstream(dir / "bad.json") << j.dump();
  const CliResult r = wi_cli("eval -c " + (dir / "bad.json").string() + " -o " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("loss.triplet.margin"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.rfind("error kind=config", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, UnknownOverrideKeyExitsWithConfigError) {
  const auto dir = wi::test::scratch_dir("cli_override");
  const CliResult r = wi_cli("eval --set optimizer.momentum=1 -c /dev/null -o " + (dir / "out").string(), dir);
  EXPECT_NE(r.code, 0);
}

TEST(Cli, BadArgumentsExitTwo) {
  const auto dir = wi::test::scratch_dir("cli_args");
  EXPECT_EQ(wi_cli("frobnicate", dir).code, 2);
  EXPECT_EQ(wi_cli("train", dir).code, 2);
}

TEST(Cli, MissingImageExitsWithDataError) {
  const auto dir = wi::test::scratch_dir("cli_data");
  const CliResult r = wi_cli("binarize /nonexistent.png -o " + (dir / "m.pgm").string(), dir);
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("error kind=data", 0), 0u) << r.err;
}

TEST_F(CliDataset, EvalOnDuplicatesIsPerfect) {
  const CliResult r = wi_cli("eval -c " + cfg() + " -o " + (dir() / "eval").string(), dir());
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(slurp(dir() / "eval" / "report.json"));
  EXPECT_EQ(rep.at("metrics").at("top1").get<double>(), 1.0);
  EXPECT_EQ(rep.at("config"), json::parse(slurp(cfg())));
}

TEST_F(CliDataset, EvalIsByteIdenticalAndReplayableFromReport) {
  ASSERT_EQ(wi_cli("eval -c " + cfg() + " -o " + (dir() / "r1").string(), dir()).code, 0);
  ASSERT_EQ(wi_cli("eval -c " + cfg() + " -o " + (dir() / "r2").string(), dir()).code, 0);
  const std::string first = slurp(dir() / "r1" / "report.json");
  EXPECT_EQ(first, slurp(dir() / "r2" / "report.json"));
  const CliResult replay = wi_cli("eval -c " + (dir() / "r1" / "report.json").string() + " -o " + (dir() / "r3").string(), dir());
  ASSERT_EQ(replay.code, 0) << replay.err;
  EXPECT_EQ(first, slurp(dir() / "r3" / "report.json"));
}

TEST_F(CliDataset, JobsDoNotChangeResults) {
  ASSERT_EQ(wi_cli("eval -c " + cfg() + " -o " + (dir() / "j1").string(), dir()).code, 0);
  ASSERT_EQ(wi_cli("eval -c " + cfg() + " -j 3 -o " + (dir() / "j3").string(), dir()).code, 0);
  const json a = json::parse(slurp(dir() / "j1" / "report.json"));
  const json b = json::parse(slurp(dir() / "j3" / "report.json"));
  EXPECT_EQ(a.at("queries"), b.at("queries"));
  EXPECT_EQ(a.at("metrics"), b.at("metrics"));
}

TEST_F(CliDataset, SweepHasTableColumns) {
  const CliResult r = wi_cli("sweep -c " + cfg() + " -o " + (dir() / "sweep").string(), dir());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream summary(slurp(dir() / "sweep" / "summary.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(summary, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "postproc,pca_dims,config_hash,top1,top5,p@2,map");
  EXPECT_EQ(rows[1].substr(0, 9), "Original,");
  EXPECT_EQ(rows[2].substr(0, 8), "PCA-128,");
  EXPECT_EQ(rows[3].substr(0, 7), "PCA-64,");
  EXPECT_EQ(rows[4].substr(0, 7), "PCA-32,");
  const std::string table = slurp(dir() / "sweep" / "table.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "model,Original,PCA-128,PCA-64,PCA-32");
}

TEST_F(CliDataset, EmbedThenEvalFromFeatures) {
  ASSERT_EQ(wi_cli("embed -c " + cfg() + " --split all -o " + (dir() / "feats").string(), dir()).code, 0);
  EXPECT_TRUE(fs::exists(dir() / "feats" / "w000_d00.wifv"));
  const CliResult direct = wi_cli("eval -c " + cfg() + " -o " + (dir() / "direct").string(), dir());
  const CliResult imported = wi_cli("eval -c " + cfg() + " --set data.features_dir=\"" + (dir() / "feats").string() +
                                  "\" -o " + (dir() / "imported").string(),
                              dir());
  ASSERT_EQ(direct.code, 0) << direct.err;
  ASSERT_EQ(imported.code, 0) << imported.err;
  const json a = json::parse(slurp(dir() / "direct" / "report.json"));
  const json b = json::parse(slurp(dir() / "imported" / "report.json"));
  EXPECT_EQ(a.at("metrics").at("top1"), b.at("metrics").at("top1"));
}

TEST_F(CliDataset, TrainResumeMatchesUninterrupted) {
  const std::string common = " -c " + cfg() + " --set train.steps=6 --set train.batch_size=4 --set train.eval_every=0";
  ASSERT_EQ(wi_cli("train" + common + " -o " + (dir() / "whole").string(), dir()).code, 0);
  ASSERT_EQ(wi_cli("train" + common + " --stop-at 3 -o " + (dir() / "half").string(), dir()).code, 0);
  const CliResult r = wi_cli("train" + common + " --resume " + (dir() / "half" / "checkpoint.wickpt").string() + " -o " +
                           (dir() / "resumed").string(),
                       dir());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir() / "whole" / "checkpoint.wickpt"), slurp(dir() / "resumed" / "checkpoint.wickpt"));
  EXPECT_EQ(slurp(dir() / "whole" / "loss_trace.csv"), slurp(dir() / "resumed" / "loss_trace.csv"));
  EXPECT_EQ(slurp(dir() / "whole" / "report.json"), slurp(dir() / "resumed" / "report.json"));
}

TEST_F(CliDataset, AoiAndSiftAndBinarizeWriteOutputs) {
  const fs::path page = dir() / "ds" / "w000_d00.png";
  ASSERT_EQ(wi_cli("binarize " + page.string() + " -o " + (dir() / "mask.pgm").string(), dir()).code, 0);
  EXPECT_TRUE(fs::exists(dir() / "mask.pgm"));
  ASSERT_EQ(wi_cli("aoi " + page.string() + " -o " + (dir() / "aoi").string(), dir()).code, 0);
  EXPECT_TRUE(fs::exists(dir() / "aoi" / "w000_d00_aoi0.png"));
  EXPECT_TRUE(fs::exists(dir() / "aoi" / "w000_d00_aoi.json"));
  ASSERT_EQ(wi_cli("sift " + page.string() + " -o " + (dir() / "kp.csv").string(), dir()).code, 0);
  EXPECT_EQ(slurp(dir() / "kp.csv").substr(0, 2), "x,");
}
