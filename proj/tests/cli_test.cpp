#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "chromnet/model.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "chromnet_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    // Small two-mark data and one quick model shared by the tests.
    ASSERT_EQ(run("--seed 1 gen-data --genes 90 --marks 2 --bins 8 --high-marks 0 --low-marks 1 "
                  "--center-width 2 -o data.csv"),
              0);
    ASSERT_EQ(run("--seed 2 --quiet train --data data.csv " + small_net() + " -o model.bin"), 0);
  }

  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string small_net() {
    return "--kernel 3 --filters 2 --pool 2 --hidden 4,3 --dropout 0 --lr 0.05 --epochs 5";
  }

  static int run(const std::string& args, const std::string& log = "out.log") {
    const std::string cmd = "cd '" + dir_.string() + "' && '" CHROMNET_CLI "' " + args + " > " +
                            log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& name) {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::size_t data_rows(const std::string& name) {
    std::istringstream in(slurp(name));
    std::string line;
    std::size_t n = 0;
    bool header = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!header) {
        header = true;
        continue;
      }
      ++n;
    }
    return n;
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, GenDataIsDeterministic) {
  ASSERT_EQ(run("--seed 7 gen-data --genes 1000 -o d1.csv"), 0);
  ASSERT_EQ(run("--seed 7 gen-data --genes 1000 -o d2.csv"), 0);
  EXPECT_EQ(slurp("d1.csv"), slurp("d2.csv"));
  EXPECT_NE(slurp("d1.csv").find("# config: "), std::string::npos);
}

TEST_F(Cli, GenDataDefaultsToFiveMarksHundredBins) {
  ASSERT_EQ(run("gen-data --genes 3 -o d3.csv"), 0);
  const std::string text = slurp("d3.csv");
  EXPECT_NE(text.find("gene_id,bin,H3K4me3,H3K4me1,H3K36me3,H3K9me3,H3K27me3,expression"),
            std::string::npos);
  EXPECT_EQ(data_rows("d3.csv"), 300u);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("gen-data --bins 0 -o bad.csv"), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("visualize --model model.bin --class 2"), 2);
  EXPECT_EQ(run("train --data data.csv --dropout 1.5"), 2);
}

TEST_F(Cli, TrainIsByteDeterministic) {
  ASSERT_EQ(run("--seed 9 --quiet train --data data.csv " + small_net() + " -o m1.bin"), 0);
  ASSERT_EQ(run("--seed 9 --quiet train --data data.csv " + small_net() + " -o m2.bin"), 0);
  EXPECT_EQ(slurp("m1.bin"), slurp("m2.bin"));
  EXPECT_EQ(slurp("m1.bin.history.csv"), slurp("m2.bin.history.csv"));
  EXPECT_NE(slurp("m1.bin.history.csv").find("# config: "), std::string::npos);
}

TEST_F(Cli, TrainAcceptsPreSplitFiles) {
  ASSERT_EQ(run("--seed 3 gen-data --genes 30 --marks 2 --bins 8 --center-width 2 "
                "--high-marks 0 --low-marks 1 -o a.csv"),
            0);
  ASSERT_EQ(run("--seed 4 gen-data --genes 30 --marks 2 --bins 8 --center-width 2 "
                "--high-marks 0 --low-marks 1 -o b.csv"),
            0);
  // Gene ids must be unique across the folds.
  std::string b = slurp("b.csv");
  for (auto at = b.find("gene"); at != std::string::npos; at = b.find("gene", at + 4)) {
    if (b.compare(at, 7, "gene_id") != 0) b.replace(at, 4, "held");
  }
  std::ofstream(dir_ / "b2.csv") << b;
  EXPECT_EQ(run("--quiet train --train a.csv --valid b.csv " + small_net() + " -o dup.bin"), 4);
  EXPECT_EQ(run("--quiet train --train a.csv --valid b2.csv " + small_net() + " -o ps.bin"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "ps.bin"));
}

TEST_F(Cli, EvalPrintsAucAndWritesScores) {
  ASSERT_EQ(run("eval --model model.bin --data data.csv -o s.csv", "eval.log"), 0);
  EXPECT_NE(slurp("eval.log").find("AUC: "), std::string::npos);
  EXPECT_EQ(data_rows("s.csv"), 90u);
  EXPECT_NE(slurp("s.csv").find("gene_id,score,label"), std::string::npos);
}

TEST_F(Cli, EvalZeroModelPrintsHalf) {
  chromnet::Hyperparams h = chromnet::small_test_config();
  chromnet::save_model(chromnet::zero_model(h, chromnet::mark_names_for(2)), dir_ / "zero.bin");
  ASSERT_EQ(run("eval --model zero.bin --data data.csv -o z.csv", "zero.log"), 0);
  EXPECT_NE(slurp("zero.log").find("AUC: 0.5000"), std::string::npos);
}

TEST_F(Cli, EvalErrors) {
  ASSERT_EQ(run("gen-data --genes 4 --marks 3 --bins 8 --center-width 2 --high-marks 0 "
                "--low-marks 1 -o three.csv"),
            0);
  EXPECT_EQ(run("eval --model model.bin --data three.csv"), 4);
  EXPECT_EQ(run("eval --model missing.bin --data data.csv"), 3);
  EXPECT_EQ(run("eval --model model.bin --data missing.csv"), 3);
  std::ofstream(dir_ / "junk.bin") << "not a model";
  EXPECT_EQ(run("eval --model junk.bin --data data.csv"), 4);
}

TEST_F(Cli, VisualizeIsDeterministicAndEchoesThreshold) {
  ASSERT_EQ(run("--seed 3 visualize --model model.bin --class +1 -o p1"), 0);
  ASSERT_EQ(run("--seed 3 visualize --model model.bin --class +1 -o p2"), 0);
  for (const char* suffix : {"_heatmap.csv", "_heatmap.svg", "_frequency.csv"}) {
    EXPECT_EQ(slurp(std::string("p1") + suffix), slurp(std::string("p2") + suffix)) << suffix;
  }
  const std::string freq = slurp("p1_frequency.csv");
  EXPECT_NE(freq.find("# config: threshold=0.25"), std::string::npos);
  EXPECT_NE(freq.find("mark,active_count,influential"), std::string::npos);
  EXPECT_EQ(data_rows("p1_heatmap.csv"), 16u);
  ASSERT_EQ(run("--seed 3 visualize --model model.bin --class -1 -o n1"), 0);
}

TEST_F(Cli, VisualizeDivergenceExitsSix) {
  EXPECT_EQ(run("visualize --model model.bin --class -1 --step 1e300 -o dv", "dv.log"), 6);
  EXPECT_NE(slurp("dv.log").find("step"), std::string::npos);
}

TEST_F(Cli, BinInfluenceProfile) {
  ASSERT_EQ(run("bin-influence --model model.bin --data data.csv -o bi"), 0);
  EXPECT_EQ(data_rows("bi.csv"), 8u - 3u + 1u);
  EXPECT_NE(slurp("bi.csv").find("position,mean_activation"), std::string::npos);
  EXPECT_NE(slurp("bi.svg").find("<polyline"), std::string::npos);
}

TEST_F(Cli, BinInfluenceEmptyDataExitsThree) {
  std::ofstream(dir_ / "empty.csv") << "gene_id,bin,mark0,mark1,expression\n";
  EXPECT_EQ(run("bin-influence --model model.bin --data empty.csv -o e"), 3);
}

TEST_F(Cli, SingleClassDataIsDegenerate) {
  std::ofstream out(dir_ / "flat.csv");
  out << "gene_id,bin,mark0,mark1,expression\n";
  for (int g = 0; g < 3; ++g) {
    for (int b = 0; b < 8; ++b) out << "g" << g << ',' << b << ",0,0,5\n";
  }
  out.close();
  EXPECT_EQ(run("eval --model model.bin --data flat.csv"), 5);
}
