// tests/unit/test_cli.cpp
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "semiasr/json_util.hpp"
#include "test_util.hpp"

#ifdef SEMIASR_CLI_PATH

namespace semiasr {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { dir_ = semiasr::testing::temp_dir("cli"); }

  static Result run(const std::string& args) {
    const std::string cmd = std::string(SEMIASR_CLI_PATH) + " " + args + " --quiet > " + (dir_ / "stdout").string() +
                            " 2> " + (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "stdout");
    r.err = slurp(dir_ / "stderr");
    return r;
  }

  static std::string config() { return "--config " + (fs::path(SEMIASR_CONFIG_DIR) / "tiny.json").string(); }
  static std::string out(const std::string& name) { return "--out " + (dir_ / name).string(); }
  static fs::path path(const std::string& name) { return dir_ / name; }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, StageByStageChain) {
  auto r = run("synth " + config() + " --seed 3 " + out("synth"));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(path("synth/corpus.jsonl")));
  ASSERT_TRUE(fs::exists(path("synth/lm_text.txt")));
  const std::string corpus = "--corpus " + path("synth/corpus.jsonl").string();

  r = run("lm-train " + config() + " --seed 3 --dev " + path("synth/corpus.jsonl").string() + " " + out("lm"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("perplexity"), std::string::npos);
  ASSERT_TRUE(fs::exists(path("lm/ngram.lm")));
  ASSERT_TRUE(fs::exists(path("lm/neural.lm")));
  const std::string lms = "--lm " + path("lm/ngram.lm").string() + " --lm2 " + path("lm/neural.lm").string();

  r = run("pretrain " + config() + " --seed 3 " + corpus + " " + out("pre"));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(path("pre/wav2vec.ckpt")));

  r = run("finetune " + config() + " --seed 3 " + corpus + " --init " + path("pre/wav2vec.ckpt").string() + " " +
          out("ft"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string model = "--model " + path("ft/ctc.ckpt").string();

  r = run("tune " + config() + " --seed 3 " + model + " " + corpus + " " + lms + " --trials 128 " + out("tune"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(path("tune/tune.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "trial,alpha,beta,alpha2,beta2,dev_wer");
  std::size_t rows = 0;
  while (std::getline(csv, line)) rows += !line.empty();
  EXPECT_EQ(rows, 128u);
  const std::string weights = "--weights " + path("tune/tune.json").string();

  r = run("pseudo-label " + config() + " --seed 3 " + model + " " + corpus + " " + lms + " " + weights + " " +
          out("pl"));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(path("pl/pseudo.jsonl")));

  r = run("final-train " + config() + " --seed 3 " + corpus + " --pseudo " + path("pl/pseudo.jsonl").string() +
          " --init " + path("pre/wav2vec.ckpt").string() + " " + out("final"));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(path("final/ctc.ckpt")));

  r = run("evaluate " + config() + " --model " + path("final/ctc.ckpt").string() + " " + corpus + " " + lms + " " +
          weights + " --split test " + out("eval"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Json wer = read_json_file(path("eval/wer.json"));
  EXPECT_EQ(wer["split"], "test");
  EXPECT_EQ(wer["utterances"], 4);
}

TEST_F(Cli, PipelineRunsAreByteIdenticalAndReportRebuilds) {
  auto r = run("pipeline " + config() + " --seed 4 " + out("p1"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("pipeline " + config() + " --seed 4 " + out("p2"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("p1/metrics.jsonl")), slurp(path("p2/metrics.jsonl")));
  EXPECT_EQ(slurp(path("p1/report.csv")), slurp(path("p2/report.csv")));

  r = run("report --run " + path("p1").string() + " " + out("rep"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("rep/report.csv")), slurp(path("p1/report.csv")));
}

TEST_F(Cli, AblationFlagsSelectOneArm) {
  const auto r = run("pipeline " + config() + " --seed 4 --no-selftrain " + out("abl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(path("abl/report.csv")).find("\npretrain,"), std::string::npos);
  EXPECT_NE(r.out.find("pretrain test WER"), std::string::npos);
  EXPECT_EQ(r.out.find("combined"), std::string::npos);
}

TEST_F(Cli, Seq2SeqVariantRunsEndToEnd) {
  const auto r = run("pipeline " + config() + " --seed 4 --set final.variant=s2s-scratch --arms selftrain " + out("s2s"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("selftrain test WER"), std::string::npos);
  bool found = false;
  for (const auto& e : fs::recursive_directory_iterator(path("s2s"))) found |= e.path().filename() == "s2s.ckpt";
  EXPECT_TRUE(found);
}

TEST_F(Cli, ZeroUtterancesIsAJsonError) {
  const auto r = run("synth --utterances 0 " + out("zero"));
  EXPECT_EQ(r.code, 1);
  const Json j = Json::parse(r.err);
  EXPECT_TRUE(j.contains("error"));
  EXPECT_TRUE(j.contains("message"));
}

TEST_F(Cli, UnknownFlagExitsTwo) {
  EXPECT_EQ(run("synth --bogus-flag").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
}

TEST_F(Cli, ConfigErrorNamesField) {
  const auto r = run("synth " + config() + " --set finetune.epochz=1 " + out("bad"));
  EXPECT_EQ(r.code, 1);
  const Json j = Json::parse(r.err);
  EXPECT_EQ(j["error"], "config");
  EXPECT_EQ(j["path"], "finetune.epochz");
}

TEST_F(Cli, GradCheckFilter) {
  const auto r = run("grad-check --filter matmul");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("passed"), std::string::npos);
}

}  // namespace
}  // namespace semiasr

#endif
