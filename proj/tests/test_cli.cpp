#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vpg/experiment.hpp"
#include "vpg/io.hpp"
#include "vpg/nn/checkpoint.hpp"

namespace fs = std::filesystem;
using vpg::testing::TempDir;

namespace {

struct RunResult {
  int code;
  std::string out;  // stdout and stderr combined
};

RunResult run_cli(const std::string& args, const fs::path& scratch, const std::string& env = "") {
  const auto log = scratch / "cli_output.txt";
  const std::string cmd = env + " \"" VPG_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, ""};
  std::ifstream is(log);
  r.out.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  return r;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwoWithUsage) {
  TempDir dir("cli_usage");
  for (const std::string args : {"", "bogus", "synth --seed 1", "preprocess --in a --out b --band 8-13",
                                 "train --vi a --vp b --seed 1 --out r.json --regimes neither"}) {
    const auto r = run_cli(args, dir.path());
    EXPECT_EQ(r.code, 2) << args << "\n" << r.out;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << args << "\n" << r.out;
  }
}

TEST(Cli, HelpExitsZero) {
  TempDir dir("cli_help");
  EXPECT_EQ(run_cli("--help", dir.path()).code, 0);
}

TEST(Cli, RuntimeErrorsExitOne) {
  TempDir dir("cli_runtime");
  const auto r = run_cli("analyze --in " + (dir.path() / "missing").string() + " --out-csv a.csv --out-svg a.svg",
                         dir.path());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("manifest"), std::string::npos) << r.out;
}

TEST(Cli, SynthPreprocessAnalyzeTopomap) {
  TempDir dir("cli_pipeline");
  const auto d = dir.path();
  auto r = run_cli("synth --out " + (d / "data").string() + " --seed 3 --channels 6 --trials-per-class 2", d);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto vi = vpg::load_dataset(d / "data" / "vi");
  EXPECT_EQ(vi.epochs.size(), 8u);
  EXPECT_EQ(vi.montage.size(), 6u);
  EXPECT_EQ(vpg::load_dataset(d / "data" / "vp").epochs.size(), 16u);

  r = run_cli("preprocess --in " + (d / "data" / "vi").string() + " --out " + (d / "pre").string() +
                  " --band 8:13 --resample 250 --crop 1000",
              d);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(vpg::load_dataset(d / "pre").n_samples(), 1000u);

  r = run_cli("analyze --in " + (d / "data" / "vi").string() + " --out-csv " + (d / "t.csv").string() + " --out-svg " +
                  (d / "t.svg").string(),
              d);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = vpg::detail::read_file(d / "t.csv");
  EXPECT_EQ(csv.rfind("channel,value\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_NE(vpg::detail::read_file(d / "t.svg").find("<svg"), std::string::npos);

  r = run_cli("topomap --values " + (d / "t.csv").string() + " --montage " + (d / "data" / "vi").string() + " --out " +
                  (d / "t2.svg").string(),
              d);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(vpg::detail::read_file(d / "t2.svg"), vpg::detail::read_file(d / "t.svg"));
}

TEST(Cli, LogLevelFromEnvironment) {
  TempDir dir("cli_log");
  const auto args = "synth --out " + (dir.path() / "s").string() + " --seed 1 --channels 3 --trials-per-class 1";
  const auto quiet = run_cli(args, dir.path(), "VPG_LOG=error");
  ASSERT_EQ(quiet.code, 0);
  EXPECT_EQ(quiet.out.find("[info]"), std::string::npos) << quiet.out;
  const auto loud = run_cli(args, dir.path(), "VPG_LOG=debug");
  ASSERT_EQ(loud.code, 0);
  EXPECT_NE(loud.out.find("[info]"), std::string::npos) << loud.out;
}

TEST(Cli, TrainWritesReportAndCsv) {
  TempDir dir("cli_train");
  const auto d = dir.path();
  ASSERT_EQ(run_cli("synth --out " + (d / "data").string() + " --seed 5 --channels 3 --trials-per-class 2", d).code, 0);
  const auto r = run_cli("train --vi " + (d / "data" / "vi").string() + " --vp " + (d / "data" / "vp").string() +
                             " --regimes both --folds 2 --seed 4 --epochs 1 --out " + (d / "out" / "report.json").string() +
                             " --deterministic --checkpoints " + (d / "ckpt").string(),
                         d);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(vpg::detail::read_file(d / "out" / "report.json"));
  EXPECT_EQ(j["seed"], 4);
  EXPECT_EQ(j["regimes"]["vi_only"]["folds"].size(), 2u);
  EXPECT_EQ(j["regimes"]["vi_plus_vp"]["folds"].size(), 2u);
  EXPECT_TRUE(fs::exists(d / "out" / "report.csv"));
  const auto model = vpg::nn::load_checkpoint<float>(d / "ckpt" / "vi_plus_vp_fold2.vpgm");
  EXPECT_EQ(model.spec().n_channels, 3u);
  EXPECT_TRUE(fs::exists(d / "ckpt" / "vi_only_fold1.vpgm"));
}
