#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "mgst/image_io.hpp"

namespace mgst {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome mgst_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// A few small ground-truth images in <dir>/src.
fs::path make_sources(const fs::path& dir, int count = 3, int size = 24) {
  const fs::path src = dir / "src";
  fs::create_directories(src);
  std::mt19937_64 rng(42);
  for (int i = 0; i < count; ++i) {
    Image u = testing::piecewise_smooth(size);
    const Image noise = testing::random_image(rng, size, size, 1, -0.05, 0.05);
    u += noise;
    io::write_image(src / ("img" + std::to_string(i) + ".pfm"), u);
  }
  return src;
}

const char* kSmallConfig = "kernel_size = 5\nstages = 2\ntrain.epochs = 2\ntrain.lr = 0.01\n";

TEST(Cli, ProxPrintsShrinkage) {
  const auto r = mgst_cli({"prox", "--y", "2.0", "--theta", "0.5", "--p", "1.0"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gst    1.5\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("soft   1.5\n"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(mgst_cli({}).code, 1);
  EXPECT_EQ(mgst_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(mgst_cli({"prox", "--y", "1", "--theta", "1", "--p", "1", "--bogus"}).code, 1);
  EXPECT_EQ(mgst_cli({"prox", "--y", "1", "--theta", "1", "--p", "1.5"}).code, 1);
  EXPECT_EQ(mgst_cli({"prox", "--y", "abc", "--theta", "1", "--p", "1"}).code, 1);
}

TEST(Cli, RepeatedFlagLastWins) {
  const auto r = mgst_cli({"prox", "--y", "9", "--theta", "0.5", "--p", "1", "--y", "2.0"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("soft   1.5\n"), std::string::npos) << r.out;
}

TEST(Cli, MissingInputExitsTwo) {
  testing::TempDir dir("cli");
  write_text(dir.path() / "c.cfg", kSmallConfig);
  EXPECT_EQ(mgst_cli({"synth", "--in", (dir.path() / "nope").string(), "--out", (dir.path() / "o").string()}).code, 2);
  EXPECT_EQ(mgst_cli({"deblur", "--in", (dir.path() / "nope.pfm").string(), "--config", (dir.path() / "c.cfg").string(),
                      "--out", (dir.path() / "o").string()})
                .code,
            2);
  EXPECT_EQ(mgst_cli({"train", "--data", (dir.path() / "nope").string(), "--config", (dir.path() / "c.cfg").string(),
                      "--out", (dir.path() / "fit.cfg").string()})
                .code,
            2);
}

TEST(Cli, JpegWithoutCodecExitsTwo) {
  testing::TempDir dir("cli");
  const fs::path src = make_sources(dir.path(), 1);
  const auto r = mgst_cli({"synth", "--in", src.string(), "--out", (dir.path() / "o").string(), "--mode",
                           "second-order", "--jpeg"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("JPEG"), std::string::npos);
}

TEST(Cli, BadConfigKeyExitsOne) {
  testing::TempDir dir("cli");
  const fs::path src = make_sources(dir.path(), 1);
  write_text(dir.path() / "bad.cfg", "kernel_size = 5\nsharpness = 3\n");
  const auto r = mgst_cli({"deblur", "--in", src.string(), "--config", (dir.path() / "bad.cfg").string(), "--out",
                           (dir.path() / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("sharpness"), std::string::npos) << r.err;
}

TEST(Cli, LearnedWithoutWeightsExitsOne) {
  testing::TempDir dir("cli");
  const fs::path src = make_sources(dir.path(), 1);
  write_text(dir.path() / "l.cfg", "kernel_size = 5\nimage.transform = learned\n");
  EXPECT_EQ(mgst_cli({"deblur", "--in", src.string(), "--config", (dir.path() / "l.cfg").string(), "--out",
                      (dir.path() / "o").string()})
                .code,
            1);
}

TEST(Cli, SynthIsDeterministic) {
  testing::TempDir dir("cli");
  const fs::path src = make_sources(dir.path());
  for (const char* mode : {"first-order", "second-order"}) {
    const fs::path a = dir.path() / (std::string(mode) + "_a"), b = dir.path() / (std::string(mode) + "_b");
    ASSERT_EQ(mgst_cli({"synth", "--in", src.string(), "--out", a.string(), "--mode", mode, "--seed", "7"}).code, 0);
    ASSERT_EQ(mgst_cli({"synth", "--in", src.string(), "--out", b.string(), "--mode", mode, "--seed", "7"}).code, 0);
    EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
    EXPECT_EQ(slurp(a / "blur" / "img1.pfm"), slurp(b / "blur" / "img1.pfm"));
    EXPECT_EQ(slurp(a / "kernel" / "img2.txt"), slurp(b / "kernel" / "img2.txt"));
    std::istringstream lines(slurp(a / "manifest.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      EXPECT_TRUE(nlohmann::json::accept(line)) << line;
      ++n;
    }
    EXPECT_EQ(n, 3);
  }
  const fs::path c = dir.path() / "c";
  ASSERT_EQ(mgst_cli({"synth", "--in", src.string(), "--out", c.string(), "--seed", "8"}).code, 0);
  EXPECT_NE(slurp(c / "manifest.jsonl"), slurp(dir.path() / "first-order_a" / "manifest.jsonl"));
}

TEST(Cli, RunHeaderComesFirstAndIsValid) {
  testing::TempDir dir("cli");
  const fs::path src = make_sources(dir.path(), 1);
  const fs::path out = dir.path() / "o";
  ASSERT_EQ(mgst_cli({"synth", "--in", src.string(), "--out", out.string(), "--seed", "3"}).code, 0);
  const auto j = nlohmann::json::parse(slurp(out / "run.synth.json"));
  EXPECT_EQ(j["record"], "run-header");
  EXPECT_EQ(j["command"], "synth");
  EXPECT_EQ(j["seed"], 3);
  EXPECT_EQ(j["config_hash"].get<std::string>().size(), 16u);
  EXPECT_FALSE(j["version"].get<std::string>().empty());
}

TEST(Cli, DeblurThenEval) {
  testing::TempDir dir("cli");
  const fs::path src = make_sources(dir.path());
  const fs::path data = dir.path() / "data", pred = dir.path() / "pred";
  write_text(dir.path() / "c.cfg", kSmallConfig);
  ASSERT_EQ(mgst_cli({"synth", "--in", src.string(), "--out", data.string(), "--sigma-range", "1,1.5"}).code, 0);
  const auto d = mgst_cli({"deblur", "--in", data.string(), "--config", (dir.path() / "c.cfg").string(), "--out",
                           pred.string()});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_TRUE(fs::is_regular_file(pred / "img0.pfm"));
  EXPECT_TRUE(fs::is_regular_file(pred / "img0.kernel.txt"));
  const auto e = mgst_cli({"eval", "--pred", pred.string(), "--gt", (data / "gt").string(), "--kernels",
                           (data / "kernel").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  std::istringstream csv(slurp(pred / "report.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "image,psnr,ssim,mnc,kernel_mse,kernel_rmse");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
  }
  EXPECT_EQ(rows, 3);
  const auto j = nlohmann::json::parse(slurp(pred / "report.json"));
  EXPECT_EQ(j["images"], 3);
  EXPECT_EQ(j["mnc"]["count"], 3);
}

TEST(Cli, TrainIsReproducible) {
  testing::TempDir dir("cli");
  const fs::path src = make_sources(dir.path(), 2, 16);
  const fs::path data = dir.path() / "data";
  write_text(dir.path() / "c.cfg", kSmallConfig);
  ASSERT_EQ(mgst_cli({"synth", "--in", src.string(), "--out", data.string()}).code, 0);
  for (const char* name : {"a.cfg", "b.cfg"}) {
    const auto r = mgst_cli({"train", "--data", data.string(), "--config", (dir.path() / "c.cfg").string(), "--out",
                             (dir.path() / name).string(), "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(dir.path() / "a.cfg"), slurp(dir.path() / "b.cfg"));
  EXPECT_EQ(slurp(dir.path() / "a.cfg.log.csv"), slurp(dir.path() / "b.cfg.log.csv"));
  // The fitted file is itself a valid config.
  write_text(dir.path() / "c2.cfg", slurp(dir.path() / "a.cfg"));
  EXPECT_EQ(mgst_cli({"deblur", "--in", (data / "blur").string(), "--config", (dir.path() / "c2.cfg").string(),
                      "--out", (dir.path() / "p").string()})
                .code,
            0);
}

}  // namespace
}  // namespace mgst
