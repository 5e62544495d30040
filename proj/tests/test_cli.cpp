#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kasr/cli.hpp"
#include "kasr/dataio.hpp"
#include "kasr/nets.hpp"
#include "test_util.hpp"

using namespace kasr;
using kasr::testing::bitwise_equal;
using kasr::testing::max_diff;
using kasr::testing::TempDir;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct Row {
  std::string name;
  double psnr, ssim;
};

std::vector<Row> parse_report(const std::string& text) {
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "name,psnr,ssim");
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    Row r;
    std::string p, s;
    std::getline(ls, r.name, ',');
    std::getline(ls, p, ',');
    std::getline(ls, s, ',');
    r.psnr = std::stod(p);
    r.ssim = std::stod(s);
    rows.push_back(r);
  }
  return rows;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Small noise-free dataset made through the CLI.
void synth(const std::filesystem::path& dir, int n = 3, int size = 32, double noise = 0.0) {
  const auto r = run_cli({"synth", "--n", std::to_string(n), "--hr-size", std::to_string(size), "--noise-sigma",
                          std::to_string(noise), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
}

}  // namespace

TEST(Cli, SynthWritesPairsAndManifest) {
  TempDir dir("cli");
  synth(dir / "d", 4, 32, 0.01);
  std::size_t hr = 0, lr = 0;
  for (auto& e : std::filesystem::directory_iterator(dir / "d" / "HR")) hr += e.path().extension() == ".png";
  for (auto& e : std::filesystem::directory_iterator(dir / "d" / "LR")) lr += e.path().extension() == ".png";
  EXPECT_EQ(hr, 4u);
  EXPECT_EQ(lr, 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "d" / "manifest.json"));
  const auto rm = nlohmann::json::parse(slurp(dir / "d" / "run_manifest.json"));
  EXPECT_EQ(rm.at("command"), "synth");
  EXPECT_EQ(rm.at("tool_version"), cli::kToolVersion);
  EXPECT_TRUE(rm.contains("wall_clock_seconds"));
}

TEST(Cli, SynthIsDeterministic) {
  TempDir dir("cli");
  synth(dir / "a", 2, 32, 0.01);
  synth(dir / "b", 2, 32, 0.01);
  for (const char* f : {"HR/img_0000.png", "LR/img_0001.png", "manifest.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Cli, SynthRejectsScaleFive) {
  TempDir dir("cli");
  const auto r = run_cli({"synth", "--scale", "5", "--out", (dir / "d").string()});
  EXPECT_EQ(r.code, cli::kValidationError);
  EXPECT_NE(r.err.find("scale"), std::string::npos);
}

TEST(Cli, EvalIdentityStub) {
  TempDir dir("cli");
  synth(dir / "d");
  const auto r = run_cli({"eval", "--data", (dir / "d").string(), "--stub", "identity"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_report(r.out);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& row : rows) {
    EXPECT_EQ(row.psnr, 100.0);
    EXPECT_NEAR(row.ssim, 1.0, 1e-9);
  }
  EXPECT_EQ(rows.back().name, "mean");
}

TEST(Cli, EvalBicubicMatchesLibraryAndSelfEnsemble) {
  TempDir dir("cli");
  synth(dir / "d");
  const auto single = run_cli({"eval", "--data", (dir / "d").string(), "--stub", "bicubic", "--report",
                               (dir / "r.csv").string()});
  const auto ens = run_cli({"eval", "--data", (dir / "d").string(), "--stub", "bicubic", "--self-ensemble"});
  ASSERT_EQ(single.code, 0) << single.err;
  ASSERT_EQ(ens.code, 0) << ens.err;
  const auto a = parse_report(single.out), b = parse_report(ens.out);
  ASSERT_EQ(a.size(), b.size());
  const PairDataset ds = PairDataset::load(dir / "d");
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].psnr, b[i].psnr, 1e-3);
    if (i < ds.size()) {
      const Tensor up = bicubic_resize(ds.pairs()[i].lr, 2.0);
      EXPECT_NEAR(a[i].psnr, psnr(up, ds.pairs()[i].hr), 1e-3);
    }
  }
  EXPECT_EQ(slurp(dir / "r.csv"), single.out);
  EXPECT_TRUE(std::filesystem::exists(dir / "r.csv.manifest.json"));
}

TEST(Cli, EvalNeedsExactlyOneModel) {
  TempDir dir("cli");
  synth(dir / "d");
  EXPECT_EQ(run_cli({"eval", "--data", (dir / "d").string()}).code, cli::kValidationError);
  EXPECT_EQ(run_cli({"eval", "--data", (dir / "d").string(), "--stub", "nearest"}).code, cli::kValidationError);
  EXPECT_EQ(run_cli({"eval", "--data", (dir / "d").string(), "--checkpoint", (dir / "none.kasr").string()}).code,
            cli::kValidationError);
}

TEST(Cli, SrStubDimensions) {
  TempDir dir("cli");
  save_png(Tensor::full({1, 3, 5, 7}, 0.5f), dir / "in.png");
  const auto r = run_cli({"sr", "--stub", "bicubic", "--scale", "3", "--input", (dir / "in.png").string(),
                          "--output", (dir / "out" / "o.png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Tensor o = load_png(dir / "out" / "o.png");
  EXPECT_EQ(o.shape(), (Shape{1, 3, 15, 21}));
  for (float v : o.data()) EXPECT_NEAR(v, 128.0f / 255.0f, 1e-6);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "o.png.manifest.json"));
}

TEST(Cli, DegradeClassicalReproducesNoiseFreeLr) {
  TempDir dir("cli");
  synth(dir / "d");
  const auto r = run_cli({"degrade", "--stub", "classical", "--input", (dir / "d" / "HR" / "img_0000.png").string(),
                          "--lr", (dir / "d" / "LR" / "img_0000.png").string(), "--out", (dir / "g").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"lr.png", "fake_lr.png", "diff.png", "run_manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "g" / f)) << f;
  }
  const Tensor diff = load_png(dir / "g" / "diff.png");
  for (float v : diff.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_TRUE(bitwise_equal(load_png(dir / "g" / "fake_lr.png"), load_png(dir / "d" / "LR" / "img_0000.png")));
}

TEST(Cli, DegradeDiffIsAmplifiedAbsoluteDifference) {
  TempDir dir("cli");
  synth(dir / "d");
  // Wrong blur on purpose so the difference is visible.
  const auto r = run_cli({"degrade", "--stub", "classical", "--blur-sigma", "0.3", "--amplify", "3", "--input",
                          (dir / "d" / "HR" / "img_0001.png").string(), "--lr",
                          (dir / "d" / "LR" / "img_0001.png").string(), "--out", (dir / "g").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Tensor lr = load_png(dir / "g" / "lr.png"), fake = load_png(dir / "g" / "fake_lr.png");
  const Tensor diff = load_png(dir / "g" / "diff.png");
  std::vector<float> expect(lr.numel());
  bool any = false;
  for (std::size_t i = 0; i < expect.size(); ++i) {
    const float d = std::min(1.0f, 3.0f * std::abs(lr.data()[i] - fake.data()[i]));
    expect[i] = static_cast<float>(quantize_unit(d)) / 255.0f;
    any = any || d > 0;
  }
  EXPECT_TRUE(any);
  EXPECT_LE(max_diff(diff, Tensor(lr.shape(), expect)), 1.0 / 255 + 1e-6);
}

TEST(Cli, TrainZeroEpochsAndReplay) {
  TempDir dir("cli");
  synth(dir / "d", 4, 32);
  const std::vector<std::string> common = {"--batch",     "2", "--patch-size",  "16", "--sr-features", "8",
                                           "--sr-blocks", "1", "--kans-hidden", "8",  "--disc-base",   "8"};
  auto args = std::vector<std::string>{"train", "--data", (dir / "d").string(), "--out", (dir / "t0").string(),
                                       "--epochs", "0"};
  args.insert(args.end(), common.begin(), common.end());
  const auto z = run_cli(args);
  ASSERT_EQ(z.code, 0) << z.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "t0" / "final.kasr"));

  args = {"train", "--data", (dir / "d").string(), "--out", (dir / "t1").string(), "--epochs", "1"};
  args.insert(args.end(), common.begin(), common.end());
  ASSERT_EQ(run_cli(args).code, 0);
  const auto replay = run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t2").string(), "--config",
                               (dir / "t1" / "run_manifest.json").string()});
  ASSERT_EQ(replay.code, 0) << replay.err;
  EXPECT_EQ(slurp(dir / "t1" / "final.kasr"), slurp(dir / "t2" / "final.kasr"));
  EXPECT_EQ(slurp(dir / "t1" / "metrics.csv"), slurp(dir / "t2" / "metrics.csv"));

  const auto ev = run_cli({"eval", "--data", (dir / "d").string(), "--checkpoint",
                           (dir / "t1" / "final.kasr").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(parse_report(ev.out).size(), 5u);
}

TEST(Cli, TrainConfigErrors) {
  TempDir dir("cli");
  synth(dir / "d", 2, 32);
  std::ofstream(dir / "bad.json") << R"({"not_a_field": 1})";
  EXPECT_EQ(run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--config",
                     (dir / "bad.json").string()})
                .code,
            cli::kValidationError);
  EXPECT_EQ(run_cli({"train", "--data", (dir / "missing").string(), "--out", (dir / "t").string()}).code,
            cli::kValidationError);
  EXPECT_EQ(run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--p", "3"}).code,
            cli::kValidationError);
}

TEST(Cli, VerifyFilterAndFaultInjection) {
  const auto ok = run_cli({"verify", "--filter", "sobel"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("sobel"), std::string::npos);
  const auto bad = run_cli({"verify", "--filter", "conv2d", "--inject-fault"});
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.err.find("conv2d"), std::string::npos);
  EXPECT_EQ(run_cli({"verify", "--filter", "no_such_op"}).code, cli::kValidationError);
}

TEST(Cli, UsageErrorsAndHelp) {
  EXPECT_EQ(run_cli({}).code, cli::kValidationError);
  EXPECT_EQ(run_cli({"bogus"}).code, cli::kValidationError);
  EXPECT_EQ(run_cli({"synth"}).code, cli::kValidationError);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kOk);
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.code, cli::kOk);
  EXPECT_NE((v.out + v.err).find(cli::kToolVersion), std::string::npos);
}
