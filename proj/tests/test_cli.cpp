// Runs the mua executable end to end.

#include "mua/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

using namespace mua;

namespace {

const fs::path kCli = MUA_CLI_PATH;

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / ("mua_cli_" + std::string(info->name()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string bytes(const fs::path& p) { return detail::read_text(p); }

const std::string kSmall = "--bands 30 --library-size 20 --min-angle 3";

}  // namespace

TEST(Cli, SynthIsReproducible) {
  const auto d = scratch_dir();
  ASSERT_EQ(run("synth --dataset dc1 --seed 7 " + kSmall + " --out-dir " + (d / "a").string()), 0);
  ASSERT_EQ(run("synth --dataset dc1 --seed 7 " + kSmall + " --out-dir " + (d / "b").string()), 0);
  for (const char* f : {"cube.bin", "cube.bin.hdr", "truth.bin", "truth.bin.hdr", "library.csv"})
    EXPECT_EQ(bytes(d / "a" / f), bytes(d / "b" / f)) << f;
  const auto h = read_cube_header(d / "a" / "cube.bin");
  EXPECT_EQ(h.seed, std::optional<std::uint64_t>(7));
  EXPECT_NE(h.description.find("dataset=dc1"), std::string::npos);
  EXPECT_EQ(read_cube_header(d / "a" / "truth.bin").bands, 20);
}

TEST(Cli, MuaWithZeroBetaMatchesSunsal) {
  const auto d = scratch_dir();
  ASSERT_EQ(run("synth --dataset dc2 --seed 3 " + kSmall + " --out-dir " + d.string()), 0);
  const std::string common = " --cube " + (d / "cube.bin").string() + " --library " +
                             (d / "library.csv").string() + " --lambda 0.05 --max-iters 40";
  ASSERT_EQ(run("unmix --method mua --beta 0 --lambda-c 0.01 --region-size 8" + common +
                " --out-dir " + (d / "mua").string()),
            0);
  ASSERT_EQ(run("unmix --method sunsal" + common + " --out-dir " + (d / "sunsal").string()), 0);
  EXPECT_EQ(bytes(d / "mua" / "abundances.bin"), bytes(d / "sunsal" / "abundances.bin"));
  const auto report = read_key_values(d / "mua" / "report.txt");
  EXPECT_TRUE(lookup(report, "iterations"));
  EXPECT_TRUE(lookup(report, "coarse_iterations"));
  EXPECT_TRUE(lookup(report, "primal_residual"));
  EXPECT_TRUE(lookup(report, "total_runtime_s"));
}

TEST(Cli, SegmentUnmixEvalChain) {
  const auto d = scratch_dir();
  ASSERT_EQ(run("synth --dataset dc1 --seed 2 " + kSmall + " --out-dir " + d.string()), 0);
  ASSERT_EQ(run("segment --cube " + (d / "cube.bin").string() +
                " --method grid --region-size 5 --out " + (d / "seg.txt").string()),
            0);
  EXPECT_EQ(read_segment_map(d / "seg.txt").segment_count(), 15 * 15);
  ASSERT_EQ(run("unmix --method mua --cube " + (d / "cube.bin").string() + " --library " +
                (d / "library.csv").string() + " --segments " + (d / "seg.txt").string() +
                " --lambda-c 0.03 --lambda 0.1 --beta 30 --max-iters 40 --maps --out-dir " +
                (d / "out").string()),
            0);
  EXPECT_TRUE(fs::exists(d / "out" / "maps" / "em_0.pgm"));
  for (int i = 0; i < 2; ++i)
    ASSERT_EQ(run("eval --truth " + (d / "truth.bin").string() + " --estimate " +
                  (d / "out" / "abundances.bin").string() + " --out " +
                  (d / "eval.csv").string()),
              0);
  const auto rows = read_eval_csv(d / "eval.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].transform, "file");
  EXPECT_EQ(rows[0].beta, 30.0);
  EXPECT_EQ(rows[0].snr_db, 20.0);
  EXPECT_GT(rows[0].sre_db, 0.0);
  EXPECT_GT(rows[0].runtime_s, 0.0);
  EXPECT_EQ(rows[0].sre_db, rows[1].sre_db);
}

TEST(Cli, BenchWritesRowsAndBest) {
  const auto d = scratch_dir();
  {
    std::ofstream sweep(d / "sweep.txt");
    sweep << "bands = 30\nlibrary_size = 20\nmin_angle = 3\nmax_iters = 30\n"
             "lambda_c = 0.005, 0.03\nlambda = 0.1, 0.5\nbeta = 10, 30\n";
  }
  ASSERT_EQ(run("bench --config " + (d / "sweep.txt").string() + " --out " +
                (d / "res.csv").string() + " --threads 2"),
            0);
  EXPECT_EQ(read_eval_csv(d / "res.csv").size(), 8u);
  const auto best = read_key_values(d / "res.csv.best.txt");
  EXPECT_TRUE(lookup(best, "lambda_c"));
  EXPECT_TRUE(lookup(best, "beta"));
  EXPECT_TRUE(lookup(best, "sre_db"));
}

TEST(Cli, ExitCodes) {
  const auto d = scratch_dir();
  EXPECT_EQ(run("unmix --cube " + (d / "nope.bin").string() + " --library x.csv --lambda 0.1"), 2);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("unmix --lambda 0.1"), 1);  // missing required options
  ASSERT_EQ(run("synth --dataset dc1 --seed 1 " + kSmall + " --out-dir " + d.string()), 0);
  EXPECT_EQ(run("unmix --method sunsal --cube " + (d / "cube.bin").string() + " --library " +
                (d / "library.csv").string() + " --lambda -1"),
            1);
  EXPECT_EQ(run("synth --dataset dc1 --min-angle 179 --library-size 3 --bands 10 --out-dir " +
                d.string()),
            1);
  {
    std::ofstream bad(d / "cube.bin", std::ios::app);
    bad << "xyz";
  }
  EXPECT_EQ(run("segment --cube " + (d / "cube.bin").string() + " --out " +
                (d / "s.txt").string()),
            2);
}
