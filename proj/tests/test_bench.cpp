#include "mua/bench.hpp"

#include <gtest/gtest.h>

using namespace mua;

namespace {

// Reduced spectral size so a 75 x 75 scene unmixes in well under a second.
Sweep small_sweep() {
  return parse_sweep(
      "dataset = dc1\nbands = 30\nlibrary_size = 20\nmin_angle = 3\nseed = 4\n"
      "max_iters = 40\ntransform = slic\nregion_size = 6\n"
      "lambda_c = 0.005, 0.03\nlambda = 0.1, 0.5\nbeta = 10, 30\n");
}

}  // namespace

TEST(Bench, OneRowPerCombinationSortedByHash) {
  const auto r = run_bench(small_sweep());
  ASSERT_EQ(r.rows.size(), 8u);
  for (std::size_t i = 1; i < r.rows.size(); ++i)
    EXPECT_LT(r.rows[i - 1].config_hash, r.rows[i].config_hash);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.transform, "slic");
    EXPECT_EQ(row.snr_db, 20.0);
    EXPECT_LE(row.sre_db, r.rows[r.best].sre_db);
  }
  for (const auto& x : r.abundances) EXPECT_GE(x.minCoeff(), 0.0);
  EXPECT_EQ(r.rows[r.best].lambda_c,
            detail::parse_number<double>(r.cells[r.best].at("lambda_c")).value());
}

TEST(Bench, ParallelMatchesSerial) {
  const auto serial = run_bench(small_sweep(), 1);
  const auto parallel = run_bench(small_sweep(), 3);
  ASSERT_EQ(serial.rows.size(), parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    EXPECT_EQ(serial.rows[i].config_hash, parallel.rows[i].config_hash);
    EXPECT_EQ(serial.rows[i].sre_db, parallel.rows[i].sre_db);
    EXPECT_EQ(serial.rows[i].rmse, parallel.rows[i].rmse);
    EXPECT_EQ(serial.abundances[i], parallel.abundances[i]);
  }
  EXPECT_EQ(serial.best, parallel.best);
}

TEST(Bench, HashIgnoresThreads) {
  SweepCell a{{"lambda", "0.1"}, {"beta", "3"}};
  SweepCell b = a;
  b["threads"] = "4";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b["beta"] = "4";
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Bench, SunsalCells) {
  const auto r = run_bench(parse_sweep(
      "bands = 30\nlibrary_size = 20\nmin_angle = 3\nmax_iters = 30\nmethod = sunsal\n"
      "lambda = 0.1, 0.7\n"));
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.transform, "none");
    EXPECT_TRUE(std::isnan(row.beta));
  }
}

TEST(Bench, RejectsUnknownKeys) {
  EXPECT_THROW(run_bench(parse_sweep("lambda = 0.1\ngamma = 2\n")), Error);
  EXPECT_THROW(run_bench(parse_sweep("lambda = 0.1\nmethod = tv\n")), Error);
}

TEST(SceneSpec, SeedsAreSeparated) {
  SceneSpec s;
  s.bands = 20;
  s.library_size = 12;
  s.min_angle = 3;
  s.seed = 9;
  const Scene a = make_scene(s);
  const Scene b = make_scene(s);
  EXPECT_EQ(a.observed.data(), b.observed.data());
  s.noise_seed = 100;
  const Scene c = make_scene(s);
  EXPECT_EQ(a.clean.data(), c.clean.data());
  EXPECT_NE(a.observed.data(), c.observed.data());
}
