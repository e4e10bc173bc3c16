#include "mua/synth.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mua;

namespace {

void expect_simplex(const Matrix& X) {
  EXPECT_GE(X.minCoeff(), 0.0);
  EXPECT_LE((X.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

// Monte-Carlo-free lag-1 autocorrelation of one abundance map.
double lag1_autocorrelation(const Matrix& X, Index row, Index side) {
  const Eigen::RowVectorXd v = X.row(row);
  const double mean = v.mean();
  double num = 0.0, den = 0.0;
  int pairs = 0;
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) {
      const double a = v[r * side + c] - mean;
      den += a * a;
      if (c + 1 < side) {
        num += a * (v[r * side + c + 1] - mean);
        ++pairs;
      }
    }
  return (num / pairs) / (den / static_cast<double>(side * side));
}

}  // namespace

TEST(SpectralAngle, Examples) {
  const Vector a = (Vector(2) << 1, 0).finished();
  const Vector b = (Vector(2) << 1, 1).finished();
  const Vector o = (Vector(2) << 0, 3).finished();
  EXPECT_NEAR(spectral_angle(a, a), 0.0, 1e-12);
  EXPECT_NEAR(spectral_angle(a, o), 90.0, 1e-12);
  EXPECT_NEAR(spectral_angle(a, b), 45.0, 1e-12);
  EXPECT_NEAR(spectral_angle(a, Vector(-a)), 180.0, 1e-12);
  EXPECT_THROW(spectral_angle(a, Vector::Zero(2)), Error);
  EXPECT_THROW(spectral_angle(a, Vector::Ones(3)), Error);
}

TEST(Library, PassesAngleAudit) {
  const auto lib = generate_library(60, 40, 4.44, 1);
  EXPECT_EQ(lib.count(), 40);
  for (Index i = 0; i < 40; ++i)
    for (Index j = i + 1; j < 40; ++j)
      EXPECT_GE(spectral_angle(Vector(lib.signatures().col(i)), Vector(lib.signatures().col(j))),
                4.44);
  EXPECT_GE(lib.signatures().minCoeff(), 0.01);
  EXPECT_LE(lib.signatures().maxCoeff(), 1.0);
}

TEST(Library, SingleSignatureAlwaysSucceeds) {
  EXPECT_EQ(generate_library(10, 1, 179.0, 2).count(), 1);
}

TEST(Library, PositiveSpectraCannotBeNearAntipodal) {
  // Entries >= 0.01 bound every pairwise angle below 90 degrees.
  try {
    generate_library(10, 2, 179.0, 3);
    ADD_FAILURE() << "expected GenerationExhausted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GenerationExhausted);
  }
  const auto lib = generate_library(10, 30, 0.0, 3);
  EXPECT_LT(min_pairwise_angle(lib.signatures()), 90.0);
}

TEST(Library, Deterministic) {
  EXPECT_EQ(generate_library(30, 10, 4.44, 4).signatures(),
            generate_library(30, 10, 4.44, 4).signatures());
  EXPECT_NE(generate_library(30, 10, 4.44, 4).signatures(),
            generate_library(30, 10, 4.44, 5).signatures());
}

TEST(Dc1, SimplexAndPureSquares) {
  const auto lib = generate_library(40, 20, 4.44, 5);
  const auto scene = generate_dc1(lib, Dc1Params{});
  const Matrix& X = scene.truth.values();
  ASSERT_EQ(X.rows(), 20);
  ASSERT_EQ(X.cols(), 75 * 75);
  expect_simplex(X);
  ASSERT_EQ(scene.endmembers.size(), 5u);
  // First column of squares is pure: find pixels whose abundance is one-hot
  // and check both the abundance and the clean spectrum.
  int pure = 0;
  for (Index n = 0; n < X.cols(); ++n) {
    Index j;
    if (X.col(n).maxCoeff(&j) != 1.0) continue;
    ++pure;
    Vector e = Vector::Zero(20);
    e[j] = 1.0;
    EXPECT_EQ(Vector(X.col(n)), e);
    EXPECT_EQ(Vector(scene.clean.data().col(n)), Vector(lib.signatures().col(j)));
  }
  EXPECT_EQ(pure, 5 * 9 * 9);
  // Background pixel (corner) is the even mixture.
  for (const Index j : scene.endmembers) EXPECT_DOUBLE_EQ(X(j, 0), 0.2);
}

TEST(Dc1, RejectsLayoutsThatDoNotFit) {
  const auto lib = generate_library(10, 6, 1.0, 6);
  Dc1Params p;
  p.square_size = 14;
  EXPECT_THROW(generate_dc1(lib, p), Error);
  p = Dc1Params{};
  p.endmembers = 7;
  EXPECT_THROW(generate_dc1(lib, p), Error);
}

TEST(Dc2, SimplexAndDeterminism) {
  const auto lib = generate_library(40, 20, 4.44, 7);
  Dc2Params p;
  p.size = 40;
  p.seed = 3;
  const auto a = generate_dc2(lib, p);
  expect_simplex(a.truth.values());
  EXPECT_EQ(a.truth.values(), generate_dc2(lib, p).truth.values());
  EXPECT_EQ(a.clean.data(), generate_dc2(lib, p).clean.data());
  Index active = 0;
  for (Index j = 0; j < 20; ++j) active += a.truth.values().row(j).maxCoeff() > 0.0;
  EXPECT_EQ(active, 9);
}

TEST(Dc2, HighConcentrationFollowsMeanField) {
  const auto lib = generate_library(20, 12, 2.0, 8);
  Dc2Params p;
  p.size = 30;
  p.dirichlet_concentration = 1e6;
  const auto s = generate_dc2(lib, p);
  EXPECT_LE((s.truth.values() - s.dirichlet_mean).cwiseAbs().maxCoeff(), 1e-2);
  expect_simplex(s.dirichlet_mean);
}

TEST(Dc2, ZeroCorrelationLengthIsSpatiallyWhite) {
  const auto lib = generate_library(20, 12, 2.0, 9);
  Dc2Params p;
  p.size = 60;
  p.field_correlation_length = 0.0;
  const auto white = generate_dc2(lib, p);
  p.field_correlation_length = 8.0;
  const auto smooth = generate_dc2(lib, p);
  for (const Index j : white.endmembers) {
    EXPECT_LE(std::abs(lag1_autocorrelation(white.truth.values(), j, 60)), 0.1);
  }
  for (const Index j : smooth.endmembers)
    EXPECT_GE(lag1_autocorrelation(smooth.truth.values(), j, 60), 0.5);
}

TEST(Noise, InfiniteSnrIsIdentity) {
  const HyperspectralImage img(2, 2, Matrix::Constant(3, 4, 0.4));
  EXPECT_EQ(add_noise(img, std::numeric_limits<double>::infinity(), 1).data(), img.data());
}

TEST(Noise, ZeroDbNoiseMatchesSignalEnergy) {
  std::mt19937_64 rng(10);
  const HyperspectralImage img(100, 100, oracle::random_matrix(rng, 100, 10000, 0, 1));
  const auto noisy = add_noise(img, 0.0, 2);
  const double ratio = (noisy.data() - img.data()).norm() / img.data().norm();
  EXPECT_NEAR(ratio, 1.0, 0.01);
}

TEST(Noise, RealizedSnrNearTarget) {
  std::mt19937_64 rng(11);
  const HyperspectralImage img(100, 10, oracle::random_matrix(rng, 100, 1000, 0, 1));
  for (const double snr : {20.0, 30.0}) {
    const auto noisy = add_noise(img, snr, 3);
    EXPECT_NEAR(realized_snr_db(img.data(), noisy.data()), snr, 0.1);
  }
}

TEST(Noise, SeededAndRejectsNan) {
  const HyperspectralImage img(2, 2, Matrix::Constant(3, 4, 0.4));
  EXPECT_EQ(add_noise(img, 20, 5).data(), add_noise(img, 20, 5).data());
  EXPECT_NE(add_noise(img, 20, 5).data(), add_noise(img, 20, 6).data());
  EXPECT_THROW(add_noise(img, std::nan(""), 5), Error);
}
