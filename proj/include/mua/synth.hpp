#pragma once

// Synthetic test scenes: smooth random spectral libraries with a minimum
// pairwise spectral angle, the square-block scene (DC1), the Dirichlet /
// Gaussian-random-field scene (DC2), and SNR-calibrated white noise.

#include "mua/datamodel.hpp"
#include "mua/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace mua {

/// Angle between two spectra in degrees.
inline double spectral_angle(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::ShapeMismatch, "spectra differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw Error(ErrorCode::ZeroSpectrum, "spectral angle of a zero spectrum");
  const double cosine = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

inline double spectral_angle(const Vector& a, const Vector& b) {
  return spectral_angle(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                        std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

/// Smallest pairwise angle over the library columns (180 for a single column).
inline double min_pairwise_angle(const Matrix& signatures) {
  double best = 180.0;
  for (Index i = 0; i < signatures.cols(); ++i)
    for (Index j = i + 1; j < signatures.cols(); ++j)
      best = std::min(best, spectral_angle(Vector(signatures.col(i)),
                                           Vector(signatures.col(j))));
  return best;
}

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline Index uniform_index(std::mt19937_64& rng, Index n) {
  return std::min<Index>(n - 1, static_cast<Index>(uniform01(rng) * static_cast<double>(n)));
}

/// Standard deviation of the random-walk continuum after the last band.
inline constexpr double kContinuumDrift = 0.3;

/// Baseline plus 3-8 Gaussian bumps (some negative, like absorption
/// features) on a random-walk continuum, clipped to [0.01, 1].
inline Vector bump_spectrum(std::mt19937_64& rng, Index bands) {
  Vector s = Vector::Constant(bands, uniform(rng, 0.05, 0.35));
  const Index n_bumps = 3 + uniform_index(rng, 6);
  const double L = static_cast<double>(bands);
  for (Index k = 0; k < n_bumps; ++k) {
    const double center = uniform(rng, 0.0, L);
    const double width = uniform(rng, 1.0 + L / 40.0, 1.0 + L / 6.0);
    const double amp = uniform(rng, -0.25, 0.6);
    for (Index i = 0; i < bands; ++i) {
      const double z = (static_cast<double>(i) - center) / width;
      s[i] += amp * std::exp(-0.5 * z * z);
    }
  }
  // Random-walk continuum; bumps alone span too few directions for the
  // library to be well conditioned.
  const double step = kContinuumDrift / std::sqrt(L);
  std::normal_distribution<double> normal(0.0, 1.0);
  double drift = 0.0;
  for (Index i = 0; i < bands; ++i) {
    drift += step * normal(rng);
    s[i] += drift;
  }
  s = s.cwiseMax(0.01).cwiseMin(1.0);
  return s;
}

/// `count` distinct indices in [0, n), seeded partial Fisher-Yates.
inline std::vector<Index> choose_distinct(std::mt19937_64& rng, Index n, Index count) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < count; ++i) {
    const Index j = i + uniform_index(rng, n - i);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace detail

/// Rejection-samples smooth positive spectra until `count` of them have all
/// pairwise angles >= min_angle_deg. Gives up after 100 * count consecutive
/// rejections.
inline SpectralLibrary generate_library(Index bands, Index count,
                                        double min_angle_deg, std::uint64_t seed) {
  if (bands < 1 || count < 1)
    throw Error(ErrorCode::InvalidArgument, "library needs bands, count >= 1");
  if (!(min_angle_deg >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "min_angle must be >= 0");
  std::mt19937_64 rng(seed);
  Matrix sig(bands, count);
  Vector norms(count);
  const double min_cos = std::cos(min_angle_deg * std::numbers::pi / 180.0);
  Index accepted = 0;
  Index rejections = 0;
  const Index limit = 100 * count;
  while (accepted < count) {
    const Vector cand = detail::bump_spectrum(rng, bands);
    const double cn = cand.norm();
    bool ok = true;
    for (Index j = 0; j < accepted && ok; ++j) {
      const double cosine = sig.col(j).dot(cand) / (norms[j] * cn);
      // Compare in angle space when close to the boundary.
      if (cosine > min_cos &&
          spectral_angle(Vector(sig.col(j)), cand) < min_angle_deg)
        ok = false;
    }
    if (!ok) {
      if (++rejections >= limit)
        throw Error(ErrorCode::GenerationExhausted,
                    std::to_string(limit) + " consecutive rejections after " +
                        std::to_string(accepted) + " signatures; min_angle " +
                        std::to_string(min_angle_deg) + " too large");
      continue;
    }
    rejections = 0;
    sig.col(accepted) = cand;
    norms[accepted] = cn;
    ++accepted;
  }
  return SpectralLibrary(std::move(sig));
}

/// Ground truth and clean image of a synthetic scene.
struct SyntheticScene {
  AbundanceMatrix truth;
  HyperspectralImage clean;
  std::vector<Index> endmembers;
  /// DC2 only: per-pixel Dirichlet mean (P x N); empty otherwise.
  Matrix dirichlet_mean;
};

struct Dc1Params {
  Index size = 75;
  Index endmembers = 5;
  Index square_size = 9;
  Index rows_of_squares = 5;
  std::uint64_t seed = 0;
};

/// Number of square columns in every DC1 row.
inline constexpr Index kDc1SquaresPerRow = 5;

/// Fraction of the row's endmember in each DC1 square column. Columns 1-3
/// mix with the background; column 4 is a 50/50 mix with the next endmember.
inline constexpr double kDc1Fractions[kDc1SquaresPerRow] = {1.0, 0.75, 0.5, 0.25, 0.5};

/// Square blocks on a uniform grid over a background that is an even mixture
/// of all selected endmembers. Row r of squares uses endmember r mod E.
inline SyntheticScene generate_dc1(const SpectralLibrary& library,
                                   const Dc1Params& params) {
  const Index E = params.endmembers, S = params.size, Q = params.square_size;
  const Index R = params.rows_of_squares;
  if (E < 1 || E > library.count())
    throw Error(ErrorCode::InvalidArgument, "endmembers must lie in [1, P]");
  if (S < 1 || Q < 1 || R < 1)
    throw Error(ErrorCode::InvalidArgument, "DC1 sizes must be >= 1");
  const Index spare_c = S - kDc1SquaresPerRow * Q;
  const Index spare_r = S - R * Q;
  if (spare_c < kDc1SquaresPerRow + 1 || spare_r < R + 1)
    throw Error(ErrorCode::SquaresDontFit,
                "squares of " + std::to_string(Q) + " px do not fit a " +
                    std::to_string(S) + " px scene with gaps");
  std::mt19937_64 rng(params.seed);
  const auto chosen = detail::choose_distinct(rng, library.count(), E);

  const Index P = library.count(), N = S * S;
  Vector background = Vector::Constant(E, 1.0 / static_cast<double>(E));
  Matrix frac(E, N);
  frac.colwise() = background;
  const auto offset = [](Index i, Index n, Index spare, Index q) {
    return (i + 1) * spare / (n + 1) + i * q;
  };
  for (Index r = 0; r < R; ++r) {
    const Index em = r % E;
    const Index r0 = offset(r, R, spare_r, Q);
    for (Index c = 0; c < kDc1SquaresPerRow; ++c) {
      const Index c0 = offset(c, kDc1SquaresPerRow, spare_c, Q);
      Vector comp;
      if (c == 0) {
        comp = Vector::Zero(E);
        comp[em] = 1.0;
      } else if (c < 4) {
        comp = (1.0 - kDc1Fractions[c]) * background;
        comp[em] += kDc1Fractions[c];
      } else {
        comp = Vector::Zero(E);
        comp[em] += 0.5;
        comp[(em + 1) % E] += 0.5;
      }
      for (Index y = r0; y < r0 + Q; ++y)
        for (Index x = c0; x < c0 + Q; ++x) frac.col(y * S + x) = comp;
    }
  }
  Matrix X = Matrix::Zero(P, N);
  Matrix endmember_sigs(library.bands(), E);
  for (Index e = 0; e < E; ++e) {
    X.row(chosen[static_cast<std::size_t>(e)]) = frac.row(e);
    endmember_sigs.col(e) = library.signatures().col(chosen[static_cast<std::size_t>(e)]);
  }
  Matrix Y = endmember_sigs * frac;
  return SyntheticScene{AbundanceMatrix(std::move(X)),
                        HyperspectralImage(S, S, std::move(Y)), chosen, Matrix()};
}

struct Dc2Params {
  Index size = 100;
  Index endmembers = 9;
  /// Standard deviation (pixels) of the Gaussian smoothing kernel; 0 leaves
  /// the fields white.
  double field_correlation_length = 8.0;
  double dirichlet_concentration = 200.0;
  /// Standard deviation of each field before the softmax.
  double field_contrast = 3.0;
  std::uint64_t seed = 0;
};

namespace detail {

/// White noise smoothed with a separable Gaussian (reflecting borders),
/// standardized to zero mean and unit variance.
inline Matrix gaussian_random_field(std::mt19937_64& rng, Index rows, Index cols,
                                    double sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix f(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) f(r, c) = normal(rng);
  if (sigma > 0.0) {
    const Index radius = static_cast<Index>(std::ceil(3.0 * sigma));
    Vector kernel(2 * radius + 1);
    for (Index i = -radius; i <= radius; ++i)
      kernel[i + radius] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    kernel /= kernel.sum();
    const auto reflect = [](Index i, Index n) {
      while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
      return i;
    };
    Matrix tmp(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (Index i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * f(r, reflect(c + i, cols));
        tmp(r, c) = acc;
      }
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (Index i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp(reflect(r + i, rows), c);
        f(r, c) = acc;
      }
  }
  const double mean = f.mean();
  f.array() -= mean;
  const double sd = std::sqrt(f.squaredNorm() / static_cast<double>(f.size()));
  if (sd > 0.0) f /= sd;
  return f;
}

/// log of a Gamma(shape, 1) draw; stays finite for tiny shapes, where the
/// draw itself would underflow.
inline double log_gamma_draw(std::mt19937_64& rng, double shape) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    return std::log(g(rng));
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  const double boosted = std::log(g(rng));
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return boosted + std::log(u) / shape;
}

}  // namespace detail

/// Per-pixel Dirichlet abundances centered at the softmax of independent
/// Gaussian random fields, one per selected endmember.
inline SyntheticScene generate_dc2(const SpectralLibrary& library,
                                   const Dc2Params& params) {
  const Index E = params.endmembers, S = params.size;
  if (E < 1 || E > library.count())
    throw Error(ErrorCode::InvalidArgument, "endmembers must lie in [1, P]");
  if (S < 1) throw Error(ErrorCode::InvalidArgument, "DC2 size must be >= 1");
  if (!(params.field_correlation_length >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "correlation length must be >= 0");
  if (!(params.dirichlet_concentration > 0.0))
    throw Error(ErrorCode::InvalidArgument, "concentration must be > 0");
  if (!(params.field_contrast >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "field contrast must be >= 0");
  std::mt19937_64 rng(params.seed);
  const auto chosen = detail::choose_distinct(rng, library.count(), E);
  const Index N = S * S, P = library.count();

  Matrix logits(E, N);
  for (Index e = 0; e < E; ++e) {
    const Matrix field =
        detail::gaussian_random_field(rng, S, S, params.field_correlation_length);
    for (Index r = 0; r < S; ++r)
      for (Index c = 0; c < S; ++c)
        logits(e, r * S + c) = params.field_contrast * field(r, c);
  }
  Matrix mean(E, N), frac(E, N);
  Vector logs(E);
  for (Index n = 0; n < N; ++n) {
    const double top = logits.col(n).maxCoeff();
    mean.col(n) = (logits.col(n).array() - top).exp().matrix();
    mean.col(n) /= mean.col(n).sum();
    for (Index e = 0; e < E; ++e)
      logs[e] = detail::log_gamma_draw(rng,
                                       params.dirichlet_concentration * mean(e, n));
    const double lmax = logs.maxCoeff();
    frac.col(n) = (logs.array() - lmax).exp().matrix();
    frac.col(n) /= frac.col(n).sum();
  }

  Matrix X = Matrix::Zero(P, N);
  Matrix full_mean = Matrix::Zero(P, N);
  Matrix endmember_sigs(library.bands(), E);
  for (Index e = 0; e < E; ++e) {
    const Index j = chosen[static_cast<std::size_t>(e)];
    X.row(j) = frac.row(e);
    full_mean.row(j) = mean.row(e);
    endmember_sigs.col(e) = library.signatures().col(j);
  }
  Matrix Y = endmember_sigs * frac;
  return SyntheticScene{AbundanceMatrix(std::move(X)),
                        HyperspectralImage(S, S, std::move(Y)), chosen,
                        std::move(full_mean)};
}

/// Adds i.i.d. Gaussian noise with variance ||Y||_F^2 / (L N 10^(snr/10)).
/// snr_db = +infinity returns the image unchanged.
inline HyperspectralImage add_noise(const HyperspectralImage& image,
                                    double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db))
    throw Error(ErrorCode::InvalidArgument, "snr_db is NaN");
  if (std::isinf(snr_db) && snr_db > 0.0) return image;
  const Matrix& Y = image.data();
  const double variance = Y.squaredNorm() /
                          (static_cast<double>(Y.size()) * std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  Matrix noisy = Y;
  for (Index n = 0; n < noisy.cols(); ++n)
    for (Index i = 0; i < noisy.rows(); ++i) noisy(i, n) += normal(rng);
  return HyperspectralImage(image.rows(), image.cols(), std::move(noisy));
}

/// Realized SNR (dB) of a noisy copy against its clean original.
inline double realized_snr_db(const Matrix& clean, const Matrix& noisy) {
  return 10.0 * std::log10(clean.squaredNorm() / (noisy - clean).squaredNorm());
}

}  // namespace mua
