#pragma once

// Signal-adaptive multiscale decomposition. A SegmentMap groups pixels into
// regions; apply_w averages each region (Y -> Y W) and apply_w_conj paints
// each region's value back onto its pixels (X_C -> X_C W*).

#include "mua/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <vector>

namespace mua {

/// Per-segment column means: R x N -> R x K.
template <typename Derived>
Matrix apply_w(const Eigen::MatrixBase<Derived>& matrix, const SegmentMap& seg) {
  if (matrix.cols() != seg.pixels())
    throw Error(ErrorCode::PixelCountMismatch,
                "matrix has " + std::to_string(matrix.cols()) +
                    " columns, segment map has " +
                    std::to_string(seg.pixels()) + " pixels");
  Matrix out = Matrix::Zero(matrix.rows(), seg.segment_count());
  const auto& labels = seg.labels();
  for (Index n = 0; n < matrix.cols(); ++n)
    out.col(labels[static_cast<std::size_t>(n)]) += matrix.col(n);
  const auto& sizes = seg.sizes();
  for (Index k = 0; k < out.cols(); ++k)
    out.col(k) /= static_cast<double>(sizes[static_cast<std::size_t>(k)]);
  return out;
}

/// Broadcast of segment values to pixels: R x K -> R x N.
template <typename Derived>
Matrix apply_w_conj(const Eigen::MatrixBase<Derived>& coarse,
                    const SegmentMap& seg) {
  if (coarse.cols() != seg.segment_count())
    throw Error(ErrorCode::SegmentCountMismatch,
                "coarse matrix has " + std::to_string(coarse.cols()) +
                    " columns, segment map has " +
                    std::to_string(seg.segment_count()) + " segments");
  Matrix out(coarse.rows(), seg.pixels());
  const auto& labels = seg.labels();
  for (Index n = 0; n < out.cols(); ++n)
    out.col(n) = coarse.col(labels[static_cast<std::size_t>(n)]);
  return out;
}

/// Rectangular tiling into ceil(rows/s) x ceil(cols/s) blocks, edge blocks
/// smaller.
inline SegmentMap grid_segment(const HyperspectralImage& image,
                               Index region_size) {
  if (region_size < 1)
    throw Error(ErrorCode::InvalidArgument, "region_size must be >= 1");
  const Index blocks_per_row = (image.cols() + region_size - 1) / region_size;
  std::vector<Index> labels(static_cast<std::size_t>(image.pixels()));
  for (Index r = 0; r < image.rows(); ++r)
    for (Index c = 0; c < image.cols(); ++c)
      labels[static_cast<std::size_t>(image.pixel_index(r, c))] =
          (r / region_size) * blocks_per_row + c / region_size;
  return SegmentMap::from_labels(labels);
}

namespace detail {

struct DisjointSets {
  explicit DisjointSets(Index n) : parent(static_cast<std::size_t>(n)) {
    for (Index i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  }
  Index find(Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      auto& p = parent[static_cast<std::size_t>(x)];
      p = parent[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  std::vector<Index> parent;
};

/// Splits every label into its 4-connected components, then merges
/// components smaller than `min_size` into an adjacent neighbor. With
/// `spectra` (L x N) the neighbor with the nearest mean spectrum wins,
/// otherwise the largest one. Remaining ties go to the larger group, then the
/// lower id. Components are visited in raster order of their first pixel.
inline std::vector<Index> enforce_connectivity(const std::vector<Index>& labels,
                                               Index rows, Index cols,
                                               double min_size,
                                               const Matrix* spectra = nullptr) {
  const Index n_pix = rows * cols;
  const auto at = [](auto& v, Index i) -> auto& {
    return v[static_cast<std::size_t>(i)];
  };

  std::vector<Index> comp(static_cast<std::size_t>(n_pix), -1);
  std::vector<Index> comp_size;
  std::queue<Index> frontier;
  for (Index start = 0; start < n_pix; ++start) {
    if (at(comp, start) >= 0) continue;
    const Index id = static_cast<Index>(comp_size.size());
    const Index lab = at(labels, start);
    Index count = 0;
    at(comp, start) = id;
    frontier.push(start);
    while (!frontier.empty()) {
      const Index p = frontier.front();
      frontier.pop();
      ++count;
      const Index r = p / cols, c = p % cols;
      const Index nbrs[4] = {r > 0 ? p - cols : -1, r + 1 < rows ? p + cols : -1,
                             c > 0 ? p - 1 : -1, c + 1 < cols ? p + 1 : -1};
      for (const Index q : nbrs) {
        if (q < 0 || at(comp, q) >= 0 || at(labels, q) != lab) continue;
        at(comp, q) = id;
        frontier.push(q);
      }
    }
    comp_size.push_back(count);
  }

  const Index n_comp = static_cast<Index>(comp_size.size());
  std::vector<std::vector<Index>> adjacent(static_cast<std::size_t>(n_comp));
  for (Index p = 0; p < n_pix; ++p) {
    const Index r = p / cols, c = p % cols;
    const Index a = at(comp, p);
    for (const Index q : {c + 1 < cols ? p + 1 : Index{-1},
                          r + 1 < rows ? p + cols : Index{-1}}) {
      if (q < 0) continue;
      const Index b = at(comp, q);
      if (a == b) continue;
      at(adjacent, a).push_back(b);
      at(adjacent, b).push_back(a);
    }
  }

  Matrix sums;
  if (spectra) {
    sums = Matrix::Zero(spectra->rows(), n_comp);
    for (Index p = 0; p < n_pix; ++p) sums.col(at(comp, p)) += spectra->col(p);
  }
  const auto gap = [&](Index a, Index b, const std::vector<Index>& size) {
    if (!spectra) return 0.0;
    return (sums.col(a) / static_cast<double>(at(size, a)) -
            sums.col(b) / static_cast<double>(at(size, b)))
        .squaredNorm();
  };

  DisjointSets sets(n_comp);
  std::vector<Index> group_size = comp_size;
  for (Index c = 0; c < n_comp; ++c) {
    if (sets.find(c) != c) continue;
    if (static_cast<double>(at(group_size, c)) >= min_size) continue;
    Index target = -1;
    double best = 0.0;
    for (const Index a : at(adjacent, c)) {
      const Index root = sets.find(a);
      if (root == c || root == target) continue;
      const double d = gap(c, root, group_size);
      if (target < 0 || d < best ||
          (d == best && (at(group_size, root) > at(group_size, target) ||
                         (at(group_size, root) == at(group_size, target) &&
                          root < target)))) {
        target = root;
        best = d;
      }
    }
    if (target < 0) continue;
    at(sets.parent, c) = target;
    at(group_size, target) += at(group_size, c);
    if (spectra) sums.col(target) += sums.col(c);
    auto& dst = at(adjacent, target);
    auto& src = at(adjacent, c);
    dst.insert(dst.end(), src.begin(), src.end());
    src.clear();
    src.shrink_to_fit();
  }

  std::vector<Index> out(static_cast<std::size_t>(n_pix));
  for (Index p = 0; p < n_pix; ++p) at(out, p) = sets.find(at(comp, p));
  return out;
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw; identical
/// on every standard library.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

struct SlicParams {
  Index region_size = 6;
  /// Weight of spatial against spectral distance; NaN selects
  /// 1e-2 x (mean per-pixel spectral norm).
  double compactness = std::nan("");
  Index iters = 10;
  /// SLIC initialization is a fixed grid, so the seed does not change the
  /// result; kept so every transform takes the same knobs.
  std::uint64_t seed = 0;
};

/// Data-scaled default for the SLIC compactness.
inline double default_compactness(const HyperspectralImage& image) {
  return 1e-2 * image.data().colwise().norm().mean();
}

/// SLIC over-segmentation with Euclidean distance between full reflectance
/// vectors: d^2 = d_spec^2 + (m / S)^2 d_spat^2, 2S x 2S local search, followed
/// by connectivity enforcement (fragments < S^2/4 pixels join the spectrally
/// closest neighbor).
inline SegmentMap slic_segment(const HyperspectralImage& image,
                               const SlicParams& params) {
  const Index S = params.region_size;
  const Index rows = image.rows(), cols = image.cols(), N = image.pixels();
  if (S < 2) throw Error(ErrorCode::InvalidArgument, "region_size must be >= 2");
  if (S * S >= N)
    throw Error(ErrorCode::RegionTooLarge,
                "region_size^2 = " + std::to_string(S * S) +
                    " must be smaller than N = " + std::to_string(N));
  if (params.iters < 1)
    throw Error(ErrorCode::InvalidArgument, "SLIC needs iters >= 1");
  const double m = std::isnan(params.compactness) ? default_compactness(image)
                                                  : params.compactness;
  if (!(m >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "compactness must be >= 0");
  const double spatial_weight = (m / static_cast<double>(S)) *
                                (m / static_cast<double>(S));
  const Matrix& Y = image.data();

  // Centers on a regular grid; spectra start as their cell means.
  const Index grid_r = std::max<Index>(1, static_cast<Index>(std::lround(
                                              static_cast<double>(rows) / S)));
  const Index grid_c = std::max<Index>(1, static_cast<Index>(std::lround(
                                              static_cast<double>(cols) / S)));
  const double step_r = static_cast<double>(rows) / static_cast<double>(grid_r);
  const double step_c = static_cast<double>(cols) / static_cast<double>(grid_c);
  const Index K = grid_r * grid_c;
  Matrix center_spec = Matrix::Zero(Y.rows(), K);
  std::vector<double> center_r(static_cast<std::size_t>(K));
  std::vector<double> center_c(static_cast<std::size_t>(K));
  std::vector<Index> labels(static_cast<std::size_t>(N), -1);
  for (Index r = 0; r < rows; ++r) {
    const Index gi = std::min(grid_r - 1, static_cast<Index>(r / step_r));
    for (Index c = 0; c < cols; ++c) {
      const Index gj = std::min(grid_c - 1, static_cast<Index>(c / step_c));
      labels[static_cast<std::size_t>(image.pixel_index(r, c))] =
          gi * grid_c + gj;
    }
  }
  std::vector<double> count(static_cast<std::size_t>(K));
  const auto update_centers = [&] {
    Matrix spec = Matrix::Zero(Y.rows(), K);
    std::vector<double> sr(static_cast<std::size_t>(K), 0.0);
    std::vector<double> sc(static_cast<std::size_t>(K), 0.0);
    std::fill(count.begin(), count.end(), 0.0);
    for (Index n = 0; n < N; ++n) {
      const auto k = static_cast<std::size_t>(labels[static_cast<std::size_t>(n)]);
      spec.col(static_cast<Index>(k)) += Y.col(n);
      sr[k] += static_cast<double>(n / cols);
      sc[k] += static_cast<double>(n % cols);
      count[k] += 1.0;
    }
    for (Index k = 0; k < K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      if (count[kk] == 0.0) continue;  // dead center keeps its state
      center_spec.col(k) = spec.col(k) / count[kk];
      center_r[kk] = sr[kk] / count[kk];
      center_c[kk] = sc[kk] / count[kk];
    }
  };
  update_centers();
  for (Index gi = 0; gi < grid_r; ++gi)
    for (Index gj = 0; gj < grid_c; ++gj) {
      const auto k = static_cast<std::size_t>(gi * grid_c + gj);
      center_r[k] = (static_cast<double>(gi) + 0.5) * step_r - 0.5;
      center_c[k] = (static_cast<double>(gj) + 0.5) * step_c - 0.5;
    }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(N));
  const auto distance = [&](Index n, Index k) {
    const double dr = static_cast<double>(n / cols) - center_r[static_cast<std::size_t>(k)];
    const double dc = static_cast<double>(n % cols) - center_c[static_cast<std::size_t>(k)];
    return (Y.col(n) - center_spec.col(k)).squaredNorm() +
           spatial_weight * (dr * dr + dc * dc);
  };

  for (Index it = 0; it < params.iters; ++it) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(labels.begin(), labels.end(), -1);
    for (Index k = 0; k < K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      if (count[kk] == 0.0) continue;
      const Index r0 = std::max<Index>(0, static_cast<Index>(std::floor(center_r[kk] - S)));
      const Index r1 = std::min<Index>(rows - 1, static_cast<Index>(std::ceil(center_r[kk] + S)));
      const Index c0 = std::max<Index>(0, static_cast<Index>(std::floor(center_c[kk] - S)));
      const Index c1 = std::min<Index>(cols - 1, static_cast<Index>(std::ceil(center_c[kk] + S)));
      for (Index r = r0; r <= r1; ++r)
        for (Index c = c0; c <= c1; ++c) {
          const Index n = image.pixel_index(r, c);
          const double d = distance(n, k);
          if (d < dist[static_cast<std::size_t>(n)]) {
            dist[static_cast<std::size_t>(n)] = d;
            labels[static_cast<std::size_t>(n)] = k;
          }
        }
    }
    // Pixels outside every search window go to the nearest live center.
    for (Index n = 0; n < N; ++n) {
      if (labels[static_cast<std::size_t>(n)] >= 0) continue;
      for (Index k = 0; k < K; ++k) {
        if (count[static_cast<std::size_t>(k)] == 0.0) continue;
        const double d = distance(n, k);
        if (d < dist[static_cast<std::size_t>(n)]) {
          dist[static_cast<std::size_t>(n)] = d;
          labels[static_cast<std::size_t>(n)] = k;
        }
      }
    }
    update_centers();
  }

  const double min_size = static_cast<double>(S * S) / 4.0;
  return SegmentMap::from_labels(
      detail::enforce_connectivity(labels, rows, cols, min_size, &Y));
}

/// Lloyd iteration state: labels and L x k centers.
struct KmeansState {
  std::vector<Index> labels;
  Matrix centers;
};

/// k-means++ seeding: indices of the columns chosen as initial centers.
inline std::vector<Index> kmeanspp_seeds(const Matrix& points, Index k,
                                         std::uint64_t seed) {
  const Index N = points.cols();
  if (k < 1 || k > N)
    throw Error(ErrorCode::InvalidK, "k must lie in [1, N]");
  std::mt19937_64 rng(seed);
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  chosen.push_back(std::min<Index>(
      N - 1, static_cast<Index>(detail::uniform01(rng) * static_cast<double>(N))));
  Vector d2 = (points.colwise() - points.col(chosen[0])).colwise().squaredNorm().transpose();
  while (static_cast<Index>(chosen.size()) < k) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double target = detail::uniform01(rng) * total;
      double acc = 0.0;
      for (Index n = 0; n < N; ++n) {
        if (d2[n] <= 0.0) continue;
        acc += d2[n];
        pick = n;
        if (acc > target) break;
      }
    } else {
      // All remaining points coincide with a center; take the first unused.
      for (Index n = 0; n < N && pick < 0; ++n)
        if (std::find(chosen.begin(), chosen.end(), n) == chosen.end()) pick = n;
    }
    chosen.push_back(pick);
    d2 = d2.cwiseMin(
        (points.colwise() - points.col(pick)).colwise().squaredNorm().transpose());
  }
  return chosen;
}

namespace detail {

inline void kmeans_assign(const Matrix& points, const Matrix& centers,
                          std::vector<Index>& labels, Vector& best) {
  const Index N = points.cols(), K = centers.cols();
  labels.assign(static_cast<std::size_t>(N), 0);
  best.resize(N);
  for (Index n = 0; n < N; ++n) {
    double bd = std::numeric_limits<double>::infinity();
    Index bk = 0;
    for (Index k = 0; k < K; ++k) {
      const double d = (points.col(n) - centers.col(k)).squaredNorm();
      if (d < bd) {
        bd = d;
        bk = k;
      }
    }
    labels[static_cast<std::size_t>(n)] = bk;
    best[n] = bd;
  }
}

}  // namespace detail

/// `iters` rounds of (assign, update) from the given centers, then a final
/// assignment. Empty clusters are re-seeded at the point farthest from its
/// assigned center.
inline KmeansState kmeans_lloyd(const Matrix& points, Matrix centers,
                                Index iters) {
  const Index N = points.cols(), K = centers.cols();
  KmeansState state;
  Vector best;
  for (Index it = 0; it < iters; ++it) {
    detail::kmeans_assign(points, centers, state.labels, best);
    Matrix sums = Matrix::Zero(points.rows(), K);
    std::vector<Index> counts(static_cast<std::size_t>(K), 0);
    for (Index n = 0; n < N; ++n) {
      const Index k = state.labels[static_cast<std::size_t>(n)];
      sums.col(k) += points.col(n);
      ++counts[static_cast<std::size_t>(k)];
    }
    std::vector<bool> used(static_cast<std::size_t>(N), false);
    for (Index k = 0; k < K; ++k) {
      const Index c = counts[static_cast<std::size_t>(k)];
      if (c > 0) {
        centers.col(k) = sums.col(k) / static_cast<double>(c);
        continue;
      }
      Index far = -1;
      for (Index n = 0; n < N; ++n)
        if (!used[static_cast<std::size_t>(n)] && (far < 0 || best[n] > best[far]))
          far = n;
      used[static_cast<std::size_t>(far)] = true;
      centers.col(k) = points.col(far);
    }
  }
  detail::kmeans_assign(points, centers, state.labels, best);
  state.centers = std::move(centers);
  return state;
}

/// Spectral-only clustering of the pixels into k groups (not necessarily
/// connected).
inline SegmentMap kmeans_segment(const HyperspectralImage& image, Index k,
                                 Index iters, std::uint64_t seed) {
  const Index N = image.pixels();
  if (k < 1 || k >= N)
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) +
                                         " must satisfy 1 <= k < N = " +
                                         std::to_string(N));
  const Matrix& Y = image.data();
  const auto seeds = kmeanspp_seeds(Y, k, seed);
  Matrix centers(Y.rows(), k);
  for (Index j = 0; j < k; ++j) centers.col(j) = Y.col(seeds[static_cast<std::size_t>(j)]);
  return SegmentMap::from_labels(kmeans_lloyd(Y, std::move(centers), iters).labels);
}

/// Segmentation for a configured transform kind; all kinds share region_size
/// (k-means uses k = floor(N / region_size^2)).
inline SegmentMap build_segments(const HyperspectralImage& image,
                                 TransformKind kind, Index region_size,
                                 double compactness, Index iters,
                                 std::uint64_t seed) {
  switch (kind) {
    case TransformKind::Slic:
      return slic_segment(image, SlicParams{region_size, compactness, iters, seed});
    case TransformKind::Kmeans:
      return kmeans_segment(image, image.pixels() / (region_size * region_size),
                            iters, seed);
    case TransformKind::Grid:
      return grid_segment(image, region_size);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown transform");
}

}  // namespace mua
