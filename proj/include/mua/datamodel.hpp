#pragma once

// Core value types shared by the unmixing library: the observed cube, the
// spectral library, abundance matrices, pixel segmentations and the run
// configuration. All types validate their shape invariants on construction
// and are immutable afterwards.
//
// Conventions:
//  - pixels are linearized row-major: n = row * cols + col;
//  - matrices are column-per-pixel (L x N for images, P x N for abundances);
//  - scalars are double precision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mua {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
  // validation
  InvalidShape,
  InvalidArgument,
  BandMismatch,
  PixelCountMismatch,
  SegmentCountMismatch,
  ShapeMismatch,
  RegionTooLarge,
  InvalidK,
  NotPositiveDefinite,
  ZeroSpectrum,
  GenerationExhausted,
  SquaresDontFit,
  ZeroTruth,
  UnmappedSignature,
  // input / output
  Io,
  BadMagic,
  TruncatedData,
  HeaderMismatch,
  RaggedRows,
  NonNumeric,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BandMismatch: return "BandMismatch";
    case ErrorCode::PixelCountMismatch: return "PixelCountMismatch";
    case ErrorCode::SegmentCountMismatch: return "SegmentCountMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::RegionTooLarge: return "RegionTooLarge";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ZeroSpectrum: return "ZeroSpectrum";
    case ErrorCode::GenerationExhausted: return "GenerationExhausted";
    case ErrorCode::SquaresDontFit: return "SquaresDontFit";
    case ErrorCode::ZeroTruth: return "ZeroTruth";
    case ErrorCode::UnmappedSignature: return "UnmappedSignature";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonNumeric: return "NonNumeric";
  }
  return "Unknown";
}

/// True for errors caused by reading or writing files.
inline constexpr bool is_io_error(ErrorCode code) {
  return code >= ErrorCode::Io;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Observed cube: `bands` x (rows * cols) reflectance matrix.
class HyperspectralImage {
 public:
  HyperspectralImage(Index rows, Index cols, Matrix data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 1 || cols < 1 || data_.rows() < 1)
      throw Error(ErrorCode::InvalidShape,
                  "image needs rows, cols and bands >= 1");
    if (data_.cols() != rows * cols)
      throw Error(ErrorCode::InvalidShape,
                  "image data has " + std::to_string(data_.cols()) +
                      " columns, expected rows*cols = " +
                      std::to_string(rows * cols));
  }

  Index bands() const noexcept { return data_.rows(); }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index pixels() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }

  Index pixel_index(Index row, Index col) const noexcept {
    return row * cols_ + col;
  }

 private:
  Index rows_;
  Index cols_;
  Matrix data_;
};

/// Candidate endmember signatures, one reflectance spectrum per column.
class SpectralLibrary {
 public:
  explicit SpectralLibrary(Matrix signatures,
                           std::optional<std::vector<int>> materials = {})
      : signatures_(std::move(signatures)), materials_(std::move(materials)) {
    if (signatures_.rows() < 1 || signatures_.cols() < 1)
      throw Error(ErrorCode::InvalidShape, "library needs bands, count >= 1");
    for (Index j = 0; j < signatures_.cols(); ++j) {
      const auto col = signatures_.col(j);
      if (!col.allFinite() || col.minCoeff() < 0.0 || col.maxCoeff() > 1.0)
        throw Error(ErrorCode::InvalidShape,
                    "signature " + std::to_string(j) +
                        " has entries outside [0, 1]");
      if (col.maxCoeff() == 0.0)
        throw Error(ErrorCode::InvalidShape,
                    "signature " + std::to_string(j) + " is all zero");
    }
    if (materials_ &&
        static_cast<Index>(materials_->size()) != signatures_.cols())
      throw Error(ErrorCode::InvalidShape,
                  "material map must cover every signature");
  }

  Index bands() const noexcept { return signatures_.rows(); }
  Index count() const noexcept { return signatures_.cols(); }
  const Matrix& signatures() const noexcept { return signatures_; }
  const std::optional<std::vector<int>>& materials() const noexcept {
    return materials_;
  }

 private:
  Matrix signatures_;
  std::optional<std::vector<int>> materials_;
};

/// P x N fractional abundances, one column per pixel.
class AbundanceMatrix {
 public:
  explicit AbundanceMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw Error(ErrorCode::InvalidShape, "abundances need P, N >= 1");
  }

  Index count() const noexcept { return values_.rows(); }
  Index pixels() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
};

/// Assignment of every pixel to one of K non-empty segments. Stands for the
/// averaging operator W (N x K) and its broadcast conjugate W* (K x N).
class SegmentMap {
 public:
  /// Builds a map from arbitrary non-negative labels. Labels are renumbered
  /// densely in order of first appearance, so no segment is empty.
  static SegmentMap from_labels(const std::vector<Index>& raw) {
    if (raw.empty())
      throw Error(ErrorCode::InvalidShape, "segment map needs N >= 1");
    Index max_label = 0;
    for (const Index l : raw) {
      if (l < 0)
        throw Error(ErrorCode::InvalidArgument, "negative segment label");
      max_label = std::max(max_label, l);
    }
    std::vector<Index> remap(static_cast<std::size_t>(max_label) + 1, -1);
    std::vector<Index> dense(raw.size());
    Index next = 0;
    for (std::size_t n = 0; n < raw.size(); ++n) {
      auto& slot = remap[static_cast<std::size_t>(raw[n])];
      if (slot < 0) slot = next++;
      dense[n] = slot;
    }
    return SegmentMap(std::move(dense), next);
  }

  /// Every pixel in its own segment (W = I).
  static SegmentMap identity(Index pixels) {
    std::vector<Index> labels(static_cast<std::size_t>(pixels));
    for (Index n = 0; n < pixels; ++n) labels[static_cast<std::size_t>(n)] = n;
    return SegmentMap(std::move(labels), pixels);
  }

  /// Validating constructor: labels must already be dense in [0, K).
  SegmentMap(std::vector<Index> labels, Index segment_count)
      : labels_(std::move(labels)), count_(segment_count) {
    if (labels_.empty() || count_ < 1)
      throw Error(ErrorCode::InvalidShape, "segment map needs N, K >= 1");
    if (count_ > static_cast<Index>(labels_.size()))
      throw Error(ErrorCode::InvalidShape, "more segments than pixels");
    sizes_.assign(static_cast<std::size_t>(count_), 0);
    for (const Index l : labels_) {
      if (l < 0 || l >= count_)
        throw Error(ErrorCode::InvalidShape,
                    "segment label " + std::to_string(l) + " outside [0, K)");
      ++sizes_[static_cast<std::size_t>(l)];
    }
    for (Index k = 0; k < count_; ++k)
      if (sizes_[static_cast<std::size_t>(k)] == 0)
        throw Error(ErrorCode::InvalidShape,
                    "segment " + std::to_string(k) + " is empty");
  }

  Index pixels() const noexcept { return static_cast<Index>(labels_.size()); }
  Index segment_count() const noexcept { return count_; }
  const std::vector<Index>& labels() const noexcept { return labels_; }
  const std::vector<Index>& sizes() const noexcept { return sizes_; }
  Index label(Index pixel) const { return labels_[static_cast<std::size_t>(pixel)]; }

  friend bool operator==(const SegmentMap&, const SegmentMap&) = default;

 private:
  std::vector<Index> labels_;
  Index count_;
  std::vector<Index> sizes_;
};

enum class TransformKind { Slic, Kmeans, Grid };

inline constexpr std::string_view to_string(TransformKind t) {
  switch (t) {
    case TransformKind::Slic: return "slic";
    case TransformKind::Kmeans: return "kmeans";
    case TransformKind::Grid: return "grid";
  }
  return "unknown";
}

inline TransformKind parse_transform(std::string_view name) {
  if (name == "slic") return TransformKind::Slic;
  if (name == "kmeans") return TransformKind::Kmeans;
  if (name == "grid") return TransformKind::Grid;
  throw Error(ErrorCode::InvalidArgument,
              "unknown transform '" + std::string(name) + "'");
}

/// ADMM knobs shared by the coarse and fine stages.
struct SolverConfig {
  /// Initial ADMM penalty.
  double mu = 1.0;
  /// Residual-balancing updates of mu during the run.
  bool adapt_mu = true;
  Index max_iters = 1000;
  double tol = 1e-6;
  /// Worker threads for the column-block schedule. Results do not depend on
  /// this value.
  int threads = 1;

  void validate() const {
    if (!(mu > 0.0))
      throw Error(ErrorCode::InvalidArgument, "mu must be > 0");
    if (max_iters < 1)
      throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    if (!(tol > 0.0))
      throw Error(ErrorCode::InvalidArgument, "tol must be > 0");
    if (threads < 1)
      throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");
  }
};

/// Full configuration of a multiscale unmixing run. The three regularization
/// weights have no defaults and must be set by the caller.
struct MuaConfig {
  double lambda_c = std::nan("");
  double lambda = std::nan("");
  double beta = std::nan("");
  TransformKind transform = TransformKind::Slic;
  Index region_size = 6;
  /// SLIC spatial weight; NaN selects the data-scaled default.
  double compactness = std::nan("");
  Index segment_iters = 10;
  std::uint64_t seed = 0;
  SolverConfig solver{};

  /// Checks the weights and solver settings only.
  void validate_weights() const {
    if (!(lambda_c > 0.0))
      throw Error(ErrorCode::InvalidArgument, "lambda_c must be > 0");
    if (!(lambda > 0.0))
      throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw Error(ErrorCode::InvalidArgument, "beta must be finite and >= 0");
    solver.validate();
  }

  /// Full check, including the segment size against the image.
  void validate(Index pixels) const {
    validate_weights();
    if (region_size < 2)
      throw Error(ErrorCode::InvalidArgument, "region_size must be >= 2");
    if (region_size * region_size >= pixels)
      throw Error(ErrorCode::RegionTooLarge,
                  "region_size^2 must be smaller than the pixel count");
  }
};

/// Checks that image and library share the same band count.
inline void validate_pair(const HyperspectralImage& image,
                          const SpectralLibrary& library) {
  if (image.bands() != library.bands())
    throw Error(ErrorCode::BandMismatch,
                "image has " + std::to_string(image.bands()) +
                    " bands, library has " + std::to_string(library.bands()));
}

}  // namespace mua
