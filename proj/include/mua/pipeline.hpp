#pragma once

// Multiscale unmixing: segment the observed cube, unmix segment averages,
// paint the coarse abundances back onto the pixels, then unmix the full
// image with a quadratic pull towards that coarse estimate.

#include "mua/datamodel.hpp"
#include "mua/solver.hpp"
#include "mua/transform.hpp"

#include <chrono>

namespace mua {

struct MuaResult {
  AbundanceMatrix abundances;
  Matrix coarse_abundances;
  AbundanceMatrix prior;
  SegmentMap segment_map;
  SolveReport coarse_report;
  SolveReport fine_report;
  double segment_time = 0.0;
  double wall_time = 0.0;
};

/// Unregularized baseline: one solve on the full image, no prior.
inline SolveReport sunsal_unmix(const HyperspectralImage& image,
                                const SpectralLibrary& library, double lambda,
                                const SolverConfig& solver,
                                FactorCache* cache = nullptr) {
  validate_pair(image, library);
  if (!(lambda > 0.0))
    throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
  return admm_solve(image.data(), library, lambda, 0.0, nullptr, solver, cache);
}

/// Runs the multiscale pipeline with a caller-supplied segmentation. The
/// transform fields of `config` are not used.
inline MuaResult mua_unmix(const HyperspectralImage& image,
                           const SpectralLibrary& library,
                           const MuaConfig& config, SegmentMap segments,
                           FactorCache* cache = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_pair(image, library);
  config.validate_weights();
  if (segments.pixels() != image.pixels())
    throw Error(ErrorCode::PixelCountMismatch,
                "segment map does not match the image");
  FactorCache local_cache;
  FactorCache& factors = cache ? *cache : local_cache;

  const Matrix coarse_image = apply_w(image.data(), segments);
  SolveReport coarse = admm_solve(coarse_image, library, config.lambda_c, 0.0,
                                  nullptr, config.solver, &factors);
  Matrix coarse_abundances = coarse.abundances.values();
  AbundanceMatrix prior(apply_w_conj(coarse_abundances, segments));
  SolveReport fine =
      admm_solve(image.data(), library, config.lambda, config.beta,
                 config.beta > 0.0 ? &prior : nullptr, config.solver, &factors);

  AbundanceMatrix estimate = fine.abundances;
  MuaResult result{std::move(estimate),  std::move(coarse_abundances),
                   std::move(prior),     std::move(segments),
                   std::move(coarse),    std::move(fine)};
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Runs the multiscale pipeline, building the segmentation from `config` on
/// the observed (noisy) cube.
inline MuaResult mua_unmix(const HyperspectralImage& image,
                           const SpectralLibrary& library,
                           const MuaConfig& config,
                           FactorCache* cache = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_pair(image, library);
  config.validate(image.pixels());
  SegmentMap segments =
      build_segments(image, config.transform, config.region_size,
                     config.compactness, config.segment_iters, config.seed);
  const double segment_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MuaResult result = mua_unmix(image, library, config, std::move(segments), cache);
  result.segment_time = segment_time;
  result.wall_time += segment_time;
  return result;
}

}  // namespace mua
