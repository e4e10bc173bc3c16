#pragma once

// ADMM for nonnegative l1-penalized least squares with an optional quadratic
// pull towards a prior:
//
//   min_{X >= 0}  1/2 ||Y - A X||_F^2 + lambda ||X||_{1,1}
//                 + beta/2 ||X_prior - X||_F^2
//
// With beta = 0 this is the plain sparse regression problem solved on either
// the coarse or the original image.

#include "mua/datamodel.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <exception>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace mua {

inline double soft_threshold(double y, double tau) {
  const double mag = std::abs(y) - tau;
  if (mag <= 0.0) return 0.0;
  return y < 0.0 ? -mag : mag;
}

/// Cholesky factorization of (A^T A + shift I), plus the explicit inverse
/// used for the matrix right-hand sides of the ADMM loop.
class NormalFactor {
 public:
  NormalFactor(const SpectralLibrary& library, double shift)
      : NormalFactor(library.signatures(), shift) {}

  /// Same, from a bare L x P matrix (no library constraints on the entries).
  NormalFactor(const Matrix& A, double shift) : shift_(shift) {
    if (!(shift > 0.0) || !std::isfinite(shift))
      throw Error(ErrorCode::InvalidArgument, "factorization shift must be > 0");
    const Index P = A.cols();
    Matrix gram = Matrix::Identity(P, P) * shift;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success)
      throw Error(ErrorCode::NotPositiveDefinite,
                  "A^T A + shift I is not numerically positive definite");
    inverse_ = llt_.solve(Matrix::Identity(P, P));
  }

  double shift() const noexcept { return shift_; }
  Index size() const noexcept { return inverse_.rows(); }
  const Eigen::LLT<Matrix>& cholesky() const noexcept { return llt_; }
  const Matrix& inverse() const noexcept { return inverse_; }

  /// Solves (A^T A + shift I) Z = rhs.
  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }

  /// L L^T, for checking the factorization against the direct product.
  Matrix reconstruct() const {
    const Matrix L = llt_.matrixL();
    return L * L.transpose();
  }

 private:
  double shift_;
  Eigen::LLT<Matrix> llt_;
  Matrix inverse_;
};

/// Factorizations keyed on (library identity, shift). The coarse and fine
/// stages of one run need two entries.
class FactorCache {
 public:
  std::shared_ptr<const NormalFactor> get(const SpectralLibrary& library,
                                          double shift) {
    const Key key{&library.signatures(), shift};
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    auto factor = std::make_shared<const NormalFactor>(library, shift);
    entries_.emplace(key, factor);
    return factor;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  using Key = std::pair<const Matrix*, double>;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const NormalFactor>> entries_;
};

struct AdmmState {
  Matrix U;
  Matrix V;
  Index iter = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct SolveReport {
  AbundanceMatrix abundances;
  Index iterations = 0;
  double final_primal_residual = 0.0;
  double final_dual_residual = 0.0;
  double objective = 0.0;
  double wall_time = 0.0;
  /// ||X - U||_F after every iteration.
  std::vector<double> primal_history;
  bool converged = false;
  /// Penalty in effect at the last iteration (differs from the configured
  /// value when adaptation is on).
  double final_mu = 0.0;
};

/// Value of the regularized objective at X (X is expected to be >= 0; the
/// l1 term uses |X| regardless).
inline double unmixing_objective(const Matrix& Y, const SpectralLibrary& library,
                                 const Matrix& X, double lambda, double beta,
                                 const AbundanceMatrix* prior) {
  const Matrix residual = Y - library.signatures() * X;
  double value = 0.5 * residual.squaredNorm() + lambda * X.cwiseAbs().sum();
  if (beta > 0.0 && prior != nullptr)
    value += 0.5 * beta * (prior->values() - X).squaredNorm();
  return value;
}

/// Pixel columns per block of the ADMM schedule. Blocks are a fixed partition
/// of the columns, so the number of worker threads never changes the result.
inline constexpr Index kAdmmBlockColumns = 256;

/// mu adaptation: checked every kMuAdaptEvery iterations, triggered when one
/// residual exceeds the other by kMuBalance, at most kMaxMuAdaptations times.
inline constexpr Index kMuAdaptEvery = 10;
inline constexpr double kMuBalance = 10.0;
inline constexpr Index kMaxMuAdaptations = 30;

/// Runs the ADMM updates from U = V = 0 until both residuals fall below
/// tol * sqrt(P N) or max_iters is reached. The returned abundances are the
/// split variable U, which is nonnegative by construction. A prior is only
/// read when beta > 0.
inline SolveReport admm_solve(const Matrix& Y, const SpectralLibrary& library,
                              double lambda, double beta,
                              const AbundanceMatrix* prior,
                              const SolverConfig& config,
                              FactorCache* cache = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  if (Y.rows() != library.bands())
    throw Error(ErrorCode::BandMismatch,
                "observations have " + std::to_string(Y.rows()) +
                    " bands, library has " + std::to_string(library.bands()));
  if (Y.cols() < 1) throw Error(ErrorCode::ShapeMismatch, "no pixels");
  if (!(lambda > 0.0))
    throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw Error(ErrorCode::InvalidArgument, "beta must be finite and >= 0");
  const Index P = library.count(), N = Y.cols();
  const bool use_prior = beta > 0.0;
  if (use_prior) {
    if (prior == nullptr)
      throw Error(ErrorCode::ShapeMismatch, "beta > 0 requires a prior");
    if (prior->count() != P || prior->pixels() != N)
      throw Error(ErrorCode::ShapeMismatch,
                  "prior must be " + std::to_string(P) + " x " +
                      std::to_string(N));
  }

  const Matrix& A = library.signatures();
  FactorCache local_cache;
  FactorCache& factors = cache ? *cache : local_cache;

  // A^T Y + beta X_prior does not change across iterations; with
  // G = A^T A + (mu + beta) I the X update is G^{-1} rhs + mu G^{-1} (U + V).
  Matrix rhs = A.transpose() * Y;
  if (use_prior) rhs += beta * prior->values();

  double mu = config.mu;
  double tau = lambda / mu;
  std::shared_ptr<const NormalFactor> factor = factors.get(library, mu + beta);
  Matrix fixed_part = factor->inverse() * rhs;

  AdmmState state;
  state.U = Matrix::Zero(P, N);
  state.V = Matrix::Zero(P, N);

  const Index n_blocks = (N + kAdmmBlockColumns - 1) / kAdmmBlockColumns;
  std::vector<double> primal_part(static_cast<std::size_t>(n_blocks));
  std::vector<double> dual_part(static_cast<std::size_t>(n_blocks));

  // X lives only inside a block, in per-worker scratch.
  const auto run_block = [&](Index b, Matrix& X, Matrix& scratch) {
    const Index c0 = b * kAdmmBlockColumns;
    const Index w = std::min(kAdmmBlockColumns, N - c0);
    auto U = state.U.middleCols(c0, w);
    auto V = state.V.middleCols(c0, w);
    X.resize(P, w);
    scratch.resize(P, w);
    scratch = U + V;
    X.noalias() = factor->inverse() * scratch;
    double dual = 0.0, primal = 0.0;
    for (Index j = 0; j < w; ++j) {
      auto x = X.col(j).array();
      auto u = U.col(j).array();
      auto v = V.col(j).array();
      auto t = scratch.col(j).array();
      x = mu * x + fixed_part.col(c0 + j).array();
      // max(0, soft(z, tau)) == max(0, z - tau) for tau >= 0.
      t = (x - v - tau).cwiseMax(0.0);
      dual += (t - u).square().sum();
      u = t;
      x -= u;
      primal += x.square().sum();
      v -= x;
    }
    primal_part[static_cast<std::size_t>(b)] = primal;
    dual_part[static_cast<std::size_t>(b)] = dual;
  };

  const double threshold = config.tol * std::sqrt(static_cast<double>(P * N));
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(config.max_iters));
  bool done = false;
  bool converged = false;
  Index adaptations = 0;
  std::exception_ptr failure;

  // Residual balancing: keep the primal and dual residuals within a factor
  // kMuBalance of each other by doubling or halving mu. The scaled dual V
  // is rescaled so that the unscaled multiplier mu V is unchanged.
  const auto maybe_adapt = [&] {
    if (!config.adapt_mu || adaptations >= kMaxMuAdaptations ||
        state.iter % kMuAdaptEvery != 0)
      return;
    double factor_mu = 1.0;
    if (state.primal_residual > kMuBalance * state.dual_residual)
      factor_mu = 2.0;
    else if (state.dual_residual > kMuBalance * state.primal_residual)
      factor_mu = 0.5;
    else
      return;
    ++adaptations;
    mu *= factor_mu;
    tau = lambda / mu;
    state.V /= factor_mu;
    factor = factors.get(library, mu + beta);
    fixed_part.noalias() = factor->inverse() * rhs;
  };

  const auto finish_iteration = [&]() noexcept {
    double primal = 0.0, dual = 0.0;
    for (Index b = 0; b < n_blocks; ++b) {
      primal += primal_part[static_cast<std::size_t>(b)];
      dual += dual_part[static_cast<std::size_t>(b)];
    }
    ++state.iter;
    state.primal_residual = std::sqrt(primal);
    state.dual_residual = mu * std::sqrt(dual);
    history.push_back(state.primal_residual);
    converged = state.primal_residual <= threshold &&
                state.dual_residual <= threshold;
    done = converged || state.iter >= config.max_iters;
    if (done) return;
    try {
      maybe_adapt();
    } catch (...) {
      failure = std::current_exception();
      done = true;
    }
  };

  const Index n_threads =
      std::min<Index>(static_cast<Index>(config.threads), n_blocks);
  if (n_threads <= 1) {
    Matrix X, scratch;
    while (!done) {
      for (Index b = 0; b < n_blocks; ++b) run_block(b, X, scratch);
      finish_iteration();
    }
  } else {
    std::barrier sync(static_cast<std::ptrdiff_t>(n_threads), finish_iteration);
    const auto worker = [&](Index t) {
      Matrix X, scratch;
      while (!done) {
        for (Index b = t; b < n_blocks; b += n_threads) run_block(b, X, scratch);
        sync.arrive_and_wait();
      }
    };
    std::vector<std::jthread> pool;
    for (Index t = 1; t < n_threads; ++t) pool.emplace_back(worker, t);
    worker(0);
  }
  if (failure) std::rethrow_exception(failure);

  SolveReport report{AbundanceMatrix(std::move(state.U))};
  report.iterations = state.iter;
  report.final_primal_residual = state.primal_residual;
  report.final_dual_residual = state.dual_residual;
  report.objective = unmixing_objective(Y, library, report.abundances.values(),
                                        lambda, beta, use_prior ? prior : nullptr);
  report.primal_history = std::move(history);
  report.converged = converged;
  report.final_mu = mu;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace mua
