#pragma once

// Independent reference implementations used to cross-check the library.
// Deliberately naive: dense operators, plain loops, no shared helpers.

#include "mua/datamodel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using mua::Index;
using mua::Matrix;

/// Dense N x K averaging operator.
inline Matrix dense_w(const std::vector<Index>& labels, Index k) {
  const Index n = static_cast<Index>(labels.size());
  std::vector<double> count(static_cast<std::size_t>(k), 0.0);
  for (const Index l : labels) count[static_cast<std::size_t>(l)] += 1.0;
  Matrix W = Matrix::Zero(n, k);
  for (Index i = 0; i < n; ++i) {
    const Index l = labels[static_cast<std::size_t>(i)];
    W(i, l) = 1.0 / count[static_cast<std::size_t>(l)];
  }
  return W;
}

/// Dense K x N broadcast operator.
inline Matrix dense_w_conj(const std::vector<Index>& labels, Index k) {
  const Index n = static_cast<Index>(labels.size());
  Matrix Ws = Matrix::Zero(k, n);
  for (Index i = 0; i < n; ++i) Ws(labels[static_cast<std::size_t>(i)], i) = 1.0;
  return Ws;
}

/// Group-by mean, one accumulation per (row, label).
inline Matrix group_mean(const Matrix& M, const std::vector<Index>& labels, Index k) {
  Matrix out = Matrix::Zero(M.rows(), k);
  for (Index r = 0; r < M.rows(); ++r)
    for (Index g = 0; g < k; ++g) {
      double s = 0.0;
      int c = 0;
      for (std::size_t n = 0; n < labels.size(); ++n)
        if (labels[n] == g) {
          s += M(r, static_cast<Index>(n));
          ++c;
        }
      out(r, g) = s / c;
    }
  return out;
}

inline Matrix dense_inverse(const Matrix& A, double shift) {
  Matrix G = A.transpose() * A;
  G += shift * Matrix::Identity(G.rows(), G.cols());
  return G.fullPivLu().inverse();
}

inline double objective(const Matrix& Y, const Matrix& A, const Matrix& X, double lambda,
                        double beta, const Matrix* prior) {
  double v = 0.5 * (Y - A * X).squaredNorm() + lambda * X.cwiseAbs().sum();
  if (beta > 0.0 && prior) v += 0.5 * beta * (*prior - X).squaredNorm();
  return v;
}

/// Accelerated projected gradient (FISTA with adaptive restart) on
///   1/2 ||Y - A X||^2 + lambda sum(X) + beta/2 ||P - X||^2,  X >= 0.
/// Over the nonnegative orthant the l1 term is linear, so the projection is
/// the whole proximal step.
inline Matrix projected_gradient(const Matrix& Y, const Matrix& A, double lambda, double beta,
                                 const Matrix* prior, long iters) {
  const Index P = A.cols(), N = Y.cols();
  const Matrix G = A.transpose() * A;
  const Matrix AtY = A.transpose() * Y;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(G);
  const double lip = eig.eigenvalues().maxCoeff() + beta;
  const double step = 1.0 / lip;
  Matrix X = Matrix::Zero(P, N), Xprev = X, Z = X;
  double t = 1.0;
  const auto grad = [&](const Matrix& M) {
    Matrix g = G * M - AtY;
    g.array() += lambda;
    if (beta > 0.0) g += beta * (M - *prior);
    return g;
  };
  double fprev = std::numeric_limits<double>::infinity();
  for (long it = 0; it < iters; ++it) {
    Xprev = X;
    X = (Z - step * grad(Z)).cwiseMax(0.0);
    const double f = objective(Y, A, X, lambda, beta, prior);
    if (f > fprev) {
      // restart momentum
      t = 1.0;
      Z = X;
      fprev = f;
      continue;
    }
    fprev = f;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Z = X + ((t - 1.0) / t_next) * (X - Xprev);
    t = t_next;
    if ((X - Xprev).norm() < 1e-15 * (1.0 + X.norm()) && it > 100) break;
  }
  return X;
}

/// One Lloyd step exactly as written in a textbook: assign every point to
/// its nearest center (lowest index on ties), then average.
struct LloydResult {
  std::vector<Index> labels;
  Matrix centers;
};

inline std::vector<Index> nearest(const Matrix& points, const Matrix& centers) {
  std::vector<Index> labels(static_cast<std::size_t>(points.cols()));
  for (Index n = 0; n < points.cols(); ++n) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index k = 0; k < centers.cols(); ++k) {
      double d = 0.0;
      for (Index i = 0; i < points.rows(); ++i) {
        const double e = points(i, n) - centers(i, k);
        d += e * e;
      }
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    labels[static_cast<std::size_t>(n)] = arg;
  }
  return labels;
}

inline Matrix recenter(const Matrix& points, const std::vector<Index>& labels,
                       const Matrix& old_centers) {
  Matrix c = Matrix::Zero(old_centers.rows(), old_centers.cols());
  std::vector<int> count(static_cast<std::size_t>(old_centers.cols()), 0);
  for (Index n = 0; n < points.cols(); ++n) {
    c.col(labels[static_cast<std::size_t>(n)]) += points.col(n);
    ++count[static_cast<std::size_t>(labels[static_cast<std::size_t>(n)])];
  }
  for (Index k = 0; k < c.cols(); ++k) {
    if (count[static_cast<std::size_t>(k)] == 0)
      c.col(k) = old_centers.col(k);
    else
      c.col(k) /= count[static_cast<std::size_t>(k)];
  }
  return c;
}

inline Matrix random_matrix(std::mt19937_64& rng, Index r, Index c, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix M(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) M(i, j) = d(rng);
  return M;
}

inline std::vector<Index> random_labels(std::mt19937_64& rng, Index n, Index k) {
  std::uniform_int_distribution<Index> d(0, k - 1);
  std::vector<Index> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = d(rng);
  return labels;
}

}  // namespace oracle
