#pragma once

#include "mua/datamodel.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace mua {

/// Returned by sre() when the estimate is exact.
inline constexpr double kSreExact = std::numeric_limits<double>::infinity();

namespace detail {
inline void require_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch,
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
}
}  // namespace detail

/// Signal-to-reconstruction error in dB: 10 log10(||X||^2 / ||X - X_hat||^2).
inline double sre(const AbundanceMatrix& truth, const AbundanceMatrix& estimate) {
  detail::require_same_shape(truth.values(), estimate.values());
  const double signal = truth.values().squaredNorm();
  if (signal == 0.0) throw Error(ErrorCode::ZeroTruth, "truth is all zero");
  const double error = (truth.values() - estimate.values()).squaredNorm();
  if (error == 0.0) return kSreExact;
  return 10.0 * std::log10(signal / error);
}

inline double rmse(const AbundanceMatrix& truth, const AbundanceMatrix& estimate) {
  detail::require_same_shape(truth.values(), estimate.values());
  return (truth.values() - estimate.values()).norm() /
         std::sqrt(static_cast<double>(truth.values().size()));
}

/// Sums abundance rows that share a material id, then rescales every pixel
/// column to sum to one (all-zero columns stay zero). Output rows follow the
/// ascending order of the material ids.
inline Matrix aggregate_by_material(const AbundanceMatrix& estimate,
                                    const std::vector<int>& material_map) {
  const Matrix& X = estimate.values();
  if (static_cast<Index>(material_map.size()) != X.rows())
    throw Error(ErrorCode::UnmappedSignature,
                "material map covers " + std::to_string(material_map.size()) +
                    " of " + std::to_string(X.rows()) + " signatures");
  std::map<int, Index> row_of;
  for (const int m : material_map) row_of.emplace(m, 0);
  Index next = 0;
  for (auto& [id, row] : row_of) row = next++;
  Matrix out = Matrix::Zero(next, X.cols());
  for (Index p = 0; p < X.rows(); ++p)
    out.row(row_of.at(material_map[static_cast<std::size_t>(p)])) += X.row(p);
  for (Index n = 0; n < out.cols(); ++n) {
    const double total = out.col(n).sum();
    if (total > 0.0) out.col(n) /= total;
  }
  return out;
}

/// One row of an evaluation table.
struct EvalReport {
  double sre_db = 0.0;
  double rmse = 0.0;
  double runtime_s = 0.0;
  MuaConfig config_echo{};
};

}  // namespace mua
