#pragma once

#include <string>

#include <Eigen/SVD>

#include "comds/types.hpp"

namespace comds {

/// Largest condition number of the restricted consensus accepted before the
/// projection is declared undefined.
inline constexpr double kMaxProjectionCondition = 1e12;

/// Splits the present rows of one source into its projection onto the
/// consensus column span and the orthogonal residual.
inline Decomposition decompose(const ConsensusFit& fit, const AlignedDataset& ds, std::size_t source_index) {
  if (source_index >= ds.num_sources()) throw ValidationError("decompose: source index out of range");
  const auto& src = ds.sources[source_index];
  if (fit.consensus.rows() != static_cast<Index>(ds.n()))
    throw ValidationError("decompose: fit and dataset disagree on the number of entities");

  Decomposition out;
  out.source_name = src.name;
  out.rows = src.present_rows();
  const auto m = static_cast<Index>(out.rows.size());
  const Index r = fit.consensus.cols();

  Matrix Zr(m, r);
  Matrix Xs(m, src.dims());
  for (Index i = 0; i < m; ++i) {
    Zr.row(i) = fit.consensus.row(out.rows[static_cast<std::size_t>(i)]);
    Xs.row(i) = src.coords.row(out.rows[static_cast<std::size_t>(i)]);
  }

  // the thin left singular vectors give an orthonormal basis of span(Zr)
  Eigen::JacobiSVD<Matrix> svd(Zr, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  if (m < r || sv.size() < r || !(sv(r - 1) > 0.0) || sv(0) / sv(r - 1) > kMaxProjectionCondition)
    throw ValidationError("projection undefined: restricted consensus for source '" + src.name +
                          "' is rank deficient");
  const Matrix Q = svd.matrixU().leftCols(r);

  out.consensus_part = Q * (Q.transpose() * Xs);
  out.idiosyncratic = Xs - out.consensus_part;
  return out;
}

}  // namespace comds
