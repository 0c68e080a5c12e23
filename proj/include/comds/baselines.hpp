#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "comds/types.hpp"

namespace comds {

struct ClassicalMdsResult {
  Matrix coords;        ///< n x r, columns ordered by descending eigenvalue
  Vector eigenvalues;   ///< top-r eigenvalues of the double-centered matrix
  std::vector<std::string> warnings;
};

/// Torgerson scaling: eigendecomposition of -1/2 J (D o D) J, keeping the
/// top `rank` eigenpairs. Non-positive eigenvalues are truncated to zero and
/// the corresponding columns come back as zeros.
inline ClassicalMdsResult classical_mds(const Matrix& D, Index rank) {
  const Index n = D.rows();
  if (D.cols() != n) throw ValidationError("classical_mds: distance matrix must be square");
  if (rank < 1 || rank > n) throw ValidationError("classical_mds: rank must be in [1, n]");
  if (!D.allFinite()) throw ValidationError("classical_mds: distance matrix has missing entries");

  Matrix B = -0.5 * D.cwiseProduct(D);
  const Vector row_mean = B.rowwise().mean();
  const Vector col_mean = B.colwise().mean().transpose();
  const double grand = B.mean();
  B.colwise() -= row_mean;
  B.rowwise() -= col_mean.transpose();
  B.array() += grand;
  B = 0.5 * (B + B.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(B);
  if (eig.info() != Eigen::Success) throw SolverError("classical_mds: eigendecomposition failed");

  ClassicalMdsResult out;
  out.coords.setZero(n, rank);
  out.eigenvalues.setZero(rank);
  // SelfAdjointEigenSolver sorts ascending
  const double top = std::max(eig.eigenvalues()(n - 1), 0.0);
  const double floor = top * 1e-12;
  int truncated = 0;
  for (Index k = 0; k < rank; ++k) {
    const double lambda = eig.eigenvalues()(n - 1 - k);
    out.eigenvalues(k) = lambda;
    if (lambda <= floor) {
      ++truncated;
      continue;
    }
    out.coords.col(k) = eig.eigenvectors().col(n - 1 - k) * std::sqrt(lambda);
  }
  if (truncated > 0) {
    out.warnings.push_back("classical_mds: " + std::to_string(truncated) +
                           " of the requested eigenvalues are non-positive; columns zero-padded");
  }
  if (eig.eigenvalues()(0) < -floor && eig.eigenvalues()(0) < -1e-9 * std::abs(top)) {
    out.warnings.push_back("classical_mds: negative eigenvalues truncated (distances not Euclidean)");
  }
  return out;
}

/// Fills NaN entries of a symmetric distance matrix with shortest-path
/// lengths over the finite entries (dense Dijkstra from each affected row).
/// Entries left unreachable stay NaN.
inline Matrix shortest_path_completion(const Matrix& D) {
  const Index n = D.rows();
  Matrix out = D;
  const double inf = std::numeric_limits<double>::infinity();
  for (Index src = 0; src < n; ++src) {
    bool needs = false;
    for (Index j = 0; j < n && !needs; ++j) needs = std::isnan(D(src, j));
    if (!needs) continue;

    Vector dist = Vector::Constant(n, inf);
    std::vector<bool> done(static_cast<std::size_t>(n), false);
    dist(src) = 0.0;
    for (Index iter = 0; iter < n; ++iter) {
      Index u = -1;
      double best = inf;
      for (Index v = 0; v < n; ++v) {
        if (!done[static_cast<std::size_t>(v)] && dist(v) < best) {
          best = dist(v);
          u = v;
        }
      }
      if (u < 0) break;
      done[static_cast<std::size_t>(u)] = true;
      for (Index v = 0; v < n; ++v) {
        const double w = D(u, v);
        if (done[static_cast<std::size_t>(v)] || std::isnan(w)) continue;
        if (dist(u) + w < dist(v)) dist(v) = dist(u) + w;
      }
    }
    for (Index j = 0; j < n; ++j) {
      if (std::isnan(D(src, j)) && std::isfinite(dist(j))) {
        out(src, j) = dist(j);
        out(j, src) = dist(j);
      }
    }
  }
  return out;
}

enum class PcaScaling {
  standardize,  ///< center and scale every column to unit variance
  center,       ///< center only
};

/// Top-`rank` principal component scores of the column-concatenated source
/// matrices. Complete data only.
inline Matrix pca_concat(const AlignedDataset& ds, Index rank, PcaScaling scaling = PcaScaling::standardize) {
  if (rank < 1) throw ValidationError("pca_concat: rank must be >= 1");
  const Index n = static_cast<Index>(ds.n());
  Index cols = 0;
  for (const auto& src : ds.sources) {
    if (!src.complete()) throw ValidationError("PCA baseline requires complete data");
    cols += src.dims();
  }
  Matrix X(n, cols);
  Index off = 0;
  for (const auto& src : ds.sources) {
    X.middleCols(off, src.dims()) = src.coords;
    off += src.dims();
  }
  X.rowwise() -= X.colwise().mean();
  if (scaling == PcaScaling::standardize) {
    for (Index c = 0; c < X.cols(); ++c) {
      const double sd = std::sqrt(X.col(c).squaredNorm() / static_cast<double>(n - 1));
      if (sd > 0.0) X.col(c) /= sd;
    }
  }

  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU);
  Matrix scores = Matrix::Zero(n, rank);
  const Index k = std::min(rank, static_cast<Index>(svd.singularValues().size()));
  for (Index c = 0; c < k; ++c) scores.col(c) = svd.matrixU().col(c) * svd.singularValues()(c);
  return scores;
}

}  // namespace comds
