#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "comds/parallel.hpp"
#include "comds/solver.hpp"
#include "comds/types.hpp"
#include "comds/validate.hpp"

namespace comds {

/// Each source's share of the total pair-normalized squared error between
/// its distances and the fitted consensus distances. Shares sum to one; when
/// every source fits exactly the shares are uniform and a note is appended.
inline std::vector<double> relative_errors(const ConsensusFit& fit, const DistanceSet& dist,
                                           std::vector<std::string>* notes = nullptr) {
  const std::size_t S = dist.num_sources();
  if (fit.source_weights.size() != S)
    throw ValidationError("relative_errors: fit and distances disagree on the number of sources");
  // the per-source terms carry no analyst weight
  const std::vector<double> unit(S, 1.0);
  const auto br = stress(dist, unit, fit.consensus, fit.source_weights);
  double total = 0.0;
  for (double v : br.normalized) total += v;
  std::vector<double> out(S, 1.0 / static_cast<double>(S));
  if (!(total > 0.0)) {
    if (notes) notes->push_back("total error is zero; relative errors set to 1/S");
    return out;
  }
  for (std::size_t s = 0; s < S; ++s) out[s] = br.normalized[s] / total;
  return out;
}

/// Sample Pearson correlation.
inline double pearson(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("pearson: need two equal-length vectors");
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double den = ca.norm() * cb.norm();
  if (!(den > 0.0)) throw ValidationError("pearson: constant input");
  return ca.dot(cb) / den;
}

namespace detail {

inline Matrix orthonormal_basis(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  const Index r = A.cols();
  if (A.rows() < r || sv.size() < r || !(sv(r - 1) > 1e-12 * sv(0)))
    throw ValidationError("subspace_correlation: input is rank deficient");
  return svd.matrixU().leftCols(r);
}

}  // namespace detail

/// Mean squared singular value of ortho(A)^T ortho(B): 1 for identical
/// column spans, 0 for orthogonal ones.
inline double subspace_correlation(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols() || A.cols() < 1)
    throw ValidationError("subspace_correlation: inputs must have the same shape");
  const Matrix Qa = detail::orthonormal_basis(A);
  const Matrix Qb = detail::orthonormal_basis(B);
  const Vector d = Eigen::JacobiSVD<Matrix>(Qa.transpose() * Qb).singularValues();
  const double rho = d.squaredNorm() / static_cast<double>(A.cols());
  return std::clamp(rho, 0.0, 1.0);
}

/// Similarity of two consensus estimates: |Pearson| for one column, subspace
/// correlation otherwise.
inline double consensus_similarity(const Matrix& A, const Matrix& B) {
  if (A.cols() == 1 && B.cols() == 1) return std::abs(pearson(A.col(0), B.col(0)));
  return subspace_correlation(A, B);
}

struct LooResult {
  std::vector<std::optional<double>> stability;  ///< one per dropped source
  std::vector<std::optional<Matrix>> refits;     ///< n x r, NaN on rows without data
  std::vector<std::size_t> compared_rows;
  std::vector<std::string> notes;
};

/// Dataset without source `drop`; entities left with no source are removed.
/// `kept_rows` maps rows of the result back to rows of `ds`.
inline AlignedDataset drop_source(const AlignedDataset& ds, std::size_t drop, std::vector<Index>& kept_rows) {
  kept_rows.clear();
  for (std::size_t i = 0; i < ds.n(); ++i) {
    bool any = false;
    for (std::size_t s = 0; s < ds.num_sources(); ++s)
      if (s != drop && ds.sources[s].present[i]) any = true;
    if (any) kept_rows.push_back(static_cast<Index>(i));
  }
  AlignedDataset out;
  for (Index i : kept_rows) out.entities.push_back(ds.entities[static_cast<std::size_t>(i)]);
  for (std::size_t s = 0; s < ds.num_sources(); ++s) {
    if (s == drop) continue;
    const auto& src = ds.sources[s];
    SourceEmbedding e;
    e.name = src.name;
    e.weight = src.weight;
    e.coords.resize(static_cast<Index>(kept_rows.size()), src.dims());
    for (std::size_t k = 0; k < kept_rows.size(); ++k) {
      e.coords.row(static_cast<Index>(k)) = src.coords.row(kept_rows[k]);
      e.present.push_back(src.present[static_cast<std::size_t>(kept_rows[k])]);
    }
    out.sources.push_back(std::move(e));
  }
  return out;
}

/// Refits with each source left out and compares every refit with `full`
/// on the rows both fits define.
inline LooResult loo_stability(const AlignedDataset& ds, const SolverConfig& cfg, const ConsensusFit& full) {
  const std::size_t S = ds.num_sources();
  if (S < 3) throw ValidationError("loo_stability: need at least 3 sources");
  if (full.consensus.rows() != static_cast<Index>(ds.n()) || full.consensus.cols() != cfg.rank)
    throw ValidationError("loo_stability: full fit does not match dataset and rank");

  LooResult out;
  out.stability.resize(S);
  out.refits.resize(S);
  out.compared_rows.assign(S, 0);
  std::vector<std::string> reasons(S);

  parallel_for(S, [&](std::size_t s) {
    std::vector<Index> kept;
    const AlignedDataset sub = drop_source(ds, s, kept);
    const auto rep = validate_dataset(sub, cfg.rank);
    if (!rep.ok()) {
      reasons[s] = "without '" + ds.sources[s].name + "': undefined (" + rep.summary() + ")";
      return;
    }
    ConsensusFit refit;
    try {
      refit = fit_dataset(sub, cfg);
    } catch (const std::exception& e) {
      reasons[s] = "without '" + ds.sources[s].name + "': undefined (" + e.what() + ")";
      return;
    }
    const auto m = static_cast<Index>(kept.size());
    Matrix a(m, cfg.rank);
    Matrix mapped = Matrix::Constant(static_cast<Index>(ds.n()), cfg.rank, std::numeric_limits<double>::quiet_NaN());
    for (Index k = 0; k < m; ++k) {
      a.row(k) = full.consensus.row(kept[static_cast<std::size_t>(k)]);
      mapped.row(kept[static_cast<std::size_t>(k)]) = refit.consensus.row(k);
    }
    try {
      out.stability[s] = consensus_similarity(a, refit.consensus);
    } catch (const std::exception& e) {
      reasons[s] = "without '" + ds.sources[s].name + "': undefined (" + e.what() + ")";
    }
    out.refits[s] = std::move(mapped);
    out.compared_rows[s] = kept.size();
    if (kept.size() != ds.n())
      reasons[s] = "without '" + ds.sources[s].name + "': compared on " + std::to_string(kept.size()) + " of " +
                   std::to_string(ds.n()) + " entities";
  });
  for (auto& r : reasons)
    if (!r.empty()) out.notes.push_back(std::move(r));
  return out;
}

inline LooResult loo_stability(const AlignedDataset& ds, const SolverConfig& cfg) {
  return loo_stability(ds, cfg, fit_dataset(ds, cfg));
}

/// Relative errors plus, when requested, leave-one-out stability.
inline DiagnosticsReport diagnose(const AlignedDataset& ds, const ConsensusFit& fit, const SolverConfig& cfg,
                                  bool with_loo) {
  DiagnosticsReport rep;
  const auto dist = pairwise_distances(ds);
  rep.relative_errors = relative_errors(fit, dist, &rep.notes);
  rep.per_source_error = stress(dist, std::vector<double>(ds.num_sources(), 1.0), fit.consensus, fit.source_weights)
                             .normalized;
  if (with_loo) {
    auto loo = loo_stability(ds, cfg, fit);
    rep.loo_stability = std::move(loo.stability);
    for (auto& n : loo.notes) rep.notes.push_back(std::move(n));
  }
  return rep;
}

}  // namespace comds
