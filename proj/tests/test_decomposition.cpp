#include <gtest/gtest.h>

#include "comds/decomposition.hpp"
#include "comds/solver.hpp"
#include "oracles.hpp"

using namespace comds;

namespace {

ConsensusFit fake_fit(const Matrix& Z) {
  ConsensusFit f;
  f.consensus = Z;
  return f;
}

AlignedDataset with_source(std::size_t n, const Matrix& X) {
  AlignedDataset ds;
  ds.entities = oracle::ids(n);
  ds.sources = {oracle::source("s", X), oracle::source("t", X)};
  return ds;
}

// Normal-equations residual X - Z (Z^T Z)^{-1} Z^T X.
Matrix ols_residual(const Matrix& Z, const Matrix& X) {
  const Matrix beta = (Z.transpose() * Z).ldlt().solve(Z.transpose() * X);
  return X - Z * beta;
}

}  // namespace

TEST(Decompose, SourceInConsensusSpanHasNoIdiosyncraticPart) {
  const Matrix Z = oracle::gaussian(15, 1, 1);
  const auto d = decompose(fake_fit(Z), with_source(15, -2.5 * Z), 0);
  EXPECT_LT(d.idiosyncratic.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, OrthogonalSourceHasNoConsensusPart) {
  Matrix Z = oracle::gaussian(15, 1, 1);
  Matrix X = oracle::gaussian(15, 1, 2);
  X -= Z * (Z.col(0).dot(X.col(0)) / Z.col(0).squaredNorm());  // Gram-Schmidt step
  const auto d = decompose(fake_fit(Z), with_source(15, X), 0);
  EXPECT_LT(d.consensus_part.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, MatchesLeastSquaresResiduals) {
  const Matrix Z = oracle::gaussian(20, 1, 3);
  const Matrix X = oracle::gaussian(20, 1, 4);
  const auto d = decompose(fake_fit(Z), with_source(20, X), 0);
  EXPECT_LT((d.idiosyncratic - ols_residual(Z, X)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, RestrictsToPresentRows) {
  const Matrix Z = oracle::gaussian(20, 2, 5);
  const Matrix X = oracle::gaussian(20, 3, 6);
  auto ds = with_source(20, X);
  std::vector<Index> keep;
  for (Index i = 0; i < 20; ++i) {
    if (i % 4 == 1) ds.sources[0].present[static_cast<std::size_t>(i)] = false;
    else keep.push_back(i);
  }
  const auto d = decompose(fake_fit(Z), ds, 0);
  EXPECT_EQ(d.rows, keep);
  const Matrix Zr = Z(keep, Eigen::all);
  const Matrix Xr = X(keep, Eigen::all);
  EXPECT_LT((d.idiosyncratic - ols_residual(Zr, Xr)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, IdentitiesOnFittedConsensus) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ds = oracle::random_dataset(40, 3, 2, seed, 0.2);
    SolverConfig cfg;
    cfg.rank = 2;
    const auto f = fit_dataset(ds, cfg);
    for (std::size_t s = 0; s < ds.num_sources(); ++s) {
      const auto d = decompose(f, ds, s);
      const auto& src = ds.sources[s];
      const Matrix Xr = src.coords(d.rows, Eigen::all);
      const Matrix Zr = f.consensus(d.rows, Eigen::all);
      EXPECT_LT((Xr - d.consensus_part - d.idiosyncratic).cwiseAbs().maxCoeff(), 1e-10);
      for (Index a = 0; a < d.idiosyncratic.cols(); ++a)
        for (Index b = 0; b < Zr.cols(); ++b) {
          const double den = d.idiosyncratic.col(a).norm() * Zr.col(b).norm();
          if (den > 0) {
            EXPECT_LT(std::abs(d.idiosyncratic.col(a).dot(Zr.col(b))) / den, 1e-8);
          }
        }
      // projector built from the normal equations is idempotent and symmetric
      const Matrix P = Zr * (Zr.transpose() * Zr).ldlt().solve(Zr.transpose());
      EXPECT_LT((P * P - P).cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((P * Xr - d.consensus_part).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Decompose, RankDeficientRestrictionRefused) {
  Matrix Z = oracle::gaussian(10, 2, 1);
  Z.col(1) = 3.0 * Z.col(0);
  try {
    decompose(fake_fit(Z), with_source(10, oracle::gaussian(10, 2, 2)), 0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("projection undefined"), std::string::npos);
  }
}

TEST(Decompose, BadIndexOrShape) {
  const Matrix Z = oracle::gaussian(10, 1, 1);
  const auto ds = with_source(10, oracle::gaussian(10, 1, 2));
  EXPECT_THROW(decompose(fake_fit(Z), ds, 2), ValidationError);
  EXPECT_THROW(decompose(fake_fit(oracle::gaussian(9, 1, 1)), ds, 0), ValidationError);
}
