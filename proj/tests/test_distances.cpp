#include <gtest/gtest.h>

#include "comds/distances.hpp"
#include "oracles.hpp"

using namespace comds;

namespace {

AlignedDataset pair_dataset(const Matrix& a, const Matrix& b) {
  AlignedDataset ds;
  ds.entities = oracle::ids(static_cast<std::size_t>(a.rows()));
  ds.sources = {oracle::source("a", a), oracle::source("b", b)};
  return ds;
}

}  // namespace

TEST(Distances, HandExamples) {
  Matrix one(3, 1), two(3, 2);
  one << 0, 3, 3;
  two << 0, 0, 3, 4, 3, 4;
  const auto d = pairwise_distances(pair_dataset(one, two));
  EXPECT_DOUBLE_EQ(d.sources[0].dist(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(d.sources[1].dist(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(d.sources[1].dist(1, 2), 0.0);  // coincident rows
  EXPECT_DOUBLE_EQ(d.sources[0].dist(1, 2), 0.0);
  for (const auto& s : d.sources) {
    EXPECT_TRUE(s.dist.isApprox(s.dist.transpose()));
    EXPECT_EQ(s.dist.diagonal().norm(), 0.0);
  }
}

TEST(Distances, MatchesLoopOracleAndMask) {
  auto ds = pair_dataset(oracle::gaussian(15, 3, 1), oracle::gaussian(15, 2, 2));
  ds.sources[1].present[4] = false;
  const auto d = pairwise_distances(ds);
  for (std::size_t s = 0; s < 2; ++s)
    for (Index i = 0; i < 15; ++i)
      for (Index j = 0; j < 15; ++j) {
        const bool valid = ds.sources[s].present[static_cast<std::size_t>(i)] &&
                           ds.sources[s].present[static_cast<std::size_t>(j)];
        EXPECT_EQ(d.sources[s].pair_valid(i, j), valid);
        if (valid) {
          EXPECT_NEAR(d.sources[s].dist(i, j), oracle::dist(ds.sources[s].coords, i, j), 1e-12);
        }
      }
  EXPECT_DOUBLE_EQ(d.sources[1].pair_count(), 14.0 * 13.0 / 2.0);
}

TEST(Distances, TriangleInequality) {
  const auto d = pairwise_distances(pair_dataset(oracle::gaussian(12, 4, 3), oracle::gaussian(12, 1, 4)));
  for (const auto& s : d.sources)
    for (Index i = 0; i < 12; ++i)
      for (Index j = 0; j < 12; ++j)
        for (Index k = 0; k < 12; ++k) EXPECT_LE(s.dist(i, k), s.dist(i, j) + s.dist(j, k) + 1e-12);
}

TEST(Distances, InvariantToShiftAndRotationScalesWithFactor) {
  const Matrix X = oracle::gaussian(20, 3, 5);
  const Eigen::HouseholderQR<Matrix> qr(oracle::gaussian(3, 3, 6));
  const Matrix Q = qr.householderQ();
  Matrix moved = X * Q;
  moved.rowwise() += Eigen::RowVector3d(5.0, -2.0, 7.5);
  const auto d = pairwise_distances(pair_dataset(X, moved));
  EXPECT_LT((d.sources[0].dist - d.sources[1].dist).cwiseAbs().maxCoeff(), 1e-12);

  const auto scaled = pairwise_distances(pair_dataset(X, 2.5 * X));
  EXPECT_LT((2.5 * scaled.sources[0].dist - scaled.sources[1].dist).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Distances, UnsupportedMetric) {
  const auto ds = pair_dataset(oracle::gaussian(4, 1, 1), oracle::gaussian(4, 1, 2));
  try {
    pairwise_distances(ds, Metric::unsupported);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "metric not implemented");
  }
}
