#pragma once

#include <cmath>
#include <limits>

#include "comds/types.hpp"

namespace comds {

enum class Metric { euclidean, unsupported };

/// Distances between the present rows of one coordinate matrix. Rows that are
/// absent get NaN so any accidental read is loud.
inline SourceDistances source_distances(const Matrix& coords, const std::vector<bool>& present,
                                        Metric metric = Metric::euclidean) {
  if (metric != Metric::euclidean) throw ValidationError("metric not implemented");
  const Index n = coords.rows();
  SourceDistances out;
  out.present = present;
  out.dist.setConstant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (Index i = 0; i < n; ++i) {
    if (!present[static_cast<std::size_t>(i)]) continue;
    out.dist(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      if (!present[static_cast<std::size_t>(j)]) continue;
      const double d = (coords.row(i) - coords.row(j)).norm();
      out.dist(i, j) = d;
      out.dist(j, i) = d;
    }
  }
  return out;
}

inline DistanceSet pairwise_distances(const AlignedDataset& ds, Metric metric = Metric::euclidean) {
  if (metric != Metric::euclidean) throw ValidationError("metric not implemented");
  DistanceSet out;
  out.sources.reserve(ds.num_sources());
  for (const auto& src : ds.sources) out.sources.push_back(source_distances(src.coords, src.present, metric));
  return out;
}

}  // namespace comds
