#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace comds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Input that violates a data-model invariant (bad files, bad datasets,
/// out-of-range parameters).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Failure inside the optimizer (degenerate inputs it cannot fit).
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct EntityId {
  std::string value;

  EntityId() = default;
  explicit EntityId(std::string v) : value(std::move(v)) {}

  auto operator<=>(const EntityId&) const = default;
};

/// One source's coordinates for the aligned entities. Row i is only
/// meaningful when present[i] is set.
struct SourceEmbedding {
  std::string name;
  Matrix coords;
  std::vector<bool> present;
  double weight = 1.0;

  Index rows() const { return coords.rows(); }
  Index dims() const { return coords.cols(); }

  std::size_t present_count() const {
    return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
  }

  std::vector<Index> present_rows() const {
    std::vector<Index> rows;
    rows.reserve(present.size());
    for (std::size_t i = 0; i < present.size(); ++i)
      if (present[i]) rows.push_back(static_cast<Index>(i));
    return rows;
  }

  bool complete() const {
    return std::all_of(present.begin(), present.end(), [](bool b) { return b; });
  }
};

/// Entities plus S sources aligned row-wise.
struct AlignedDataset {
  std::vector<EntityId> entities;
  std::vector<SourceEmbedding> sources;

  std::size_t n() const { return entities.size(); }
  std::size_t num_sources() const { return sources.size(); }

  /// Row of the lexicographically smallest id; used as the sign anchor.
  std::size_t anchor_row() const {
    return static_cast<std::size_t>(
        std::min_element(entities.begin(), entities.end()) - entities.begin());
  }

  bool operator==(const AlignedDataset& o) const {
    if (entities != o.entities || sources.size() != o.sources.size()) return false;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const auto& a = sources[s];
      const auto& b = o.sources[s];
      if (a.name != b.name || a.weight != b.weight || a.present != b.present) return false;
      if (a.coords.rows() != b.coords.rows() || a.coords.cols() != b.coords.cols()) return false;
      for (Index i = 0; i < a.coords.rows(); ++i) {
        if (!a.present[static_cast<std::size_t>(i)]) continue;
        if (a.coords.row(i) != b.coords.row(i)) return false;
      }
    }
    return true;
  }
};

/// Pairwise distances of one source. Entries involving an absent entity are
/// never read.
struct SourceDistances {
  Matrix dist;
  std::vector<bool> present;

  bool pair_valid(Index i, Index j) const {
    return present[static_cast<std::size_t>(i)] && present[static_cast<std::size_t>(j)];
  }

  /// Number of valid unordered pairs i < j.
  double pair_count() const {
    const double m = static_cast<double>(std::count(present.begin(), present.end(), true));
    return m * (m - 1.0) / 2.0;
  }
};

struct DistanceSet {
  std::vector<SourceDistances> sources;

  std::size_t num_sources() const { return sources.size(); }
  Index n() const { return sources.empty() ? 0 : sources.front().dist.rows(); }
};

/// Result of a consensus fit. Consensus columns are centered with unit RMS;
/// all scale lives in the per-source diagonals.
struct ConsensusFit {
  Matrix consensus;
  std::vector<Vector> source_weights;
  std::vector<double> stress_trace;
  double initial_stress = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> per_source_error;
  /// Per-source multipliers of the optimized objective (analyst weight times
  /// the distance normalization); the trace is stress() under these.
  std::vector<double> objective_weights;
  /// Root-mean-square over sources of each column's diagonal weight. A value
  /// near zero flags a column the data does not support.
  Vector column_scale;
  std::vector<std::string> warnings;

  Index rank() const { return consensus.cols(); }
  double final_stress() const {
    return stress_trace.empty() ? initial_stress : stress_trace.back();
  }
};

struct Decomposition {
  std::string source_name;
  std::vector<Index> rows;  ///< dataset rows the matrices below refer to
  Matrix consensus_part;
  Matrix idiosyncratic;
};

struct DiagnosticsReport {
  std::vector<double> relative_errors;
  std::vector<std::optional<double>> loo_stability;
  std::vector<double> per_source_error;
  std::vector<std::string> notes;
};

}  // namespace comds
