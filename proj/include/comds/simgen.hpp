#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "comds/types.hpp"
#include "comds/validate.hpp"

namespace comds {

enum class ScenarioKind {
  swiss_roll,
  rotation,
  imbalanced_dims,
  correlated_features,
  relative_error_sweep,
  missing_at_random,
};

inline std::string scenario_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::swiss_roll: return "swiss_roll";
    case ScenarioKind::rotation: return "rotation";
    case ScenarioKind::imbalanced_dims: return "imbalanced_dims";
    case ScenarioKind::correlated_features: return "correlated_features";
    case ScenarioKind::relative_error_sweep: return "relative_error_sweep";
    case ScenarioKind::missing_at_random: return "missing_at_random";
  }
  return "unknown";
}

inline ScenarioKind parse_scenario(const std::string& name) {
  for (auto k : {ScenarioKind::swiss_roll, ScenarioKind::rotation, ScenarioKind::imbalanced_dims,
                 ScenarioKind::correlated_features, ScenarioKind::relative_error_sweep,
                 ScenarioKind::missing_at_random})
    if (scenario_name(k) == name) return k;
  throw ValidationError("unknown scenario '" + name +
                        "' (expected swiss_roll, rotation, imbalanced_dims, correlated_features, "
                        "relative_error_sweep or missing_at_random)");
}

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::swiss_roll;
  std::size_t n = 0;  ///< 0 selects the scenario default
  std::uint64_t seed = 0;
  int p = 4;          ///< imbalanced_dims: [4, 100]; correlated_features: [1, 5]
  double omega = 0.9; ///< correlated_features: fixed at 0.9; relative_error_sweep: [0, 1]
  int pct = 10;       ///< missing_at_random: one of 1, 5, 10, 20
  /// Noise standard deviation; defaults to half the SD of the true consensus.
  std::optional<double> noise_sd;
};

inline std::size_t default_entity_count(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::swiss_roll: return 500;
    case ScenarioKind::rotation: return 100;
    case ScenarioKind::missing_at_random: return 500;
    default: return 300;
  }
}

struct Scenario {
  AlignedDataset dataset;
  Matrix truth;  ///< ground-truth consensus, n x rank
  Index rank = 1;
  /// Counterpart for paired scenarios: the unrotated sources for `rotation`,
  /// the complete data for `missing_at_random`.
  std::optional<AlignedDataset> reference;
  std::vector<std::string> log;
};

namespace detail {

class ScenarioRng {
public:
  explicit ScenarioRng(std::uint64_t seed) : rng_(seed) {}

  Matrix normal(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) m(r, c) = normal_(rng_);
    return m;
  }
  Matrix normal(Index rows, Index cols, double sd) { return sd * normal(rows, cols); }

  Matrix uniform(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) m(r, c) = uniform_(rng_);
    return m;
  }

  std::mt19937_64& engine() { return rng_; }

private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Sample standard deviation over all entries.
inline double entry_sd(const Matrix& m) {
  const double mean = m.mean();
  const double ss = (m.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(m.size() - 1));
}

/// Modified Gram-Schmidt; returns orthonormal columns.
inline Matrix gram_schmidt(Matrix A) {
  for (Index k = 0; k < A.cols(); ++k) {
    for (Index j = 0; j < k; ++j) A.col(k) -= A.col(j).dot(A.col(k)) * A.col(j);
    const double nrm = A.col(k).norm();
    if (!(nrm > 0.0)) throw ValidationError("gram_schmidt: dependent columns");
    A.col(k) /= nrm;
  }
  return A;
}

inline std::vector<EntityId> entity_ids(std::size_t n) {
  const std::size_t width = std::to_string(n).size();
  std::vector<EntityId> ids;
  ids.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    std::string num = std::to_string(i);
    ids.emplace_back("e" + std::string(width - num.size(), '0') + num);
  }
  return ids;
}

inline SourceEmbedding complete_source(std::string name, Matrix coords) {
  SourceEmbedding s;
  s.name = std::move(name);
  s.present.assign(static_cast<std::size_t>(coords.rows()), true);
  s.coords = std::move(coords);
  return s;
}

inline Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace detail

inline void check_spec(const ScenarioSpec& spec) {
  using detail::require;
  const std::size_t n = spec.n == 0 ? default_entity_count(spec.kind) : spec.n;
  require(n >= 10, "scenario n must be at least 10");
  if (spec.noise_sd) require(*spec.noise_sd >= 0.0 && std::isfinite(*spec.noise_sd), "noise_sd must be >= 0");
  switch (spec.kind) {
    case ScenarioKind::imbalanced_dims:
      require(spec.p >= 4 && spec.p <= 100, "imbalanced_dims: p must be in [4, 100]");
      break;
    case ScenarioKind::correlated_features:
      require(spec.p >= 1 && spec.p <= 5, "correlated_features: p must be in [1, 5]");
      require(spec.omega == 0.9, "correlated_features: omega must be 0.9");
      break;
    case ScenarioKind::relative_error_sweep:
      require(spec.omega >= 0.0 && spec.omega <= 1.0, "relative_error_sweep: omega must be in [0, 1]");
      break;
    case ScenarioKind::missing_at_random:
      require(spec.pct == 1 || spec.pct == 5 || spec.pct == 10 || spec.pct == 20,
              "missing_at_random: pct must be one of 1, 5, 10, 20");
      break;
    default:
      break;
  }
}

/// Builds one seeded synthetic dataset with its ground truth. The same ScenarioSpec
/// always yields bit-identical output.
inline Scenario generate(const ScenarioSpec& spec) {
  check_spec(spec);
  const std::size_t n = spec.n == 0 ? default_entity_count(spec.kind) : spec.n;
  const auto rows = static_cast<Index>(n);
  detail::ScenarioRng rng(spec.seed);
  Scenario out;
  out.dataset.entities = detail::entity_ids(n);
  auto noise_sd = [&](const Matrix& truth) { return spec.noise_sd.value_or(0.5 * detail::entry_sd(truth)); };

  switch (spec.kind) {
    case ScenarioKind::swiss_roll: {
      // unit-square consensus rolled up with t in [1.5 pi, 4.5 pi], height 21
      const Matrix Z = rng.uniform(rows, 2);
      Matrix roll(rows, 3);
      for (Index i = 0; i < rows; ++i) {
        const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * Z(i, 0));
        roll(i, 0) = t * std::cos(t);
        roll(i, 1) = 21.0 * Z(i, 1);
        roll(i, 2) = t * std::sin(t);
      }
      out.dataset.sources.push_back(detail::complete_source("flat", Z));
      out.dataset.sources.push_back(detail::complete_source("roll", roll));
      out.truth = Z;
      out.rank = 2;
      break;
    }
    case ScenarioKind::rotation: {
      const Matrix Z = rng.normal(rows, 2);
      const double a = std::numbers::pi / 3.0;
      Matrix R(2, 2);
      R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      out.dataset.sources.push_back(detail::complete_source("original", Z));
      out.dataset.sources.push_back(detail::complete_source("rotated", Z * R));
      AlignedDataset ref;
      ref.entities = out.dataset.entities;
      ref.sources.push_back(detail::complete_source("original", Z));
      ref.sources.push_back(detail::complete_source("copy", Z));
      out.reference = std::move(ref);
      out.truth = Z;
      out.rank = 2;
      break;
    }
    case ScenarioKind::imbalanced_dims: {
      const int p = spec.p;
      const Matrix Z = rng.normal(rows, 2);
      const Matrix Z3 = rng.normal(rows, p - 2);
      const double sd = noise_sd(Z);
      Vector d12(2);
      d12 << 4.0, 2.0;
      Vector d3 = Vector::Ones(p);
      d3.head(4) << 1.5, 1.5, 4.0, 2.0;
      const Matrix Y1 = Z * d12.asDiagonal() + rng.normal(rows, 2, sd);
      const Matrix Y2 = Z * d12.asDiagonal() + rng.normal(rows, 2, sd);
      const Matrix Y3 = detail::hcat(Z, Z3) * d3.asDiagonal() + rng.normal(rows, p, sd);
      out.dataset.sources.push_back(detail::complete_source("low_dim_1", Y1));
      out.dataset.sources.push_back(detail::complete_source("low_dim_2", Y2));
      out.dataset.sources.push_back(detail::complete_source("high_dim", Y3));
      out.truth = Z;
      out.rank = 2;
      break;
    }
    case ScenarioKind::correlated_features: {
      const int p = spec.p;
      const Matrix Z = rng.normal(rows, 1);
      const Matrix Z1 = rng.normal(rows, p - 1);
      const Matrix Z2 = rng.normal(rows, p - 1);
      const Matrix Z3 = rng.normal(rows, 1);
      const double sd = noise_sd(Z);
      Vector d12 = Vector::Constant(p, p > 1 ? 0.2 / (p - 1) : 0.0);
      d12(0) = 1.0;
      const double d3 = 1.2 / p;
      const Matrix Y1 = detail::hcat(Z, Z1) * d12.asDiagonal() + rng.normal(rows, p, sd);
      const Matrix Y2 = detail::hcat(Z, Z2) * d12.asDiagonal() + rng.normal(rows, p, sd);
      const Matrix mix = std::sqrt(1.0 - spec.omega) * Z + std::sqrt(spec.omega) * Z3;
      const Matrix Y3 = mix * Matrix::Constant(1, p, d3) + rng.normal(rows, p, sd);
      out.dataset.sources.push_back(detail::complete_source("independent_1", Y1));
      out.dataset.sources.push_back(detail::complete_source("independent_2", Y2));
      out.dataset.sources.push_back(detail::complete_source("correlated", Y3));
      out.truth = Z;
      out.rank = 1;
      break;
    }
    case ScenarioKind::relative_error_sweep: {
      // consensus and idiosyncratic columns orthogonalized jointly, scaled so
      // that Z^T Z = n I
      const Matrix Q = detail::gram_schmidt(rng.normal(rows, 4)) * std::sqrt(static_cast<double>(n));
      const Matrix Z = Q.leftCols(2);
      const Matrix Z3 = Q.rightCols(2);
      const double sd = noise_sd(Z);
      const Matrix Y1 = Z + rng.normal(rows, 2, sd);
      const Matrix Y2 = Z + rng.normal(rows, 2, sd);
      const Matrix Y3 = std::sqrt(1.0 - spec.omega) * Z + std::sqrt(spec.omega) * Z3 + rng.normal(rows, 2, sd);
      out.dataset.sources.push_back(detail::complete_source("consensus_1", Y1));
      out.dataset.sources.push_back(detail::complete_source("consensus_2", Y2));
      out.dataset.sources.push_back(detail::complete_source("mixed", Y3));
      out.truth = Z;
      out.rank = 2;
      break;
    }
    case ScenarioKind::missing_at_random: {
      const Matrix Z = rng.normal(rows, 1);
      const double sd = noise_sd(Z);
      Vector d(2);
      d << 1.0, 0.5;
      const Matrix Y1 = Z + rng.normal(rows, 1, sd);
      const Matrix Y2 = detail::hcat(Z, rng.normal(rows, 1)) * d.asDiagonal() + rng.normal(rows, 2, sd);
      const Matrix Y3 = detail::hcat(Z, rng.normal(rows, 1)) * d.asDiagonal() + rng.normal(rows, 2, sd);
      out.dataset.sources.push_back(detail::complete_source("source_1", Y1));
      out.dataset.sources.push_back(detail::complete_source("source_2", Y2));
      out.dataset.sources.push_back(detail::complete_source("source_3", Y3));
      out.truth = Z;
      out.rank = 1;
      out.reference = out.dataset;

      const std::size_t S = out.dataset.num_sources();
      const std::size_t slots = n * S;
      const std::size_t masked = static_cast<std::size_t>(spec.pct) * slots / 100;
      for (std::uint64_t attempt = 0;; ++attempt) {
        std::mt19937_64 mask_rng(spec.seed ^ (0x9e3779b97f4a7c15ULL + attempt));
        std::vector<std::size_t> order(slots);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t k = 0; k < masked; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, slots - 1);
          std::swap(order[k], order[pick(mask_rng)]);
        }
        AlignedDataset candidate = *out.reference;
        for (std::size_t k = 0; k < masked; ++k)
          candidate.sources[order[k] / n].present[order[k] % n] = false;
        if (validate_dataset(candidate, out.rank).ok()) {
          out.dataset = std::move(candidate);
          break;
        }
        out.log.push_back("mask draw " + std::to_string(attempt) + " invalid; redrawing");
        if (attempt > 1000) throw ValidationError("missing_at_random: could not draw a valid mask");
      }
      break;
    }
  }
  return out;
}

}  // namespace comds
