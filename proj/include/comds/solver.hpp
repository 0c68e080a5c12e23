#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "comds/baselines.hpp"
#include "comds/distances.hpp"
#include "comds/types.hpp"
#include "comds/validate.hpp"

namespace comds {

enum class InitKind { classical_mds, random, provided };

struct SolverConfig {
  Index rank = 1;
  double tol = 1e-6;
  int max_iters = 10000;
  int min_iters = 2;
  InitKind init = InitKind::classical_mds;
  std::uint64_t seed = 0;
  Matrix initial;    ///< n x rank, used when init == provided
  int restarts = 1;  ///< extra runs beyond the first use random starts
  /// Divide each source's term by its mean squared valid distance, so a
  /// source's influence does not depend on the units of its coordinates.
  bool normalize_sources = true;
};

/// Objective value with its per-source pieces. `raw[s]` is the unweighted
/// sum of squared residuals over valid pairs, `normalized[s]` divides it by
/// the number of valid pairs, and `total` is the weighted sum of raw terms.
struct StressBreakdown {
  double total = 0.0;
  std::vector<double> raw;
  std::vector<double> normalized;
};

/// Evaluates the consensus objective directly from a DistanceSet.
inline StressBreakdown stress(const DistanceSet& dist, const std::vector<double>& weights,
                              const Matrix& Z, const std::vector<Vector>& W) {
  const std::size_t S = dist.num_sources();
  if (weights.size() != S || W.size() != S)
    throw ValidationError("stress: expected " + std::to_string(S) + " weights and diagonals");
  const Index n = dist.n();
  if (Z.rows() != n) throw ValidationError("stress: consensus row count does not match distances");
  for (const auto& w : W)
    if (w.size() != Z.cols()) throw ValidationError("stress: diagonal length does not match rank");

  StressBreakdown out;
  out.raw.assign(S, 0.0);
  out.normalized.assign(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& src = dist.sources[s];
    if (src.dist.rows() != n || src.dist.cols() != n || static_cast<Index>(src.present.size()) != n)
      throw ValidationError("stress: source distance matrix has the wrong shape");
    const Matrix X = Z * W[s].asDiagonal();
    double raw = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (!src.present[static_cast<std::size_t>(i)]) continue;
      double row = 0.0;
      for (Index j = i + 1; j < n; ++j) {
        if (!src.present[static_cast<std::size_t>(j)]) continue;
        const double e = src.dist(i, j) - (X.row(i) - X.row(j)).norm();
        row += e * e;
      }
      raw += row;
    }
    out.raw[s] = raw;
    const double pairs = src.pair_count();
    out.normalized[s] = pairs > 0 ? raw / pairs : 0.0;
    out.total += weights[s] * raw;
  }
  return out;
}

namespace detail {

constexpr double kWeightFloor = 1e-12;
constexpr double kStressFloor = 1e-30;

/// One source restricted to its present rows.
struct SourceBlock {
  std::vector<Index> rows;
  Matrix D;  ///< m x m, symmetric
  double weight = 1.0;
};

/// Multiplier applied to weight_s in the optimized objective: 1 / (mean
/// squared valid distance) when normalizing, else 1.
inline double scale_factor(const SourceDistances& src, bool normalize) {
  if (!normalize) return 1.0;
  const Index n = src.dist.rows();
  double ss = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!src.present[static_cast<std::size_t>(i)]) continue;
    for (Index j = i + 1; j < n; ++j)
      if (src.present[static_cast<std::size_t>(j)]) ss += src.dist(i, j) * src.dist(i, j);
  }
  const double pairs = src.pair_count();
  return (pairs > 0.0 && ss > 0.0) ? pairs / ss : 1.0;
}

inline std::vector<SourceBlock> make_blocks(const DistanceSet& dist, const std::vector<double>& weights) {
  std::vector<SourceBlock> blocks;
  blocks.reserve(dist.num_sources());
  for (std::size_t s = 0; s < dist.num_sources(); ++s) {
    const auto& src = dist.sources[s];
    SourceBlock b;
    b.weight = weights[s];
    for (std::size_t i = 0; i < src.present.size(); ++i)
      if (src.present[i]) b.rows.push_back(static_cast<Index>(i));
    const auto m = static_cast<Index>(b.rows.size());
    b.D.resize(m, m);
    double max_d = 0.0;
    for (Index a = 0; a < m; ++a) {
      b.D(a, a) = 0.0;
      for (Index c = a + 1; c < m; ++c) {
        const double d = src.dist(b.rows[static_cast<std::size_t>(a)], b.rows[static_cast<std::size_t>(c)]);
        if (!std::isfinite(d) || d < 0.0)
          throw ValidationError("distance matrix has an invalid entry on a valid pair");
        b.D(a, c) = d;
        b.D(c, a) = d;
        max_d = std::max(max_d, d);
      }
    }
    if (max_d == 0.0) throw SolverError("degenerate source: all distances are zero in source " + std::to_string(s));
    blocks.push_back(std::move(b));
  }
  return blocks;
}

/// Stress at the current iterate plus, per source, G = B(Y) Y without the
/// source weight, where Y = Z diag(W_s) on the present rows. G is the
/// Guttman-transform numerator; it is row-major m x r.
struct Majorization {
  double sigma = 0.0;
  std::vector<double> raw;
  std::vector<std::vector<double>> G;
};

inline Majorization majorize(const std::vector<SourceBlock>& blocks, const Matrix& Z, const Matrix& W) {
  const Index r = Z.cols();
  Majorization out;
  out.raw.assign(blocks.size(), 0.0);
  out.G.resize(blocks.size());
  std::vector<double> Y;
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    const auto& b = blocks[s];
    const auto m = static_cast<Index>(b.rows.size());
    Y.assign(static_cast<std::size_t>(m * r), 0.0);
    for (Index i = 0; i < m; ++i)
      for (Index k = 0; k < r; ++k)
        Y[static_cast<std::size_t>(i * r + k)] = Z(b.rows[static_cast<std::size_t>(i)], k) * W(static_cast<Index>(s), k);
    auto& G = out.G[s];
    G.assign(static_cast<std::size_t>(m * r), 0.0);

    double raw = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double* yi = Y.data() + i * r;
      double* gi = G.data() + i * r;
      const double* Dcol = b.D.col(i).data();
      double row = 0.0;
      for (Index j = i + 1; j < m; ++j) {
        const double* yj = Y.data() + j * r;
        double d2 = 0.0;
        for (Index k = 0; k < r; ++k) {
          const double t = yi[k] - yj[k];
          d2 += t * t;
        }
        const double d = std::sqrt(d2);
        const double target = Dcol[j];
        const double e = target - d;
        row += e * e;
        if (d > 0.0) {
          const double c = target / d;
          double* gj = G.data() + j * r;
          for (Index k = 0; k < r; ++k) {
            const double t = c * (yi[k] - yj[k]);
            gi[k] += t;
            gj[k] -= t;
          }
        }
      }
      raw += row;
    }
    out.raw[s] = raw;
    out.sigma += b.weight * raw;
  }
  return out;
}

/// Solves (M + gamma 1 1^T) z = rhs where
///   M = sum_s c_s (m_s diag(a_s) - a_s a_s^T),
/// a_s being the presence indicator of source s. With a connected
/// co-observation graph and rhs orthogonal to 1 the solution is the
/// centered solution of M z = rhs. M is diagonal minus rank S, so the solve
/// is O(n S^2) through the Woodbury identity.
class ColumnSystem {
public:
  ColumnSystem(const std::vector<SourceBlock>& blocks, Index n) : n_(n) {
    const auto S = static_cast<Index>(blocks.size());
    U_.setZero(n, S + 1);
    sizes_.resize(S);
    for (Index s = 0; s < S; ++s) {
      for (Index i : blocks[static_cast<std::size_t>(s)].rows) U_(i, s) = 1.0;
      sizes_(s) = static_cast<double>(blocks[static_cast<std::size_t>(s)].rows.size());
    }
    U_.col(S).setOnes();
  }

  /// coef[s] = weight_s * W_sk^2
  Vector solve(const Vector& coef, const Vector& rhs) const {
    const Index S = coef.size();
    const Vector delta = U_.leftCols(S) * coef.cwiseProduct(sizes_);
    const double gamma = delta.mean() / static_cast<double>(n_);
    Vector C(S + 1);
    C.head(S) = -coef;
    C(S) = gamma;
    const Vector inv_delta = delta.cwiseInverse();
    const Matrix K = U_.transpose() * inv_delta.asDiagonal() * U_;
    Matrix small = C.asDiagonal() * K;
    small.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<Matrix> lu(small);

    auto apply_inverse = [&](const Vector& b) {
      const Vector y0 = b.cwiseProduct(inv_delta);
      const Vector x = lu.solve(C.cwiseProduct(U_.transpose() * y0));
      return Vector(y0 - inv_delta.cwiseProduct(U_ * x));
    };
    auto apply = [&](const Vector& z) {
      const Vector proj = U_.transpose() * z;
      return Vector(delta.cwiseProduct(z) + U_ * C.cwiseProduct(proj));
    };

    Vector z = apply_inverse(rhs);
    z += apply_inverse(rhs - apply(z));  // one refinement step
    z.array() -= z.mean();
    return z;
  }

private:
  Index n_;
  Matrix U_;
  Vector sizes_;
};

struct State {
  Matrix Z;  ///< n x r
  Matrix W;  ///< S x r, diagonal entries per source
};

/// Centers Z and rescales its columns to unit RMS, moving the scale into W.
inline void fix_gauge(State& st, std::vector<std::string>& warnings) {
  const auto n = static_cast<double>(st.Z.rows());
  for (Index k = 0; k < st.Z.cols(); ++k) {
    auto col = st.Z.col(k);
    col.array() -= col.mean();
    const double rms = std::sqrt(col.squaredNorm() / n);
    if (!(rms > 0.0) || !std::isfinite(rms)) {
      warnings.push_back("consensus column " + std::to_string(k + 1) + " collapsed to zero");
      continue;
    }
    col /= rms;
    st.W.col(k) *= rms;
  }
}

inline void clamp_weights(Matrix& W, std::vector<std::string>& warnings) {
  for (Index s = 0; s < W.rows(); ++s) {
    for (Index k = 0; k < W.cols(); ++k) {
      double& w = W(s, k);
      if (!std::isfinite(w)) w = kWeightFloor;
      w = std::abs(w);
      if (w < kWeightFloor) {
        w = kWeightFloor;
        warnings.push_back("clamped weight of source " + std::to_string(s) + " dimension " +
                           std::to_string(k + 1) + " to 1e-12");
      }
    }
  }
}

/// Weighted mean of the observed source distances, with pairs nobody
/// observes filled by shortest paths.
inline Matrix mean_distance_matrix(const DistanceSet& dist, const std::vector<double>& weights,
                                   const std::vector<double>& dist_scale) {
  const Index n = dist.n();
  Matrix sum = Matrix::Zero(n, n);
  Matrix wsum = Matrix::Zero(n, n);
  for (std::size_t s = 0; s < dist.num_sources(); ++s) {
    const auto& src = dist.sources[s];
    for (Index i = 0; i < n; ++i) {
      if (!src.present[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < n; ++j) {
        if (!src.present[static_cast<std::size_t>(j)]) continue;
        sum(i, j) += weights[s] * dist_scale[s] * src.dist(i, j);
        wsum(i, j) += weights[s];
      }
    }
  }
  Matrix mean(n, n);
  bool gaps = false;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) mean(i, j) = 0.0;
      else if (wsum(i, j) > 0.0) mean(i, j) = sum(i, j) / wsum(i, j);
      else {
        mean(i, j) = std::numeric_limits<double>::quiet_NaN();
        gaps = true;
      }
    }
  }
  if (gaps) mean = shortest_path_completion(mean);
  if (!mean.allFinite()) throw ValidationError("disconnected co-observation graph");
  return mean;
}

inline Matrix random_configuration(Index n, Index r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix Z(n, r);
  for (Index k = 0; k < r; ++k)
    for (Index i = 0; i < n; ++i) Z(i, k) = normal(rng);
  return Z;
}

/// Gauge-fixes a starting configuration and picks, per source, the single
/// scale factor that best matches its distances.
inline State initial_state(const std::vector<SourceBlock>& blocks, Matrix Z0, std::vector<std::string>& warnings) {
  State st;
  st.Z = std::move(Z0);
  const Index r = st.Z.cols();
  st.W = Matrix::Ones(static_cast<Index>(blocks.size()), r);
  fix_gauge(st, warnings);
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    const auto& b = blocks[s];
    const auto m = static_cast<Index>(b.rows.size());
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < m; ++i) {
      const Index ri = b.rows[static_cast<std::size_t>(i)];
      for (Index j = i + 1; j < m; ++j) {
        const Index rj = b.rows[static_cast<std::size_t>(j)];
        double sq = 0.0;
        for (Index k = 0; k < r; ++k) {
          const double e = (st.Z(ri, k) - st.Z(rj, k)) * st.W(static_cast<Index>(s), k);
          sq += e * e;
        }
        const double d = std::sqrt(sq);
        num += b.D(i, j) * d;
        den += d * d;
      }
    }
    if (den > 0.0 && num > 0.0) st.W.row(static_cast<Index>(s)) *= num / den;
  }
  clamp_weights(st.W, warnings);
  return st;
}

/// One majorization sweep: Z given all W, then each W given Z, then gauge.
inline void sweep(const std::vector<SourceBlock>& blocks, const ColumnSystem& system, const Majorization& maj,
                  State& st, std::vector<std::string>& warnings) {
  const Index n = st.Z.rows();
  const Index r = st.Z.cols();
  const auto S = static_cast<Index>(blocks.size());

  for (Index k = 0; k < r; ++k) {
    Vector coef(S);
    Vector rhs = Vector::Zero(n);
    for (Index s = 0; s < S; ++s) {
      const auto& b = blocks[static_cast<std::size_t>(s)];
      const double w = st.W(s, k);
      coef(s) = b.weight * w * w;
      const auto& G = maj.G[static_cast<std::size_t>(s)];
      for (std::size_t i = 0; i < b.rows.size(); ++i)
        rhs(b.rows[i]) += b.weight * w * G[i * static_cast<std::size_t>(r) + static_cast<std::size_t>(k)];
    }
    st.Z.col(k) = system.solve(coef, rhs);
  }

  for (Index s = 0; s < S; ++s) {
    const auto& b = blocks[static_cast<std::size_t>(s)];
    const auto& G = maj.G[static_cast<std::size_t>(s)];
    const auto m = static_cast<double>(b.rows.size());
    for (Index k = 0; k < r; ++k) {
      double num = 0.0, sum = 0.0, sumsq = 0.0;
      for (std::size_t i = 0; i < b.rows.size(); ++i) {
        const double z = st.Z(b.rows[i], k);
        num += z * G[i * static_cast<std::size_t>(r) + static_cast<std::size_t>(k)];
        sum += z;
        sumsq += z * z;
      }
      const double den = m * sumsq - sum * sum;
      if (den > 0.0) st.W(s, k) = num / den;
    }
  }
  clamp_weights(st.W, warnings);
  fix_gauge(st, warnings);
}

struct RunResult {
  State state;
  std::vector<double> trace;
  double initial_stress = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

inline RunResult run(const std::vector<SourceBlock>& blocks, const ColumnSystem& system, State st,
                     const SolverConfig& cfg, std::vector<std::string> warnings) {
  RunResult out;
  Majorization maj = majorize(blocks, st.Z, st.W);
  out.initial_stress = maj.sigma;
  double prev = maj.sigma;
  for (int t = 1; t <= cfg.max_iters; ++t) {
    sweep(blocks, system, maj, st, warnings);
    maj = majorize(blocks, st.Z, st.W);
    out.trace.push_back(maj.sigma);
    out.iterations = t;
    const double rel = (prev - maj.sigma) / std::max(prev, kStressFloor);
    prev = maj.sigma;
    if (t >= cfg.min_iters && rel < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.state = std::move(st);
  out.warnings = std::move(warnings);
  return out;
}

}  // namespace detail

/// Minimizes the weighted consensus stress over the consensus configuration
/// and per-source diagonal weights by majorization. `anchor_row` selects the
/// entity whose coordinates are made non-negative (column sign convention).
inline ConsensusFit fit(const DistanceSet& dist, const std::vector<double>& weights, const SolverConfig& cfg,
                        Index anchor_row = 0) {
  const std::size_t S = dist.num_sources();
  const Index n = dist.n();
  if (S < 1) throw ValidationError("fit: no sources");
  if (weights.size() != S) throw ValidationError("fit: expected one weight per source");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("fit: source weights must be positive");
  if (cfg.rank < 1 || cfg.rank >= n) throw ValidationError("fit: rank must satisfy 1 <= rank < n");
  if (!(cfg.tol > 0.0)) throw ValidationError("fit: tol must be positive");
  if (cfg.max_iters < 1) throw ValidationError("fit: max_iters must be positive");
  if (cfg.restarts < 1) throw ValidationError("fit: restarts must be >= 1");
  if (anchor_row < 0 || anchor_row >= n) throw ValidationError("fit: anchor row out of range");

  std::vector<double> objective_weights(S), dist_scale(S);
  for (std::size_t s = 0; s < S; ++s) {
    const double f = detail::scale_factor(dist.sources[s], cfg.normalize_sources);
    objective_weights[s] = weights[s] * f;
    dist_scale[s] = std::sqrt(f);
  }
  const auto blocks = detail::make_blocks(dist, objective_weights);
  for (const auto& b : blocks)
    if (static_cast<Index>(b.rows.size()) < 2) throw ValidationError("fit: a source observes fewer than 2 entities");
  const detail::ColumnSystem system(blocks, n);

  std::optional<detail::RunResult> best;
  for (int attempt = 0; attempt < cfg.restarts; ++attempt) {
    std::vector<std::string> warnings;
    Matrix Z0;
    const InitKind kind = attempt == 0 ? cfg.init : InitKind::random;
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(attempt);
    switch (kind) {
      case InitKind::classical_mds: {
        auto cm = classical_mds(detail::mean_distance_matrix(dist, weights, dist_scale), cfg.rank);
        Z0 = std::move(cm.coords);
        // null columns would stay null under the update; seed them instead
        const Matrix noise = detail::random_configuration(n, cfg.rank, seed);
        for (Index k = 0; k < cfg.rank; ++k) {
          if (Z0.col(k).squaredNorm() == 0.0) {
            Z0.col(k) = 1e-3 * noise.col(k);
            warnings.push_back("classical_mds start has a null column " + std::to_string(k + 1) +
                               "; seeded with small random values");
          }
        }
        break;
      }
      case InitKind::random:
        Z0 = detail::random_configuration(n, cfg.rank, seed);
        break;
      case InitKind::provided:
        if (cfg.initial.rows() != n || cfg.initial.cols() != cfg.rank)
          throw ValidationError("fit: provided initial configuration must be n x rank");
        if (!cfg.initial.allFinite()) throw ValidationError("fit: provided initial configuration is not finite");
        Z0 = cfg.initial;
        break;
    }
    auto st = detail::initial_state(blocks, std::move(Z0), warnings);
    auto res = detail::run(blocks, system, std::move(st), cfg, std::move(warnings));
    const double final_sigma = res.trace.empty() ? res.initial_stress : res.trace.back();
    if (!best || final_sigma < (best->trace.empty() ? best->initial_stress : best->trace.back()))
      best = std::move(res);
  }

  auto& res = *best;
  ConsensusFit out;
  out.consensus = std::move(res.state.Z);
  const Matrix& W = res.state.W;
  for (Index k = 0; k < out.consensus.cols(); ++k)
    if (out.consensus(anchor_row, k) < 0.0) out.consensus.col(k) *= -1.0;
  for (std::size_t s = 0; s < S; ++s) out.source_weights.push_back(W.row(static_cast<Index>(s)).transpose());
  out.stress_trace = std::move(res.trace);
  out.initial_stress = res.initial_stress;
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.warnings = std::move(res.warnings);
  out.objective_weights = objective_weights;
  out.per_source_error = stress(dist, weights, out.consensus, out.source_weights).normalized;

  out.column_scale = (W.array().square().colwise().mean()).sqrt().transpose();
  const double max_scale = out.column_scale.maxCoeff();
  for (Index k = 0; k < out.column_scale.size(); ++k) {
    if (out.column_scale(k) < 1e-6 * max_scale)
      out.warnings.push_back("consensus column " + std::to_string(k + 1) +
                             " is numerically null (rank exceeds what the data supports)");
  }
  if (!out.converged)
    out.warnings.push_back("solver did not converge within " + std::to_string(cfg.max_iters) + " iterations");

  std::vector<std::string> unique;
  for (auto& w : out.warnings)
    if (std::find(unique.begin(), unique.end(), w) == unique.end()) unique.push_back(std::move(w));
  out.warnings = std::move(unique);
  return out;
}

inline std::vector<double> source_weights_of(const AlignedDataset& ds) {
  std::vector<double> w;
  for (const auto& src : ds.sources) w.push_back(src.weight);
  return w;
}

/// Validates, computes Euclidean distances, and fits. The sign anchor is the
/// entity with the smallest id.
inline ConsensusFit fit_dataset(const AlignedDataset& ds, const SolverConfig& cfg) {
  require_valid(ds, cfg.rank);
  return fit(pairwise_distances(ds), source_weights_of(ds), cfg, static_cast<Index>(ds.anchor_row()));
}

}  // namespace comds
