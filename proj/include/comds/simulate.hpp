#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "comds/baselines.hpp"
#include "comds/diagnostics.hpp"
#include "comds/parallel.hpp"
#include "comds/simgen.hpp"
#include "comds/solver.hpp"

namespace comds {

/// splitmix64 finalizer; derives independent replicate seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Matrix centered(Matrix m) {
  m.rowwise() -= m.colwise().mean();
  return m;
}

using Metrics = std::vector<std::pair<std::string, double>>;

/// Generates one replicate, fits it, and scores it against the truth (and
/// the PCA baseline where the scenario has one). `base` supplies tolerance
/// and iteration limits; the rank comes from the scenario.
inline Metrics score_replicate(const ScenarioSpec& spec, const SolverConfig& base) {
  const Scenario sc = generate(spec);
  SolverConfig cfg = base;
  cfg.rank = sc.rank;
  Metrics m;
  const Matrix truth = centered(sc.truth);

  switch (spec.kind) {
    case ScenarioKind::swiss_roll:
    case ScenarioKind::imbalanced_dims:
    case ScenarioKind::correlated_features: {
      const auto f = fit_dataset(sc.dataset, cfg);
      m.emplace_back("comds_subspace_corr", subspace_correlation(truth, f.consensus));
      m.emplace_back("pca_subspace_corr", subspace_correlation(truth, pca_concat(sc.dataset, sc.rank)));
      m.emplace_back("iterations", f.iterations);
      break;
    }
    case ScenarioKind::rotation: {
      const auto rotated = fit_dataset(sc.dataset, cfg);
      const auto original = fit_dataset(*sc.reference, cfg);
      const Matrix pca_rot = pca_concat(sc.dataset, sc.rank);
      const Matrix pca_orig = pca_concat(*sc.reference, sc.rank);
      for (Index k = 0; k < sc.rank; ++k) {
        const std::string c = std::to_string(k + 1);
        m.emplace_back("comds_dim" + c + "_abs_pearson",
                       std::abs(pearson(original.consensus.col(k), rotated.consensus.col(k))));
        m.emplace_back("pca_pc" + c + "_abs_pearson", std::abs(pearson(pca_orig.col(k), pca_rot.col(k))));
      }
      m.emplace_back("comds_subspace_corr", subspace_correlation(truth, rotated.consensus));
      break;
    }
    case ScenarioKind::relative_error_sweep: {
      const auto f = fit_dataset(sc.dataset, cfg);
      const auto rel = relative_errors(f, pairwise_distances(sc.dataset));
      double sum = 0.0;
      for (std::size_t s = 0; s < rel.size(); ++s) {
        m.emplace_back("relative_error_" + std::to_string(s + 1), rel[s]);
        sum += rel[s];
      }
      m.emplace_back("relative_error_sum", sum);
      m.emplace_back("comds_subspace_corr", subspace_correlation(truth, f.consensus));
      break;
    }
    case ScenarioKind::missing_at_random: {
      const auto complete = fit_dataset(*sc.reference, cfg);
      const auto masked = fit_dataset(sc.dataset, cfg);
      std::vector<Index> full_rows, gap_rows;
      for (std::size_t i = 0; i < sc.dataset.n(); ++i) {
        bool all = true;
        for (const auto& src : sc.dataset.sources) all = all && src.present[i];
        (all ? full_rows : gap_rows).push_back(static_cast<Index>(i));
      }
      auto corr_on = [&](const std::vector<Index>& rows) {
        Vector a(static_cast<Index>(rows.size())), b(static_cast<Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
          a(static_cast<Index>(k)) = complete.consensus(rows[k], 0);
          b(static_cast<Index>(k)) = masked.consensus(rows[k], 0);
        }
        return std::abs(pearson(a, b));
      };
      m.emplace_back("pearson_complete_rows", corr_on(full_rows));
      m.emplace_back("pearson_masked_rows", corr_on(gap_rows));
      m.emplace_back("masked_entity_count", static_cast<double>(gap_rows.size()));
      break;
    }
  }
  return m;
}

struct MetricRow {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

struct MetricSummary {
  std::string metric;
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

struct SimulationRun {
  ScenarioSpec spec;
  std::vector<MetricRow> rows;
  std::vector<MetricSummary> summary;

  const MetricSummary& get(const std::string& metric) const {
    for (const auto& s : summary)
      if (s.metric == metric) return s;
    throw ValidationError("no metric '" + metric + "' in simulation summary");
  }

  std::vector<double> values(const std::string& metric) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.metric == metric) out.push_back(r.value);
    return out;
  }
};

inline std::vector<MetricSummary> summarize(const std::vector<MetricRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> by_metric;
  for (const auto& r : rows) {
    auto [it, fresh] = by_metric.try_emplace(r.metric);
    if (fresh) order.push_back(r.metric);
    it->second.push_back(r.value);
  }
  std::vector<MetricSummary> out;
  for (const auto& name : order) {
    const auto& v = by_metric[name];
    MetricSummary s;
    s.metric = name;
    s.count = v.size();
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Runs `replicates` independent seeded replicates of one scenario. Replicate
/// k uses seed mix_seed(spec.seed + k); results are ordered by replicate.
inline SimulationRun simulate(const ScenarioSpec& spec, std::size_t replicates, const SolverConfig& base = {}) {
  check_spec(spec);
  if (replicates < 1) throw ValidationError("simulate: replicates must be >= 1");
  std::vector<Metrics> per(replicates);
  std::vector<std::uint64_t> seeds(replicates);
  parallel_for(replicates, [&](std::size_t k) {
    ScenarioSpec s = spec;
    s.seed = mix_seed(spec.seed + k);
    seeds[k] = s.seed;
    per[k] = score_replicate(s, base);
  });
  SimulationRun run;
  run.spec = spec;
  for (std::size_t k = 0; k < replicates; ++k)
    for (const auto& [name, value] : per[k]) run.rows.push_back({k, seeds[k], name, value});
  run.summary = summarize(run.rows);
  return run;
}

}  // namespace comds
