// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Statistical criteria use the same simulate() harness as
// the command-line tool.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "comds/comds.hpp"
#include "oracles.hpp"

using namespace comds;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string mean_se(const MetricSummary& s) { return fmt("%.4f", s.mean) + " +- " + fmt("%.4f", s.se); }

SolverConfig rank_config(Index r) {
  SolverConfig cfg;
  cfg.rank = r;
  return cfg;
}

double min_abs_column_corr(const Matrix& a, const Matrix& b) {
  double worst = 1.0;
  for (Index k = 0; k < a.cols(); ++k) worst = std::min(worst, std::abs(pearson(a.col(k), b.col(k))));
  return worst;
}

Outcome stress_monotonicity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2025);
  std::uniform_int_distribution<std::size_t> pick_n(20, 200), pick_s(2, 4);
  std::uniform_int_distribution<int> pick_r(1, 2);
  double worst_rise = -std::numeric_limits<double>::infinity();
  int bad = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = pick_n(rng), S = pick_s(rng);
    const Index r = pick_r(rng);
    const auto ds = oracle::random_dataset(n, S, r, 1000 + static_cast<std::uint64_t>(k), k % 2 ? 0.2 : 0.0);
    const auto f = fit_dataset(ds, rank_config(r));
    double prev = f.initial_stress;
    bool ok = true;
    for (double s : f.stress_trace) {
      worst_rise = std::max(worst_rise, s - prev);
      ok = ok && s <= prev + 1e-9;
      prev = s;
    }
    bad += ok ? 0 : 1;
  }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 120.0, "50 instances, " + std::to_string(bad) + " non-monotone, largest step change " +
                                     fmt("%.3g", worst_rise) + ", " + fmt("%.1f", t) + " s (limit 120 s)"};
}

Outcome zero_stress() {
  const Matrix v = oracle::gaussian(50, 1, 7);
  AlignedDataset ds;
  ds.entities = oracle::ids(50);
  ds.sources = {oracle::source("a", v), oracle::source("b", v), oracle::source("c", v)};
  const auto f = fit_dataset(ds, rank_config(1));
  const double r = std::abs(pearson(f.consensus.col(0), v.col(0)));
  return {f.final_stress() < 1e-8 && r > 0.9999,
          "final stress " + fmt("%.3g", f.final_stress()) + ", |r| " + fmt("%.10f", r)};
}

Outcome invariance() {
  double comds_worst = 1.0;
  std::vector<double> pca_mean(2, 0.0);
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::rotation;
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto sc = generate(spec);
    const auto original = fit_dataset(*sc.reference, rank_config(2));
    const auto rotated = fit_dataset(sc.dataset, rank_config(2));
    comds_worst = std::min(comds_worst, min_abs_column_corr(original.consensus, rotated.consensus));

    auto shifted = sc.dataset;
    shifted.sources[1].coords.rowwise() += Eigen::RowVector2d(3.0, -7.0);
    comds_worst = std::min(comds_worst, min_abs_column_corr(rotated.consensus, fit_dataset(shifted, rank_config(2)).consensus));
    auto scaled = sc.dataset;
    scaled.sources[0].coords *= 4.0;
    scaled.sources[1].coords *= 0.3;
    comds_worst = std::min(comds_worst, min_abs_column_corr(rotated.consensus, fit_dataset(scaled, rank_config(2)).consensus));

    const Matrix pa = pca_concat(*sc.reference, 2);
    const Matrix pb = pca_concat(sc.dataset, 2);
    for (Index k = 0; k < 2; ++k) pca_mean[static_cast<std::size_t>(k)] += std::abs(pearson(pa.col(k), pb.col(k))) / seeds;
  }
  const double pca_max = std::max(pca_mean[0], pca_mean[1]);
  return {comds_worst >= 0.999 && pca_max < 0.99,
          "CoMDS worst per-column |r| over rotation/shift/scale " + fmt("%.6f", comds_worst) +
              " (>= 0.999); PCA mean per-PC |r| " + fmt("%.4f", pca_mean[0]) + ", " + fmt("%.4f", pca_mean[1]) +
              " (< 0.99), 20 seeds"};
}

Outcome swiss_roll() {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::swiss_roll;
  spec.seed = 4;
  const auto t0 = Clock::now();
  const auto run = simulate(spec, 20);
  const double per = seconds_since(t0) / 20.0;
  const auto& c = run.get("comds_subspace_corr");
  const auto& p = run.get("pca_subspace_corr");
  const auto vals = run.values("comds_subspace_corr");
  const double worst = *std::min_element(vals.begin(), vals.end());
  return {c.mean >= 0.8 && c.mean > p.mean && per < 60.0,
          "CoMDS " + mean_se(c) + " (min " + fmt("%.4f", worst) + "), PCA " + mean_se(p) + ", 20 seeds, " +
              fmt("%.1f", per) + " s per run"};
}

Outcome imbalanced() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  double comds100 = 0.0, pca100 = 0.0;
  for (int p : {4, 20, 50, 100}) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::imbalanced_dims;
    spec.p = p;
    spec.seed = 300;
    const auto run = simulate(spec, 100);
    const auto& c = run.get("comds_subspace_corr");
    const auto& q = run.get("pca_subspace_corr");
    ok = ok && c.mean >= 0.9;
    if (p == 100) {
      comds100 = c.mean;
      pca100 = q.mean;
    }
    detail += "p=" + std::to_string(p) + " CoMDS " + mean_se(c) + " PCA " + mean_se(q) + "; ";
  }
  const double t = seconds_since(t0);
  ok = ok && comds100 - pca100 >= 0.1 && t < 900.0;
  return {ok, detail + "gap at p=100 " + fmt("%.4f", comds100 - pca100) + " (>= 0.1), " + fmt("%.0f", t) +
                  " s (limit 900 s)"};
}

Outcome correlated() {
  std::vector<MetricSummary> pca, com;
  std::string detail;
  for (int p = 1; p <= 5; ++p) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::correlated_features;
    spec.p = p;
    spec.omega = 0.9;
    spec.seed = 600;
    const auto run = simulate(spec, 100);
    pca.push_back(run.get("pca_subspace_corr"));
    com.push_back(run.get("comds_subspace_corr"));
    detail += "p=" + std::to_string(p) + " CoMDS " + mean_se(com.back()) + " PCA " + mean_se(pca.back()) + "; ";
  }
  // a rise from p to p+1 counts as a tolerated inversion when it is within
  // the larger of the two standard errors; at most one is allowed
  int inversions = 0;
  bool inversions_small = true;
  for (std::size_t k = 0; k + 1 < pca.size(); ++k) {
    const double rise = pca[k + 1].mean - pca[k].mean;
    if (rise > 0.0) {
      ++inversions;
      inversions_small = inversions_small && rise <= std::max(pca[k].se, pca[k + 1].se);
    }
  }
  double drift = 0.0;
  for (const auto& c : com) drift = std::max(drift, std::abs(c.mean - com.front().mean));
  return {inversions <= 1 && inversions_small && drift <= 0.05,
          detail + std::to_string(inversions) + " PCA inversion(s)" + (inversions_small ? "" : " beyond 1 SE") +
              ", CoMDS max drift from p=1 " + fmt("%.4f", drift) + " (<= 0.05)"};
}

Outcome relative_error() {
  std::vector<double> third;
  std::string detail;
  bool ok = true;
  double worst_sum = 0.0;
  for (double omega : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::relative_error_sweep;
    spec.omega = omega;
    spec.seed = 700;
    const auto run = simulate(spec, 100);
    for (double s : run.values("relative_error_sum")) worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    const auto& r1 = run.get("relative_error_1");
    const auto& r2 = run.get("relative_error_2");
    const auto& r3 = run.get("relative_error_3");
    if (omega == 0.0)
      for (const auto* r : {&r1, &r2, &r3}) ok = ok && r->mean >= 0.28 && r->mean <= 0.38;
    third.push_back(r3.mean);
    detail += "omega=" + fmt("%.2f", omega) + " (" + fmt("%.4f", r1.mean) + ", " + fmt("%.4f", r2.mean) + ", " +
              fmt("%.4f", r3.mean) + "); ";
  }
  bool increasing = true;
  for (std::size_t k = 0; k + 1 < third.size(); ++k) increasing = increasing && third[k + 1] > third[k];
  return {ok && increasing && worst_sum <= 1e-10,
          detail + "source 3 " + (increasing ? "strictly increasing" : "NOT strictly increasing") +
              ", worst |sum - 1| " + fmt("%.2g", worst_sum)};
}

Outcome missing_data() {
  bool ok = true;
  std::string detail;
  for (int pct : {1, 5, 10, 20}) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::missing_at_random;
    spec.pct = pct;
    spec.seed = 800;
    const auto run = simulate(spec, 20);
    const auto& full = run.get("pearson_complete_rows");
    const auto& gap = run.get("pearson_masked_rows");
    ok = ok && full.mean >= 0.98 && gap.mean >= 0.95;
    detail += std::to_string(pct) + "%: complete rows " + fmt("%.4f", full.mean) + ", masked rows " +
              fmt("%.4f", gap.mean) + "; ";
  }
  return {ok, detail + "20 seeds, thresholds 0.98 / 0.95"};
}

Outcome decomposition_identities() {
  double recon = 0.0, inner = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 20 + static_cast<std::size_t>(k) * 3;
    const Index r = 1 + k % 2;
    const auto ds = oracle::random_dataset(n, 2 + static_cast<std::size_t>(k % 3), r, 5000 + static_cast<std::uint64_t>(k),
                                           k % 2 ? 0.2 : 0.0);
    const auto f = fit_dataset(ds, rank_config(r));
    for (std::size_t s = 0; s < ds.num_sources(); ++s) {
      const auto d = decompose(f, ds, s);
      const Matrix X = ds.sources[s].coords(d.rows, Eigen::all);
      const Matrix Z = f.consensus(d.rows, Eigen::all);
      recon = std::max(recon, (X - d.consensus_part - d.idiosyncratic).cwiseAbs().maxCoeff());
      for (Index a = 0; a < d.idiosyncratic.cols(); ++a)
        for (Index b = 0; b < Z.cols(); ++b) {
          const double den = d.idiosyncratic.col(a).norm() * Z.col(b).norm();
          if (den > 0.0) inner = std::max(inner, std::abs(d.idiosyncratic.col(a).dot(Z.col(b))) / den);
        }
    }
  }
  return {recon < 1e-10 && inner < 1e-8,
          "50 fits, max reconstruction error " + fmt("%.3g", recon) + ", max normalized inner product " +
              fmt("%.3g", inner)};
}

Outcome loo_duplicates() {
  // equal-sources model with the second source replaced by a copy of the first
  double worst_dup = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::relative_error_sweep;
    spec.omega = 0.0;
    spec.seed = 900 + seed;
    auto ds = generate(spec).dataset;
    ds.sources[1].coords = ds.sources[0].coords;
    const auto loo = loo_stability(ds, rank_config(2));
    worst_dup = std::min({worst_dup, *loo.stability[0], *loo.stability[1]});
  }
  double worst_span = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index r = 1 + static_cast<Index>(seed % 4);
    const Matrix A = oracle::gaussian(50, r, 10000 + seed);
    Matrix M = oracle::gaussian(r, r, 20000 + seed);
    while (std::abs(M.determinant()) < 1e-3) M += Matrix::Identity(r, r);
    worst_span = std::max(worst_span, std::abs(subspace_correlation(A, A * M) - 1.0));
  }
  return {worst_dup >= 0.999 && worst_span <= 1e-10,
          "duplicate rho min " + fmt("%.6f", worst_dup) + " over 10 seeds (>= 0.999); |subspace_correlation(A, AM) - 1| max " +
              fmt("%.3g", worst_span)};
}

Outcome scale() {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::correlated_features;
  spec.p = 2;
  spec.n = 2000;
  spec.seed = 1100;
  const auto sc = generate(spec);
  const auto t0 = Clock::now();
  SolverConfig cfg = rank_config(1);
  cfg.tol = 1e-6;
  const auto f = fit_dataset(sc.dataset, cfg);
  const double t = seconds_since(t0);
  return {f.converged && t < 600.0, "n=2000, S=3, r=1: " + std::string(f.converged ? "converged" : "did not converge") +
                                        " in " + std::to_string(f.iterations) + " iterations, " + fmt("%.1f", t) +
                                        " s (limit 600 s)"};
}

}  // namespace

int main() {
  report(1, "stress monotonicity", stress_monotonicity);
  report(2, "zero-stress recovery", zero_stress);
  report(3, "rotation/shift/scale invariance", invariance);
  report(4, "swiss roll", swiss_roll);
  report(5, "imbalanced dimensions", imbalanced);
  report(6, "correlated features", correlated);
  report(7, "relative-error sweep", relative_error);
  report(8, "missing-data stability", missing_data);
  report(9, "decomposition identities", decomposition_identities);
  report(10, "leave-one-out degenerate case", loo_duplicates);
  report(11, "scale and runtime", scale);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
