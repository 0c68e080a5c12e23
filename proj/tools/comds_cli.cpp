// comds: consensus MDS command-line front end.
//
// Exit codes: 0 success, 1 invalid input, 2 solver failure. Warnings go to
// stderr as one JSON object per line.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "comds/comds.hpp"

namespace {

using namespace comds;

void warn(const std::string& command, const std::string& message) {
  std::cerr << json{{"level", "warning"}, {"command", command}, {"message", message}}.dump() << "\n";
}

void error(const std::string& message) {
  std::cerr << json{{"level", "error"}, {"message", message}}.dump() << "\n";
}

struct DatasetArgs {
  std::vector<std::string> sources;
  std::vector<std::string> names;
  std::vector<double> weights;
  std::string config;
  Index rank = 1;
  double tol = 1e-6;
  int max_iters = 10000;
  std::string init = "classical";
  std::uint64_t seed = 0;
  int restarts = 1;
  RunConfig run;  ///< populated from --config when given

  void add_to(CLI::App* app) {
    app->add_option("--source", sources, "Source CSV (first column id); repeat per source");
    app->add_option("--name", names, "Source name; repeat in --source order");
    app->add_option("--weight", weights, "Source weight; repeat in --source order");
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--rank", rank, "Consensus dimensions")->check(CLI::PositiveNumber);
    app->add_option("--tol", tol, "Relative stress decrease that stops the solver");
    app->add_option("--max-iters", max_iters, "Iteration limit");
    app->add_option("--init", init, "classical, random or file:<path>");
    app->add_option("--seed", seed, "Seed for random starts");
    app->add_option("--restarts", restarts, "Number of solver runs; extra runs use random starts");
  }

  // Command-line values override the config file wherever they were given.
  void merge_config(CLI::App* app) {
    if (config.empty()) return;
    run = read_run_config(config);
    if (sources.empty()) {
      for (const auto& s : run.sources) {
        sources.push_back(s.path);
        names.push_back(s.name);
        weights.push_back(s.weight);
      }
    }
    if (app->count("--rank") == 0) rank = run.rank;
    if (app->count("--tol") == 0) tol = run.tol;
    if (app->count("--max-iters") == 0) max_iters = run.max_iters;
    if (app->count("--init") == 0) init = run.init;
    if (app->count("--seed") == 0) seed = run.seed;
    if (app->count("--restarts") == 0) restarts = run.restarts;
  }

  AlignedDataset load(const std::string& command) const {
    if (sources.size() < 2) throw ValidationError("need at least 2 --source files");
    std::vector<std::string> w;
    AlignedDataset ds = read_sources(sources, names, weights, &w, rank);
    for (const auto& m : w) warn(command, m);
    return ds;
  }

  SolverConfig solver(const AlignedDataset& ds) const {
    SolverConfig cfg;
    cfg.rank = rank;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    cfg.seed = seed;
    cfg.restarts = restarts;
    if (init == "classical") {
      cfg.init = InitKind::classical_mds;
    } else if (init == "random") {
      cfg.init = InitKind::random;
    } else if (init.rfind("file:", 0) == 0) {
      cfg.init = InitKind::provided;
      cfg.initial = read_aligned_matrix(init.substr(5), ds);
      if (cfg.initial.cols() != rank)
        throw ValidationError("initial configuration has " + std::to_string(cfg.initial.cols()) +
                              " columns, rank is " + std::to_string(rank));
    } else {
      throw ValidationError("--init must be classical, random or file:<path>");
    }
    return cfg;
  }
};

void report_fit_warnings(const ConsensusFit& fit) {
  for (const auto& w : fit.warnings) warn("fit", w);
}

std::string pick(const std::string& flag, const std::string& dir, const std::string& file,
                 const std::string& configured) {
  if (!flag.empty()) return flag;
  if (!dir.empty()) return (fs::path(dir) / file).string();
  return configured;
}

int run_fit(DatasetArgs& a, const std::string& out_consensus, const std::string& out_weights,
            const std::string& out_trace, const std::string& out_dir) {
  const AlignedDataset ds = a.load("fit");
  const ConsensusFit fit = fit_dataset(ds, a.solver(ds));
  report_fit_warnings(fit);
  const auto& o = a.run.outputs;
  const std::string c = pick(out_consensus, out_dir, "consensus.csv", o.consensus_path);
  const std::string w = pick(out_weights, out_dir, "weights.json", o.weights_path);
  const std::string t = pick(out_trace, out_dir, "trace.csv", o.trace_path);
  if (c.empty()) std::cout << consensus_csv(ds, fit);
  else write_file_atomic(c, consensus_csv(ds, fit));
  if (!w.empty()) write_file_atomic(w, weights_json(ds, fit).dump(2) + "\n");
  if (!t.empty()) write_file_atomic(t, trace_csv(fit));
  return 0;
}

int run_decompose(DatasetArgs& a, const std::string& fit_dir, const std::string& out_dir) {
  const AlignedDataset ds = a.load("decompose");
  ConsensusFit fit;
  if (fit_dir.empty()) {
    fit = fit_dataset(ds, a.solver(ds));
    report_fit_warnings(fit);
  } else {
    fit = read_fit_dir(fit_dir, ds);
  }
  const std::string dir = !out_dir.empty() ? out_dir : a.run.outputs.decomposition_dir;
  if (dir.empty()) throw ValidationError("decompose needs --out-dir");
  for (std::size_t s = 0; s < ds.num_sources(); ++s) {
    const Decomposition d = decompose(fit, ds, s);
    Matrix both(d.consensus_part.rows(), d.consensus_part.cols() * 2);
    both << d.consensus_part, d.idiosyncratic;
    auto cols = numbered_columns("consensus_part_", d.consensus_part.cols());
    for (auto& c : numbered_columns("idiosyncratic_", d.idiosyncratic.cols())) cols.push_back(c);
    write_file_atomic(fs::path(dir) / (ds.sources[s].name + ".csv"), matrix_csv(ds.entities, both, cols, d.rows));
  }
  return 0;
}

int run_diagnose(DatasetArgs& a, const std::string& fit_dir, bool rel, bool loo, const std::string& out) {
  const AlignedDataset ds = a.load("diagnose");
  const SolverConfig cfg = a.solver(ds);
  ConsensusFit fit;
  if (fit_dir.empty()) {
    fit = fit_dataset(ds, cfg);
    report_fit_warnings(fit);
  } else {
    fit = read_fit_dir(fit_dir, ds);
  }
  if (!rel && !loo) rel = true;
  DiagnosticsReport rep = diagnose(ds, fit, cfg, loo);
  if (!rel) rep.relative_errors.clear();
  for (const auto& n : rep.notes) warn("diagnose", n);
  const std::string text = diagnostics_json(rep).dump(2) + "\n";
  const std::string path = !out.empty() ? out : a.run.outputs.diagnostics_path;
  if (path.empty()) std::cout << text;
  else write_file_atomic(path, text);
  return 0;
}

struct SimArgs {
  std::string scenario;
  std::size_t n = 0;
  int p = 4;
  double omega = 0.9;
  int pct = 10;
  std::optional<double> noise_sd;
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  int max_iters = 10000;
  std::string out;
  std::string summary;
};

int run_simulate(const SimArgs& a, CLI::App* app) {
  ScenarioSpec spec;
  spec.kind = parse_scenario(a.scenario);
  spec.n = a.n;
  spec.seed = a.seed;
  spec.p = a.p;
  spec.pct = a.pct;
  if (app->count("--omega")) spec.omega = a.omega;
  else if (spec.kind == ScenarioKind::relative_error_sweep) spec.omega = 0.0;
  spec.noise_sd = a.noise_sd;
  SolverConfig base;
  base.tol = a.tol;
  base.max_iters = a.max_iters;
  const SimulationRun run = simulate(spec, a.replicates, base);
  if (a.out.empty()) std::cout << simulation_csv(run);
  else write_file_atomic(a.out, simulation_csv(run));
  if (!a.summary.empty()) write_file_atomic(a.summary, simulation_summary_csv(run));
  else if (!a.out.empty()) std::cout << simulation_summary_csv(run);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus multidimensional scaling"};
  app.require_subcommand(1);

  DatasetArgs fit_args, dec_args, diag_args;
  std::string out_consensus, out_weights, out_trace, out_dir;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate the consensus configuration");
  fit_args.add_to(fit_cmd);
  fit_cmd->add_option("--out-consensus", out_consensus, "Consensus CSV (id, dim_1..dim_r); stdout if omitted");
  fit_cmd->add_option("--out-weights", out_weights, "Per-source weights JSON");
  fit_cmd->add_option("--out-trace", out_trace, "Stress trace CSV");
  fit_cmd->add_option("--out-dir", out_dir, "Directory for consensus.csv, weights.json and trace.csv");

  std::string dec_fit, dec_out;
  auto* dec_cmd = app.add_subcommand("decompose", "Split each source into consensus and idiosyncratic parts");
  dec_args.add_to(dec_cmd);
  dec_cmd->add_option("--fit", dec_fit, "Directory written by fit --out-dir (refits when omitted)");
  dec_cmd->add_option("--out-dir", dec_out, "Directory for one CSV per source");

  std::string diag_fit, diag_out;
  bool diag_rel = false, diag_loo = false;
  auto* diag_cmd = app.add_subcommand("diagnose", "Relative errors and leave-one-out stability");
  diag_args.add_to(diag_cmd);
  diag_cmd->add_option("--fit", diag_fit, "Directory written by fit --out-dir (refits when omitted)");
  diag_cmd->add_flag("--relative-error", diag_rel, "Report per-source relative errors");
  diag_cmd->add_flag("--loo", diag_loo, "Report leave-one-out stability (refits S times)");
  diag_cmd->add_option("--out", diag_out, "Report JSON; stdout if omitted");

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a synthetic scenario and score the fits");
  sim_cmd->add_option("--scenario", sim.scenario,
                      "swiss_roll, rotation, imbalanced_dims, correlated_features, relative_error_sweep, "
                      "missing_at_random")
      ->required();
  sim_cmd->add_option("--n", sim.n, "Entities (scenario default when omitted)");
  sim_cmd->add_option("--p", sim.p, "Dimension parameter (imbalanced_dims, correlated_features)");
  sim_cmd->add_option("--omega", sim.omega, "Idiosyncratic weight (correlated_features, relative_error_sweep)");
  sim_cmd->add_option("--pct", sim.pct, "Percent of source rows masked (missing_at_random)");
  sim_cmd->add_option("--noise-sd", sim.noise_sd, "Override the noise standard deviation");
  sim_cmd->add_option("--replicates", sim.replicates, "Replicates")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Base seed");
  sim_cmd->add_option("--tol", sim.tol, "Solver tolerance");
  sim_cmd->add_option("--max-iters", sim.max_iters, "Solver iteration limit");
  sim_cmd->add_option("--out", sim.out, "Per-replicate metrics CSV; stdout if omitted");
  sim_cmd->add_option("--summary", sim.summary, "Summary CSV (mean and standard error per metric)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit_cmd) {
      fit_args.merge_config(fit_cmd);
      return run_fit(fit_args, out_consensus, out_weights, out_trace, out_dir);
    }
    if (*dec_cmd) {
      dec_args.merge_config(dec_cmd);
      return run_decompose(dec_args, dec_fit, dec_out);
    }
    if (*diag_cmd) {
      diag_args.merge_config(diag_cmd);
      return run_diagnose(diag_args, diag_fit, diag_rel, diag_loo, diag_out);
    }
    if (*sim_cmd) return run_simulate(sim, sim_cmd);
  } catch (const ValidationError& e) {
    error(e.what());
    return 1;
  } catch (const SolverError& e) {
    error(e.what());
    return 2;
  } catch (const std::exception& e) {
    error(e.what());
    return 1;
  }
  return 0;
}
