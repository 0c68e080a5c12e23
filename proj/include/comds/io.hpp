#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "comds/simulate.hpp"
#include "comds/solver.hpp"
#include "comds/types.hpp"
#include "comds/validate.hpp"

namespace comds {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes `content` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw ValidationError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ValidationError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Splits one CSV record; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  const auto [p, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && p == e;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

/// Lines of a text file with their 1-based numbers; blank lines dropped.
inline std::vector<std::pair<std::size_t, std::string>> csv_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    out.emplace_back(no, line);
  }
  return out;
}

}  // namespace detail

/// One id-keyed numeric table as read from disk.
struct IdTable {
  std::vector<std::string> columns;  ///< numeric column names (no `id`)
  std::vector<std::string> ids;      ///< in file order
  std::vector<std::vector<double>> rows;
  std::vector<bool> usable;  ///< false when the row had an empty cell
};

/// Reads a CSV whose first column is `id` and whose remaining columns are
/// numeric. Rows with an empty numeric cell are kept but marked unusable.
inline IdTable read_id_table(const fs::path& path, std::vector<std::string>* warnings = nullptr) {
  const std::string file = path.string();
  const auto lines = detail::csv_lines(path);
  if (lines.empty()) throw ValidationError(file + ": empty file (expected a header row)");
  IdTable t;
  const auto header = detail::split_csv(lines.front().second);
  if (header.front() != "id")
    throw ValidationError(file + " line " + std::to_string(lines.front().first) + ": first column must be 'id'");
  if (header.size() < 2)
    throw ValidationError(file + " line " + std::to_string(lines.front().first) + ": zero data columns");
  t.columns.assign(header.begin() + 1, header.end());

  std::set<std::string> seen;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [no, text] = lines[k];
    const std::string where = file + " line " + std::to_string(no);
    const auto cells = detail::split_csv(text);
    if (cells.size() != header.size())
      throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(cells.size()));
    const std::string& id = cells.front();
    if (id.empty()) throw ValidationError(where + ": empty id");
    if (!seen.insert(id).second) throw ValidationError(file + ": duplicate id at line " + std::to_string(no));
    std::vector<double> vals(cells.size() - 1, 0.0);
    bool usable = true;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c].empty()) {
        usable = false;
        continue;
      }
      if (!detail::parse_double(cells[c], vals[c - 1]))
        throw ValidationError(where + ": non-numeric cell '" + cells[c] + "' in column '" + header[c] + "'");
    }
    if (!usable && warnings)
      warnings->push_back(where + ": empty cell; entity '" + id + "' treated as missing");
    t.ids.push_back(id);
    t.rows.push_back(std::move(vals));
    t.usable.push_back(usable);
  }
  return t;
}

/// Loads one CSV per source and aligns them on the sorted union of ids.
/// The assembled dataset is validated and violations are fatal.
inline AlignedDataset read_sources(const std::vector<std::string>& paths, const std::vector<std::string>& names = {},
                                   const std::vector<double>& weights = {},
                                   std::vector<std::string>* warnings = nullptr, Index rank = 1) {
  if (!names.empty() && names.size() != paths.size())
    throw ValidationError("got " + std::to_string(names.size()) + " names for " + std::to_string(paths.size()) +
                          " sources");
  if (!weights.empty() && weights.size() != paths.size())
    throw ValidationError("got " + std::to_string(weights.size()) + " weights for " + std::to_string(paths.size()) +
                          " sources");
  std::set<std::string> distinct(paths.begin(), paths.end());
  if (distinct.size() != paths.size()) throw ValidationError("source paths must be distinct");

  std::vector<IdTable> tables;
  std::set<std::string> all_ids;
  for (const auto& p : paths) {
    tables.push_back(read_id_table(p, warnings));
    all_ids.insert(tables.back().ids.begin(), tables.back().ids.end());
  }

  AlignedDataset ds;
  std::map<std::string, Index> row_of;
  for (const auto& id : all_ids) {
    row_of[id] = static_cast<Index>(ds.entities.size());
    ds.entities.emplace_back(id);
  }
  const auto n = static_cast<Index>(ds.entities.size());
  for (std::size_t s = 0; s < tables.size(); ++s) {
    const auto& t = tables[s];
    SourceEmbedding e;
    e.name = names.empty() ? fs::path(paths[s]).stem().string() : names[s];
    e.weight = weights.empty() ? 1.0 : weights[s];
    e.coords = Matrix::Zero(n, static_cast<Index>(t.columns.size()));
    e.present.assign(static_cast<std::size_t>(n), false);
    for (std::size_t k = 0; k < t.ids.size(); ++k) {
      if (!t.usable[k]) continue;
      const Index i = row_of.at(t.ids[k]);
      for (std::size_t c = 0; c < t.columns.size(); ++c) e.coords(i, static_cast<Index>(c)) = t.rows[k][c];
      e.present[static_cast<std::size_t>(i)] = true;
    }
    ds.sources.push_back(std::move(e));
  }
  require_valid(ds, rank);
  return ds;
}

/// CSV with an `id` column followed by `prefix1..prefixK` (or the given
/// column names) for the listed rows of `m`.
inline std::string matrix_csv(const std::vector<EntityId>& ids, const Matrix& m, const std::vector<std::string>& cols,
                              const std::vector<Index>& rows) {
  std::string out = "id";
  for (const auto& c : cols) out += "," + detail::csv_field(c);
  out += "\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out += detail::csv_field(ids[static_cast<std::size_t>(rows[k])].value);
    for (Index c = 0; c < m.cols(); ++c) out += "," + format_double(m(static_cast<Index>(k), c));
    out += "\n";
  }
  return out;
}

inline std::vector<std::string> numbered_columns(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index k = 1; k <= count; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

inline std::string consensus_csv(const AlignedDataset& ds, const ConsensusFit& fit) {
  std::vector<Index> rows(ds.n());
  std::iota(rows.begin(), rows.end(), Index{0});
  return matrix_csv(ds.entities, fit.consensus, numbered_columns("dim_", fit.rank()), rows);
}

inline std::string trace_csv(const ConsensusFit& fit) {
  std::string out = "iteration,stress\n0," + format_double(fit.initial_stress) + "\n";
  for (std::size_t k = 0; k < fit.stress_trace.size(); ++k)
    out += std::to_string(k + 1) + "," + format_double(fit.stress_trace[k]) + "\n";
  return out;
}

inline json weights_json(const AlignedDataset& ds, const ConsensusFit& fit) {
  json j;
  j["rank"] = fit.rank();
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["initial_stress"] = fit.initial_stress;
  j["final_stress"] = fit.final_stress();
  j["column_scale"] = std::vector<double>(fit.column_scale.data(), fit.column_scale.data() + fit.column_scale.size());
  j["sources"] = json::array();
  for (std::size_t s = 0; s < ds.num_sources(); ++s) {
    const Vector& w = fit.source_weights[s];
    j["sources"].push_back({{"name", ds.sources[s].name},
                            {"weight", ds.sources[s].weight},
                            {"diagonal", std::vector<double>(w.data(), w.data() + w.size())},
                            {"per_source_error", fit.per_source_error[s]}});
  }
  return j;
}

inline json diagnostics_json(const DiagnosticsReport& rep) {
  json j;
  j["relative_errors"] = rep.relative_errors;
  j["loo_stability"] = json::array();
  for (const auto& v : rep.loo_stability) j["loo_stability"].push_back(v ? json(*v) : json(nullptr));
  j["per_source_error"] = rep.per_source_error;
  j["notes"] = rep.notes;
  return j;
}

/// Reads an id-keyed matrix (a consensus CSV) and aligns it to `ds`. Every
/// dataset entity must appear.
inline Matrix read_aligned_matrix(const fs::path& path, const AlignedDataset& ds) {
  const auto t = read_id_table(path);
  std::map<std::string, std::size_t> at;
  for (std::size_t k = 0; k < t.ids.size(); ++k) at[t.ids[k]] = k;
  Matrix m(static_cast<Index>(ds.n()), static_cast<Index>(t.columns.size()));
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto it = at.find(ds.entities[i].value);
    if (it == at.end()) throw ValidationError(path.string() + ": no row for entity '" + ds.entities[i].value + "'");
    if (!t.usable[it->second]) throw ValidationError(path.string() + ": empty cell for entity '" + ds.entities[i].value + "'");
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      m(static_cast<Index>(i), static_cast<Index>(c)) = t.rows[it->second][c];
  }
  return m;
}

/// Rebuilds a fit written by `fit --out-dir` (consensus.csv + weights.json)
/// against the dataset it was produced from.
inline ConsensusFit read_fit_dir(const fs::path& dir, const AlignedDataset& ds) {
  ConsensusFit fit;
  fit.consensus = read_aligned_matrix(dir / "consensus.csv", ds);
  json j;
  try {
    j = json::parse(read_file(dir / "weights.json"));
  } catch (const json::exception& e) {
    throw ValidationError((dir / "weights.json").string() + ": " + e.what());
  }
  const auto& srcs = j.at("sources");
  if (srcs.size() != ds.num_sources())
    throw ValidationError("fit in '" + dir.string() + "' has " + std::to_string(srcs.size()) +
                          " sources, dataset has " + std::to_string(ds.num_sources()));
  for (std::size_t s = 0; s < ds.num_sources(); ++s) {
    const auto& e = srcs[s];
    if (e.at("name").get<std::string>() != ds.sources[s].name)
      throw ValidationError("fit source " + std::to_string(s + 1) + " is '" + e.at("name").get<std::string>() +
                            "', dataset source is '" + ds.sources[s].name + "'");
    const auto d = e.at("diagonal").get<std::vector<double>>();
    if (static_cast<Index>(d.size()) != fit.rank()) throw ValidationError("fit weights do not match consensus rank");
    fit.source_weights.push_back(Eigen::Map<const Vector>(d.data(), static_cast<Index>(d.size())));
    fit.per_source_error.push_back(e.value("per_source_error", 0.0));
  }
  fit.iterations = j.value("iterations", 0);
  fit.converged = j.value("converged", false);
  fit.initial_stress = j.value("initial_stress", 0.0);
  fit.stress_trace.push_back(j.value("final_stress", 0.0));
  return fit;
}

struct SourceSpec {
  std::string path;
  std::string name;
  double weight = 1.0;
};

struct OutputPaths {
  std::string consensus_path;
  std::string weights_path;
  std::string diagnostics_path;
  std::string decomposition_dir;
  std::string trace_path;
};

struct RunConfig {
  std::vector<SourceSpec> sources;
  Index rank = 1;
  double tol = 1e-6;
  int max_iters = 10000;
  std::string init = "classical";
  std::uint64_t seed = 0;
  int restarts = 1;
  OutputPaths outputs;
};

inline RunConfig parse_run_config(const json& j) {
  RunConfig c;
  try {
    for (const auto& s : j.at("sources")) {
      SourceSpec spec;
      spec.path = s.at("path").get<std::string>();
      spec.name = s.value("name", fs::path(spec.path).stem().string());
      spec.weight = s.value("weight", 1.0);
      c.sources.push_back(std::move(spec));
    }
    c.rank = j.value("rank", c.rank);
    c.tol = j.value("tol", c.tol);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.init = j.value("init", c.init);
    c.seed = j.value("seed", c.seed);
    c.restarts = j.value("restarts", c.restarts);
    if (j.contains("outputs")) {
      const auto& o = j["outputs"];
      c.outputs.consensus_path = o.value("consensus_path", "");
      c.outputs.weights_path = o.value("weights_path", "");
      c.outputs.diagnostics_path = o.value("diagnostics_path", "");
      c.outputs.decomposition_dir = o.value("decomposition_dir", "");
      c.outputs.trace_path = o.value("trace_path", "");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (c.sources.size() < 2) throw ValidationError("config: need at least 2 sources");
  std::set<std::string> paths;
  for (const auto& s : c.sources)
    if (!paths.insert(s.path).second) throw ValidationError("config: duplicate source path '" + s.path + "'");
  return c;
}

inline RunConfig read_run_config(const fs::path& path) {
  try {
    return parse_run_config(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

/// Tidy per-replicate metrics: replicate,seed,metric,value.
inline std::string simulation_csv(const SimulationRun& run) {
  std::string out = "scenario,replicate,seed,metric,value\n";
  const std::string name = scenario_name(run.spec.kind);
  for (const auto& r : run.rows)
    out += name + "," + std::to_string(r.replicate) + "," + std::to_string(r.seed) + "," + r.metric + "," +
           format_double(r.value) + "\n";
  return out;
}

inline std::string simulation_summary_csv(const SimulationRun& run) {
  std::string out = "scenario,metric,mean,se,count\n";
  const std::string name = scenario_name(run.spec.kind);
  for (const auto& s : run.summary)
    out += name + "," + s.metric + "," + format_double(s.mean) + "," + format_double(s.se) + "," +
           std::to_string(s.count) + "\n";
  return out;
}

}  // namespace comds
