#pragma once

#include <cstddef>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "comds/types.hpp"

namespace comds {

enum class ViolationKind {
  too_few_sources,
  too_few_entities,
  empty_id,
  duplicate_id,
  shape_mismatch,
  zero_dimensions,
  non_finite,
  bad_weight,
  sparse_source,
  orphan_entity,
  disconnected,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  bool has(ViolationKind k) const {
    for (const auto& v : violations)
      if (v.kind == k) return true;
    return false;
  }

  std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.message;
    }
    return out;
  }
};

/// Number of connected components of the co-observation graph restricted to
/// entities present in at least one source. Entities sharing a source are
/// linked, so a BFS over "entity -> sources -> entities" suffices.
inline std::size_t co_observation_components(const AlignedDataset& ds) {
  const std::size_t n = ds.n();
  const std::size_t S = ds.num_sources();
  std::vector<std::vector<std::size_t>> members(S);
  std::vector<std::vector<std::size_t>> sources_of(n);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& present = ds.sources[s].present;
    for (std::size_t i = 0; i < n && i < present.size(); ++i) {
      if (present[i]) {
        members[s].push_back(i);
        sources_of[i].push_back(s);
      }
    }
  }
  std::vector<bool> seen_entity(n, false);
  std::vector<bool> seen_source(S, false);
  std::size_t components = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (seen_entity[start] || sources_of[start].empty()) continue;
    ++components;
    std::queue<std::size_t> frontier;
    frontier.push(start);
    seen_entity[start] = true;
    while (!frontier.empty()) {
      const std::size_t i = frontier.front();
      frontier.pop();
      for (std::size_t s : sources_of[i]) {
        if (seen_source[s]) continue;
        seen_source[s] = true;
        for (std::size_t j : members[s]) {
          if (!seen_entity[j]) {
            seen_entity[j] = true;
            frontier.push(j);
          }
        }
      }
    }
  }
  return components;
}

/// Checks every data-model invariant and reports all violations at once.
/// `rank` is the consensus dimension the caller intends to fit; each source
/// must observe at least rank + 1 entities.
inline ValidationReport validate_dataset(const AlignedDataset& ds, Index rank = 1) {
  ValidationReport rep;
  auto add = [&rep](ViolationKind k, std::string msg) {
    rep.violations.push_back({k, std::move(msg)});
  };

  const std::size_t n = ds.n();
  if (ds.num_sources() < 2)
    add(ViolationKind::too_few_sources,
        "need at least 2 sources, got " + std::to_string(ds.num_sources()));
  if (n < 3) add(ViolationKind::too_few_entities, "need at least 3 entities, got " + std::to_string(n));

  std::set<std::string> ids;
  for (const auto& e : ds.entities) {
    if (e.value.empty()) add(ViolationKind::empty_id, "empty entity id");
    else if (!ids.insert(e.value).second)
      add(ViolationKind::duplicate_id, "duplicate entity id '" + e.value + "'");
  }

  bool shapes_ok = true;
  for (const auto& src : ds.sources) {
    const std::string tag = "source '" + src.name + "': ";
    if (static_cast<std::size_t>(src.coords.rows()) != n || src.present.size() != n) {
      add(ViolationKind::shape_mismatch, tag + "row count does not match entity count");
      shapes_ok = false;
      continue;
    }
    if (src.coords.cols() < 1) add(ViolationKind::zero_dimensions, tag + "no coordinate columns");
    if (!(src.weight > 0.0) || !std::isfinite(src.weight))
      add(ViolationKind::bad_weight, tag + "weight must be positive and finite");
    for (std::size_t i = 0; i < n; ++i) {
      if (src.present[i] && !src.coords.row(static_cast<Index>(i)).allFinite()) {
        add(ViolationKind::non_finite,
            tag + "non-finite value for entity '" + ds.entities[i].value + "'");
      }
    }
    if (src.present_count() < static_cast<std::size_t>(rank + 1)) {
      add(ViolationKind::sparse_source,
          tag + "observes " + std::to_string(src.present_count()) + " entities, need at least " +
              std::to_string(rank + 1));
    }
  }
  if (!shapes_ok) return rep;

  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (const auto& src : ds.sources) any = any || src.present[i];
    if (!any) add(ViolationKind::orphan_entity, "orphan entity '" + ds.entities[i].value + "' (present in no source)");
  }
  if (co_observation_components(ds) > 1)
    add(ViolationKind::disconnected, "disconnected co-observation graph");
  return rep;
}

/// Throws ValidationError listing every violation.
inline void require_valid(const AlignedDataset& ds, Index rank = 1) {
  const auto rep = validate_dataset(ds, rank);
  if (!rep.ok()) throw ValidationError("invalid dataset: " + rep.summary());
}

}  // namespace comds
