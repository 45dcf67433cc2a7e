#pragma once

#include <random>
#include <string>
#include <vector>

#include "blift/graph.hpp"

namespace blift::test {

/// Tiny graph used across the unit tests:
///   t1 (primary), t2 (primary), t3 (secondary); o1..o3
///   o1 -- {t1, t2, t3}, o2 -- {t1}, o3 -- {t3}
/// so O_prim = {o1, o2}, O_Both = {o1}, o3 is secondary-only.
inline BipartiteGraph small_graph() {
  std::vector<TreatmentUnit> t = {
      {"t1", Eligibility::Primary, {}},
      {"t2", Eligibility::Primary, {}},
      {"t3", Eligibility::Secondary, {}},
  };
  std::vector<OutcomeUnit> o = {{"o1", {}}, {"o2", {}}, {"o3", {}}};
  std::vector<EdgeSpec> e = {
      {"o1", "t1", 1.0}, {"o1", "t2", 1.0}, {"o1", "t3", 1.0},
      {"o2", "t1", 1.0}, {"o3", "t3", 1.0},
  };
  return BipartiteGraph::build(std::move(t), std::move(o), e);
}

/// Random bipartite graph where every outcome unit gets >= 1 primary
/// neighbor; secondary neighbors optional per unit.
inline BipartiteGraph random_graph(uint32_t n_outcome, uint32_t n_primary, uint32_t n_secondary,
                                   uint32_t max_prim_degree, uint32_t max_sec_degree,
                                   uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TreatmentUnit> t;
  for (uint32_t j = 0; j < n_primary; ++j)
    t.push_back({"p" + std::to_string(1000 + j), Eligibility::Primary, {}});
  for (uint32_t j = 0; j < n_secondary; ++j)
    t.push_back({"s" + std::to_string(1000 + j), Eligibility::Secondary, {}});
  std::vector<OutcomeUnit> o;
  for (uint32_t i = 0; i < n_outcome; ++i) o.push_back({"o" + std::to_string(10000 + i), {}});

  std::uniform_int_distribution<uint32_t> prim_deg(1, std::max(1u, std::min(max_prim_degree, n_primary)));
  std::uniform_int_distribution<uint32_t> sec_deg(0, std::min(max_sec_degree, n_secondary));
  std::vector<EdgeSpec> edges;
  std::vector<uint32_t> pool;
  for (uint32_t i = 0; i < n_outcome; ++i) {
    pool.resize(n_primary);
    for (uint32_t j = 0; j < n_primary; ++j) pool[j] = j;
    uint32_t d = prim_deg(rng);
    for (uint32_t k = 0; k < d; ++k) {
      std::uniform_int_distribution<uint32_t> pick(k, n_primary - 1);
      std::swap(pool[k], pool[pick(rng)]);
      edges.push_back({o[i].id, t[pool[k]].id, 1.0});
    }
    if (n_secondary > 0) {
      pool.resize(n_secondary);
      for (uint32_t j = 0; j < n_secondary; ++j) pool[j] = j;
      uint32_t ds = sec_deg(rng);
      for (uint32_t k = 0; k < ds; ++k) {
        std::uniform_int_distribution<uint32_t> pick(k, n_secondary - 1);
        std::swap(pool[k], pool[pick(rng)]);
        edges.push_back({o[i].id, t[n_primary + pool[k]].id, 1.0});
      }
    }
  }
  return BipartiteGraph::build(std::move(t), std::move(o), edges);
}

}  // namespace blift::test
