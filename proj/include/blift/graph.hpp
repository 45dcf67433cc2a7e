#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace blift {

enum class Eligibility : uint8_t { Primary, Secondary };

struct TreatmentUnit {
  std::string id;
  Eligibility eligibility = Eligibility::Primary;
  std::vector<double> covariates;  // values aligned with treatment covariate names
};

struct OutcomeUnit {
  std::string id;
  std::vector<double> covariates;
};

/// Edge endpoints by unit id, the form edges arrive in from files.
struct EdgeSpec {
  std::string outcome_id;
  std::string treatment_id;
  double weight = 1.0;
};

/// Edge endpoints by index into the graph's sorted unit arrays.
struct Edge {
  uint32_t outcome = 0;
  uint32_t treatment = 0;
  double weight = 1.0;
};

/// Index sets recomputable from the edge list alone.
struct DerivedIndexSets {
  std::vector<std::vector<uint32_t>> primary_neighbors;  // per outcome, sorted
  std::vector<uint32_t> n_prim;                          // per outcome
  std::vector<uint32_t> n_sec;                           // per outcome
  std::vector<std::vector<uint32_t>> connected_outcomes; // per treatment unit, sorted
  std::vector<uint32_t> o_prim;  // outcomes with >=1 primary neighbor, sorted
  std::vector<uint32_t> o_both;  // outcomes with >=1 primary and >=1 secondary neighbor
};

/// Immutable weighted bipartite experiment graph. Units are stored sorted by
/// id, so indices define a stable canonical rank. Construction validates; a
/// built graph is safe to share across threads.
class BipartiteGraph {
 public:
  static BipartiteGraph build(std::vector<TreatmentUnit> treatment_units,
                              std::vector<OutcomeUnit> outcome_units,
                              const std::vector<EdgeSpec>& edges,
                              std::vector<std::string> treatment_covariate_names = {},
                              std::vector<std::string> outcome_covariate_names = {});

  /// Simulator fast path: endpoints already indexed against the given unit
  /// order. Units must already be sorted by id. Same validation as build().
  static BipartiteGraph build_indexed(std::vector<TreatmentUnit> treatment_units,
                                      std::vector<OutcomeUnit> outcome_units,
                                      std::vector<Edge> edges,
                                      std::vector<std::string> treatment_covariate_names = {},
                                      std::vector<std::string> outcome_covariate_names = {});

  uint32_t n_treatment() const { return static_cast<uint32_t>(treatment_units_.size()); }
  uint32_t n_outcome() const { return static_cast<uint32_t>(outcome_units_.size()); }
  size_t n_edges() const { return edges_.size(); }

  const TreatmentUnit& treatment_unit(uint32_t j) const { return treatment_units_[j]; }
  const OutcomeUnit& outcome_unit(uint32_t i) const { return outcome_units_[i]; }
  std::span<const Edge> edges() const { return edges_; }

  std::span<const uint32_t> primary_units() const { return primary_units_; }
  std::span<const uint32_t> secondary_units() const { return secondary_units_; }
  std::span<const uint32_t> o_prim() const { return derived_.o_prim; }
  std::span<const uint32_t> o_both() const { return derived_.o_both; }
  bool in_o_prim(uint32_t i) const { return derived_.n_prim[i] >= 1; }
  bool in_o_both(uint32_t i) const { return derived_.n_prim[i] >= 1 && derived_.n_sec[i] >= 1; }

  std::span<const uint32_t> primary_neighbors(uint32_t i) const { return derived_.primary_neighbors[i]; }
  uint32_t n_prim(uint32_t i) const { return derived_.n_prim[i]; }
  uint32_t n_sec(uint32_t i) const { return derived_.n_sec[i]; }
  std::span<const uint32_t> connected_outcomes(uint32_t j) const { return derived_.connected_outcomes[j]; }

  /// Edge indices incident to an outcome / treatment unit.
  std::span<const uint32_t> outcome_edges(uint32_t i) const;
  std::span<const uint32_t> treatment_edges(uint32_t j) const;

  int find_treatment(const std::string& id) const;  // -1 when absent
  int find_outcome(const std::string& id) const;

  const std::vector<std::string>& treatment_covariate_names() const { return treatment_cov_names_; }
  const std::vector<std::string>& outcome_covariate_names() const { return outcome_cov_names_; }

  /// Order-independent digest of the unit id sets; assignments remember it so
  /// graph/assignment mismatches are detected.
  uint64_t fingerprint() const { return fingerprint_; }

 private:
  BipartiteGraph() = default;
  void finalize();  // derives index sets, incidence, fingerprint

  std::vector<TreatmentUnit> treatment_units_;  // sorted by id
  std::vector<OutcomeUnit> outcome_units_;      // sorted by id
  std::vector<Edge> edges_;                     // sorted by (outcome, treatment)
  std::vector<std::string> treatment_cov_names_;
  std::vector<std::string> outcome_cov_names_;

  DerivedIndexSets derived_;
  std::vector<uint32_t> primary_units_;
  std::vector<uint32_t> secondary_units_;
  std::vector<uint32_t> outcome_edge_index_;   // CSR over edges per outcome
  std::vector<uint32_t> outcome_edge_start_;
  std::vector<uint32_t> treatment_edge_index_;
  std::vector<uint32_t> treatment_edge_start_;
  uint64_t fingerprint_ = 0;
};

/// Recomputes all derived index sets from the edge list alone. Total on
/// validated graphs; idempotent.
DerivedIndexSets derive_index_sets(const BipartiteGraph& graph);

/// Binary treatment assignment over all treatment-side units. Construction
/// validates coverage and the structural zero on secondary units.
class AssignmentVector {
 public:
  static AssignmentVector zeros(const BipartiteGraph& graph);  // Z(0)
  static AssignmentVector full(const BipartiteGraph& graph);   // Z(1): 1 on every primary unit
  static AssignmentVector bernoulli(const BipartiteGraph& graph, double p, uint64_t seed);
  /// From (treatment_id, z) pairs covering exactly the treatment side.
  static AssignmentVector from_pairs(const BipartiteGraph& graph,
                                     const std::vector<std::pair<std::string, int>>& pairs,
                                     std::string label);

  uint8_t operator[](uint32_t j) const { return z_[j]; }
  uint32_t size() const { return static_cast<uint32_t>(z_.size()); }
  const std::string& label() const { return label_; }
  uint64_t graph_fingerprint() const { return graph_fingerprint_; }

  /// Copy with one coordinate flipped; revalidates (flipping a secondary unit
  /// to 1 throws).
  AssignmentVector with_flipped(const BipartiteGraph& graph, uint32_t j) const;

 private:
  AssignmentVector(std::vector<uint8_t> z, std::string label, uint64_t fp)
      : z_(std::move(z)), label_(std::move(label)), graph_fingerprint_(fp) {}
  static AssignmentVector validated(const BipartiteGraph& graph, std::vector<uint8_t> z,
                                    std::string label);

  std::vector<uint8_t> z_;
  std::string label_;
  uint64_t graph_fingerprint_ = 0;
};

/// Throws unless the assignment was built against this graph.
void require_same_graph(const BipartiteGraph& graph, const AssignmentVector& z);

// File ingestion (CSV schemas documented in the README).
BipartiteGraph load_graph(const std::string& units_csv_path, const std::string& edges_csv_path);
BipartiteGraph parse_graph(const std::string& units_csv_text, const std::string& edges_csv_text);
AssignmentVector load_assignment(const BipartiteGraph& graph, const std::string& path);
AssignmentVector parse_assignment(const BipartiteGraph& graph, const std::string& csv_text);

/// Canonical JSON serialization (sorted unit ids, sorted edge pairs); stable
/// byte-for-byte for golden tests.
std::string graph_to_canonical_json(const BipartiteGraph& graph);

}  // namespace blift
