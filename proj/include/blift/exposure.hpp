#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blift/graph.hpp"

namespace blift {

/// Exposure for one outcome unit in O_prim, kept in rational form (treated
/// count over primary-neighbor count); converted to a real only at model
/// input time.
struct OutcomeExposure {
  uint32_t unit = 0;
  uint32_t treated_prim = 0;  // number of treated primary neighbors
  uint32_t n_prim = 0;
  uint32_t n_sec = 0;
  double gps = 0;  // r(E, n_prim, p); filled by compute_exposures

  double exposure() const { return n_prim ? static_cast<double>(treated_prim) / n_prim : 0.0; }
};

struct TreatmentExposure {
  uint32_t unit = 0;  // a primary treatment unit
  double e_dir = 0;
  double e_ind = 0;
};

struct SecondaryExposure {
  uint32_t unit = 0;  // a secondary treatment unit
  double e_ind = 0;
};

struct ExposureTable {
  std::string assignment_label;
  std::vector<uint8_t> assignment;  // the realized Z that produced this table
  uint64_t graph_fingerprint = 0;
  double treatment_probability = 0;
  std::vector<OutcomeExposure> outcomes;       // one row per unit in O_prim, by index
  std::vector<TreatmentExposure> treatments;   // one row per primary unit, by index
  std::vector<SecondaryExposure> secondaries;  // one row per secondary unit, by index
};

/// E_i = sum over primary neighbors of w_ij Z_j, under the estimation default
/// w_ij = 1/n_prim_i, i.e. the fraction of treated primary neighbors. Rows
/// exist only for i in O_prim; gps is left at 0 (see compute_exposures).
std::vector<OutcomeExposure> compute_outcome_exposures(const BipartiteGraph& graph,
                                                       const AssignmentVector& z);

/// Direct exposure Z_j * #{i in O_prim : j in Nprim(i)} and indirect exposure
/// (treated primary neighbors, other than j, summed over j's outcome units in
/// O_prim), for every primary unit j.
std::vector<TreatmentExposure> compute_treatment_exposures(const BipartiteGraph& graph,
                                                           const AssignmentVector& z);

/// Indirect exposure for secondary units: treated primary neighbors of j's
/// shared outcome units in O_Both.
std::vector<SecondaryExposure> compute_secondary_indirect_exposures(const BipartiteGraph& graph,
                                                                    const AssignmentVector& z);

/// Binomial generalized propensity score r(e, n, p) = C(n,k) p^k (1-p)^(n-k)
/// with e = k/n. Errors when n = 0 or e is not attainable for n.
double gps_binomial(double exposure, uint32_t n, double p);

/// Full table: all three exposure kinds plus the GPS column, tied to the
/// assignment that produced it.
ExposureTable compute_exposures(const BipartiteGraph& graph, const AssignmentVector& z,
                                double treatment_probability);

std::string exposures_to_csv(const ExposureTable& table, const BipartiteGraph& graph);
void write_exposures_csv(const ExposureTable& table, const BipartiteGraph& graph,
                         const std::string& path);

}  // namespace blift
