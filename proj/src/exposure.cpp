#include "blift/exposure.hpp"

#include <cmath>

#include "blift/common.hpp"
#include "blift/csv.hpp"

namespace blift {

std::vector<OutcomeExposure> compute_outcome_exposures(const BipartiteGraph& graph,
                                                       const AssignmentVector& z) {
  require_same_graph(graph, z);
  std::vector<OutcomeExposure> rows;
  rows.reserve(graph.o_prim().size());
  for (uint32_t i : graph.o_prim()) {
    OutcomeExposure row;
    row.unit = i;
    row.n_prim = graph.n_prim(i);
    row.n_sec = graph.n_sec(i);
    for (uint32_t j : graph.primary_neighbors(i)) row.treated_prim += z[j];
    rows.push_back(row);
  }
  return rows;
}

std::vector<TreatmentExposure> compute_treatment_exposures(const BipartiteGraph& graph,
                                                           const AssignmentVector& z) {
  require_same_graph(graph, z);
  // Per-outcome treated-primary counts once, then one pass per primary unit.
  std::vector<uint32_t> treated(graph.n_outcome(), 0);
  for (uint32_t i : graph.o_prim())
    for (uint32_t j : graph.primary_neighbors(i)) treated[i] += z[j];

  std::vector<TreatmentExposure> rows;
  rows.reserve(graph.primary_units().size());
  for (uint32_t j : graph.primary_units()) {
    TreatmentExposure row;
    row.unit = j;
    uint64_t dir = 0, ind = 0;
    for (uint32_t i : graph.connected_outcomes(j)) {
      if (!graph.in_o_prim(i)) continue;
      ++dir;
      ind += treated[i] - z[j];  // the k != j restriction
    }
    row.e_dir = z[j] ? static_cast<double>(dir) : 0.0;
    row.e_ind = static_cast<double>(ind);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SecondaryExposure> compute_secondary_indirect_exposures(
    const BipartiteGraph& graph, const AssignmentVector& z) {
  require_same_graph(graph, z);
  std::vector<uint32_t> treated(graph.n_outcome(), 0);
  for (uint32_t i : graph.o_both())
    for (uint32_t j : graph.primary_neighbors(i)) treated[i] += z[j];

  std::vector<SecondaryExposure> rows;
  rows.reserve(graph.secondary_units().size());
  for (uint32_t j : graph.secondary_units()) {
    SecondaryExposure row;
    row.unit = j;
    uint64_t ind = 0;
    for (uint32_t i : graph.connected_outcomes(j)) {
      if (graph.in_o_both(i)) ind += treated[i];
    }
    row.e_ind = static_cast<double>(ind);
    rows.push_back(row);
  }
  return rows;
}

double gps_binomial(double exposure, uint32_t n, double p) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "gps_binomial: n must be >= 1");
  if (p < 0 || p > 1) fail(ErrorCode::InvalidArgument, "gps_binomial: p outside [0,1]");
  double ke = exposure * n;
  double kr = std::round(ke);
  if (std::abs(ke - kr) > 1e-9 || kr < 0 || kr > n)
    fail(ErrorCode::InvalidArgument,
         "gps_binomial: exposure " + std::to_string(exposure) + " not attainable with n = " +
             std::to_string(n));
  uint32_t k = static_cast<uint32_t>(kr);

  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;

  if (n <= 30) {
    // Exact small-n path: multiplicative binomial coefficient.
    double c = 1.0;
    for (uint32_t t = 0; t < k; ++t) c = c * (n - t) / (t + 1);
    return c * std::pow(p, k) * std::pow(1.0 - p, n - k);
  }
  double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(logc + k * std::log(p) + (n - k) * std::log1p(-p));
}

ExposureTable compute_exposures(const BipartiteGraph& graph, const AssignmentVector& z,
                                double treatment_probability) {
  if (treatment_probability < 0 || treatment_probability > 1)
    fail(ErrorCode::InvalidArgument, "treatment probability outside [0,1]");
  ExposureTable table;
  table.assignment_label = z.label();
  table.assignment.resize(z.size());
  for (uint32_t j = 0; j < z.size(); ++j) table.assignment[j] = z[j];
  table.graph_fingerprint = graph.fingerprint();
  table.treatment_probability = treatment_probability;
  table.outcomes = compute_outcome_exposures(graph, z);
  for (auto& row : table.outcomes)
    row.gps = gps_binomial(row.exposure(), row.n_prim, treatment_probability);
  table.treatments = compute_treatment_exposures(graph, z);
  table.secondaries = compute_secondary_indirect_exposures(graph, z);
  return table;
}

std::string exposures_to_csv(const ExposureTable& table, const BipartiteGraph& graph) {
  std::string out = "unit_id,level,E,E_dir,E_ind,n_prim,n_sec,gps\n";
  for (const auto& r : table.outcomes) {
    out += csv::escape(graph.outcome_unit(r.unit).id);
    out += ",outcome," + csv::format_double(r.exposure()) + ",,," +
           std::to_string(r.n_prim) + "," + std::to_string(r.n_sec) + "," +
           csv::format_double(r.gps) + "\n";
  }
  for (const auto& r : table.treatments) {
    out += csv::escape(graph.treatment_unit(r.unit).id);
    out += ",treatment,," + csv::format_double(r.e_dir) + "," +
           csv::format_double(r.e_ind) + ",,,\n";
  }
  for (const auto& r : table.secondaries) {
    out += csv::escape(graph.treatment_unit(r.unit).id);
    out += ",secondary_treatment,,," + csv::format_double(r.e_ind) + ",,,\n";
  }
  return out;
}

void write_exposures_csv(const ExposureTable& table, const BipartiteGraph& graph,
                         const std::string& path) {
  csv::write_file_atomic(path, exposures_to_csv(table, graph));
}

}  // namespace blift
