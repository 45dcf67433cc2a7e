#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blift/graph.hpp"

namespace blift {

/// One row of the simulation grid: market density (mean primary neighbors per
/// outcome unit) crossed with rollout coverage (treatment probability).
struct ScenarioSpec {
  int spec_id = 1;
  double target_mean_primary_degree = 2.8;
  double treatment_probability = 0.5;
  uint32_t n_outcome = 30000;
  uint32_t n_primary = 100;
  uint32_t n_secondary = 200;
  uint32_t secondary_degree = 2;
  int replications = 50;
  uint64_t base_seed = 1;
};

/// The five-specification grid used throughout the reports.
std::vector<ScenarioSpec> scenario_grid();
ScenarioSpec scenario_by_id(int spec_id);

// Vehicle-type indices in the attention-spillover outcome model; primary
// units are always the treated type.
inline constexpr int kTypeTreated = 0;    // economy analogue
inline constexpr int kTypeSubstitute = 1; // premium analogue
inline constexpr int kTypeCompetitor = 2; // xl analogue
using BetaMatrix = std::array<std::array<double, 3>, 3>;

/// Named spillover-sign presets for the beta matrix.
///  - "amplification" (default): positive same-type coefficient for the
///    treated type, substitutes gain, competitors lose.
///  - "prominence_saturation": negative diagonal for the treated type.
///  - "no_cross_spillover": secondary rows take zero from the treated column,
///    so both secondary effects are exactly zero.
BetaMatrix beta_pattern(const std::string& name);

struct DgpConfig {
  std::array<double, 2> alpha_range = {1.0, 2.0};  // per-type baseline, one draw per replicate
  std::array<double, 2> gamma_range = {0.5, 1.5};  // per-outcome-unit responsiveness
  std::string beta_pattern_name = "amplification";
  std::optional<BetaMatrix> beta_override;
  double sigma = 0.1;  // edge-level noise scale
  double visibility_base = 1.0;
  double visibility_treated = 1.1;  // the 10% visibility bump
};

/// A realized parameter set for one graph: alpha per type, gamma per outcome
/// unit, the spillover matrix, and the unit -> type labeling.
struct DgpParams {
  std::array<double, 3> alpha = {0, 0, 0};
  std::vector<double> gamma;  // per outcome unit
  BetaMatrix beta = {};
  double sigma = 0;
  double visibility_base = 1.0;
  double visibility_treated = 1.1;
  std::vector<uint8_t> treatment_type;  // per treatment unit
};

DgpParams draw_dgp_params(const DgpConfig& config, const BipartiteGraph& graph, uint64_t seed);

/// Random bipartite graph with per-outcome primary degree drawn from the
/// floor/ceil mixture matched to the target mean and a fixed number of
/// secondary neighbors; every outcome unit gets at least one of each, so
/// O_Both covers all outcome units. Deterministic given seed.
BipartiteGraph generate_graph(const ScenarioSpec& scenario, uint64_t seed);

/// Edge-level outcomes under the attention-spillover model
///   Y_ij = alpha[type(j)] + gamma_i * sum_k beta[type(j)][type(k)] log v_k(Z) + eps_ij
/// with v_k(Z) = visibility_treated when k is a treated primary unit.
std::vector<double> simulate_outcomes(const BipartiteGraph& graph, const DgpParams& params,
                                      const AssignmentVector& z, uint64_t noise_seed);

/// Same model with eps identically zero.
std::vector<double> evaluate_noiseless(const BipartiteGraph& graph, const DgpParams& params,
                                       const AssignmentVector& z);

/// Unit-level sums of edge outcomes (the edge-additivity decomposition).
struct UnitOutcomes {
  std::vector<double> y_outcome;        // per outcome unit, all edges
  std::vector<double> y_outcome_prim;   // primary-side component
  std::vector<double> y_outcome_sec;    // secondary-side component
  std::vector<double> y_treatment;      // per treatment unit, all edges
  std::vector<double> y_treatment_sec;  // secondary units, edges into O_Both only
};
UnitOutcomes sum_unit_outcomes(const BipartiteGraph& graph, const std::vector<double>& edge_y);

struct GroundTruth {
  double ptte_outcome = 0;
  double ptte_treatment = 0;
  double stte_outcome = 0;
  double stte_treatment = 0;
};

/// Exact estimand values from the noiseless model evaluated at Z(1) and Z(0).
GroundTruth ground_truth_effects(const BipartiteGraph& graph, const DgpParams& params);

/// The four estimand definitions applied to an arbitrary pair of edge-outcome
/// tables (used both by ground_truth_effects and by the projection property
/// fixtures).
GroundTruth effects_from_edge_outcomes(const BipartiteGraph& graph,
                                       const std::vector<double>& edge_y_full,
                                       const std::vector<double>& edge_y_zero);

// ---- replication studies ----------------------------------------------

struct BootstrapSpec {
  bool enabled = false;
  int B = 200;
  double confidence = 0.95;
};

struct ReplicationOptions {
  std::vector<std::string> estimators = {"basic", "lp", "krr", "gbt"};
  BootstrapSpec bootstrap;  // treatment-level PTTE interval + projected outcome interval
  int jobs = 1;
  int krr_max_train = 2000;
  int krr_cv_subsample = 500;
  int gbt_rounds = 200;
};

struct ReplicationRow {
  int replicate = 0;
  std::string estimand;  // "ptte" | "stte"
  std::string level;     // "outcome" | "treatment"
  std::string method;    // "basic" | "lp" | "krr" | "gbt" | "proj_gt" | "proj_krr"
  double estimate = 0;
  std::optional<double> ci_lo, ci_hi;
  double ground_truth = 0;
};

struct ReplicationRecord {
  int replicate = 0;
  GroundTruth ground_truth;
  std::vector<ReplicationRow> rows;
  std::vector<std::string> errors;  // per-estimator failures, not fatal to the batch
};

std::vector<ReplicationRecord> run_replications(const ScenarioSpec& scenario,
                                                const DgpConfig& dgp,
                                                const ReplicationOptions& options);

std::string replication_rows_to_csv(const std::vector<ReplicationRecord>& records);
void write_replication_csv(const std::vector<ReplicationRecord>& records,
                           const std::string& path);
std::vector<ReplicationRow> read_replication_csv(const std::string& path);

}  // namespace blift
