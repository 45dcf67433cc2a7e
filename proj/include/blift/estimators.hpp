#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blift/exposure.hpp"
#include "blift/graph.hpp"
#include "blift/models.hpp"
#include "blift/sim.hpp"

namespace blift {

enum class Level { Outcome, Treatment, SecondaryOutcome, SecondaryTreatment };
enum class Estimand { PTTE, STTE };

std::string level_name(Level level);
std::string estimand_name(Estimand estimand);
Level parse_level(const std::string& name);
Estimand estimand_for_level(Level level);

/// Observed outcomes, either edge-level (components available) or unit-level
/// only (primary/secondary components unavailable; secondary levels cannot be
/// built and Y_i stands in for Y_i,prim with a recorded caveat).
struct Outcomes {
  bool has_components = false;
  std::vector<double> edge_y;  // aligned with graph edges when has_components
  UnitOutcomes units;

  static Outcomes from_edge_outcomes(const BipartiteGraph& graph, std::vector<double> edge_y);
  static Outcomes from_unit_values(const BipartiteGraph& graph, std::vector<double> outcome_y,
                                   std::vector<double> treatment_y);
};

/// Loads an outcomes CSV: either edge-level (`outcome_id,treatment_id,y`,
/// covering every edge exactly once) or unit-level (`unit_id,y`, covering
/// every unit on both sides).
Outcomes load_outcomes(const BipartiteGraph& graph, const std::string& path);
Outcomes parse_outcomes(const BipartiteGraph& graph, const std::string& csv_text);

struct FeatureTable {
  Level level = Level::Outcome;
  Estimand estimand = Estimand::PTTE;
  std::vector<std::string> columns;
  size_t n_core = 0;  // columns[0..n_core) are exposure/network features, rest covariates
  Matrix X;
  std::vector<double> y;
  std::vector<uint32_t> units;  // population in stable (id-sorted) rank order
  Matrix x_full;                // full-deployment counterfactual feature points
  Matrix x_zero;                // zero-deployment counterfactual feature points
  std::vector<std::string> caveats;
};

/// Builds the per-level model-input table. The exposure table must have been
/// computed under the realized assignment that produced the outcomes.
FeatureTable build_feature_table(const BipartiteGraph& graph, const ExposureTable& exposures,
                                 const Outcomes& outcomes, Level level,
                                 double treatment_probability);

std::unique_ptr<ResponseModel> fit_response_model(const FeatureTable& table, ModelMethod method,
                                                  const MlConfig& config, uint64_t seed);

struct Interval {
  double lo = 0;
  double hi = 0;
  double confidence = 0.95;
  int B = 0;
  uint64_t seed = 0;
};

struct ProjectionInfo {
  Estimand estimand = Estimand::PTTE;
  uint64_t numerator = 0;    // |T_prim| or |T_sec|
  uint64_t denominator = 0;  // |O_prim| or |O_Both|
  double factor = 0;
  std::string source_level;
};

struct EffectEstimate {
  Estimand estimand = Estimand::PTTE;
  Level level = Level::Outcome;
  std::string method;
  double estimate = 0;
  std::optional<Interval> interval;
  uint64_t population = 0;
  std::vector<std::string> warnings;
  std::optional<ProjectionInfo> projection;
};

/// Predicts each unit at the full- and zero-deployment feature points and
/// averages the differences over the estimand population. Counterfactual
/// feature values outside the observed support attach an extrapolation
/// warning to the estimate.
EffectEstimate estimate_effect(const ResponseModel& model, const FeatureTable& table);

/// The interference-ignoring baseline: treatment level contrasts treated vs
/// control unit means over T_prim; outcome level contrasts majority-exposed
/// (E > 1/2) vs minority-exposed units over O_prim, ties E = 1/2 excluded.
EffectEstimate basic_estimate(const BipartiteGraph& graph, const AssignmentVector& z,
                              const Outcomes& outcomes, Level level);

nlohmann::ordered_json estimate_to_json(const EffectEstimate& estimate);
EffectEstimate estimate_from_json(const nlohmann::json& j);

}  // namespace blift
