#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blift/estimators.hpp"
#include "blift/graph.hpp"

namespace blift {

/// The exact population-count ratio linking treatment- and outcome-level
/// total effects under edge additivity: |T_prim|/|O_prim| for PTTE,
/// |T_sec|/|O_Both| for STTE. Counts always come from the graph's derived
/// sets, never from the caller.
ProjectionInfo projection_factor(const BipartiteGraph& graph, Estimand estimand);

/// Rescales a treatment-level estimate to the outcome level. Refuses to run
/// unless the caller asserts edge additivity (the projection is invalid for
/// non-additive metrics). Intervals, when present, are scaled by the same
/// positive factor.
EffectEstimate project_effect(const EffectEstimate& estimate, const BipartiteGraph& graph,
                              bool assume_edge_additivity);

struct BootstrapResult {
  std::vector<double> replicates;  // in replicate-index order; failures skipped
  int requested_B = 0;
  int failures = 0;
  double confidence = 0.95;
  uint64_t seed = 0;
  double lo = 0;
  double hi = 0;
};

/// Percentile bootstrap over treatment-side units of the estimand population.
/// `refit` receives a resampled multiset as indices into the population's
/// stable rank order (0..population_size-1) and returns the re-estimated
/// effect. Replicates run with independent RNG streams keyed by (seed,
/// replicate index); failures are tolerated up to 20% of B.
BootstrapResult bootstrap_ci(const std::function<double(std::span<const uint32_t>)>& refit,
                             uint32_t population_size, int B, double confidence, uint64_t seed,
                             int jobs = 1);

/// Quantiles recomputed from an existing replicate set at a new confidence.
void requantile(BootstrapResult& result, double confidence);

/// Projection applied to every bootstrap replicate, quantiles recomputed at
/// the target level.
BootstrapResult project_replicates(const BootstrapResult& result, const ProjectionInfo& factor);

double bootstrap_std_error(const BootstrapResult& result);

nlohmann::ordered_json bootstrap_to_json(const BootstrapResult& result);

/// Resample-and-refit procedures for the standard estimands. PTTE resamples
/// T_prim, STTE resamples T_sec; outcome-level replicates are rebuilt on the
/// induced multigraph (multiplicity-weighted neighbor counts, exposures and
/// targets), which requires edge-level outcomes.
BootstrapResult bootstrap_effect_ci(const BipartiteGraph& graph, const ExposureTable& exposures,
                                    const Outcomes& outcomes, Level level, ModelMethod method,
                                    const MlConfig& config, int B, double confidence,
                                    uint64_t seed, int jobs = 1);

}  // namespace blift
