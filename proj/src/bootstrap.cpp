#include <algorithm>
#include <cmath>

#include "blift/common.hpp"
#include "blift/projection.hpp"
#include "blift/rng.hpp"

// Resample-and-refit procedures behind bootstrap_effect_ci. The resampling
// unit is always a treatment-side unit of the estimand population (T_prim for
// PTTE, T_sec for STTE). Treatment-level replicates duplicate feature rows by
// multiplicity; outcome-level replicates rebuild rows on the induced
// multigraph: neighbor counts, exposures, the GPS and the targets are all
// recomputed with resampled multiplicities.

namespace blift {

namespace {

// Treatment-level refit: rows of the observed table repeated by multiplicity.
double refit_treatment_rows(const FeatureTable& observed, ModelMethod method,
                            const MlConfig& config, uint64_t fit_seed,
                            std::span<const uint32_t> sample) {
  const size_t ncol = observed.columns.size();
  FeatureTable t;
  t.level = observed.level;
  t.estimand = observed.estimand;
  t.columns = observed.columns;
  t.n_core = observed.n_core;
  t.X = Matrix::zeros(sample.size(), ncol);
  t.x_full = Matrix::zeros(sample.size(), ncol);
  t.x_zero = Matrix::zeros(sample.size(), ncol);
  t.y.resize(sample.size());
  t.units.resize(sample.size());
  for (size_t r = 0; r < sample.size(); ++r) {
    uint32_t src = sample[r];
    std::copy_n(observed.X.row(src), ncol, t.X.data.begin() + r * ncol);
    std::copy_n(observed.x_full.row(src), ncol, t.x_full.data.begin() + r * ncol);
    std::copy_n(observed.x_zero.row(src), ncol, t.x_zero.data.begin() + r * ncol);
    t.y[r] = observed.y[src];
    t.units[r] = observed.units[src];
  }
  auto model = fit_response_model(t, method, config, fit_seed);
  return estimate_effect(*model, t).estimate;
}

// Outcome-level PTTE refit on the induced multigraph after resampling T_prim.
double refit_outcome_induced(const BipartiteGraph& graph, const Outcomes& outcomes,
                             double p, ModelMethod method, const MlConfig& config,
                             uint64_t fit_seed, const std::vector<uint8_t>& z,
                             std::span<const uint32_t> sample) {
  auto prim = graph.primary_units();
  std::vector<uint32_t> mult(graph.n_treatment(), 0);
  for (uint32_t s : sample) ++mult[prim[s]];

  FeatureTable t;
  t.level = Level::Outcome;
  t.estimand = Estimand::PTTE;
  t.columns = {"E", "gps", "n_prim"};
  t.n_core = 3;
  std::vector<double> rows, full, zero;
  for (uint32_t i : graph.o_prim()) {
    uint64_t n = 0, k = 0;
    double y = 0;
    for (uint32_t e : graph.outcome_edges(i)) {
      uint32_t j = graph.edges()[e].treatment;
      if (mult[j] == 0) continue;
      if (graph.treatment_unit(j).eligibility != Eligibility::Primary) continue;
      n += mult[j];
      if (z[j]) k += mult[j];
      y += mult[j] * outcomes.edge_y[e];
    }
    if (n == 0) continue;  // not incident to any resampled unit
    double e_obs = static_cast<double>(k) / static_cast<double>(n);
    uint32_t nn = static_cast<uint32_t>(n);
    t.units.push_back(i);
    t.y.push_back(y);
    rows.insert(rows.end(), {e_obs, gps_binomial(e_obs, nn, p), static_cast<double>(n)});
    full.insert(full.end(), {1.0, gps_binomial(1.0, nn, p), static_cast<double>(n)});
    zero.insert(zero.end(), {0.0, gps_binomial(0.0, nn, p), static_cast<double>(n)});
  }
  if (t.units.empty()) fail(ErrorCode::Estimation, "bootstrap replicate has no induced outcomes");
  size_t nrows = t.units.size();
  t.X = Matrix{nrows, 3, std::move(rows)};
  t.x_full = Matrix{nrows, 3, std::move(full)};
  t.x_zero = Matrix{nrows, 3, std::move(zero)};
  auto model = fit_response_model(t, method, config, fit_seed);
  return estimate_effect(*model, t).estimate;
}

// Secondary-outcome STTE refit after resampling T_sec: the secondary
// neighbor counts and targets are multiplicity-weighted; primary-side
// exposure features are untouched by the resample.
double refit_secondary_outcome_induced(const BipartiteGraph& graph, const Outcomes& outcomes,
                                       const ExposureTable& exposures, ModelMethod method,
                                       const MlConfig& config, uint64_t fit_seed,
                                       std::span<const uint32_t> sample) {
  auto sec = graph.secondary_units();
  std::vector<uint32_t> mult(graph.n_treatment(), 0);
  for (uint32_t s : sample) ++mult[sec[s]];
  const double p = exposures.treatment_probability;

  std::vector<const OutcomeExposure*> by_unit(graph.n_outcome(), nullptr);
  for (const auto& r : exposures.outcomes) by_unit[r.unit] = &r;

  FeatureTable t;
  t.level = Level::SecondaryOutcome;
  t.estimand = Estimand::STTE;
  t.columns = {"E", "gps", "n_prim", "n_sec"};
  t.n_core = 4;
  std::vector<double> rows, full, zero;
  for (uint32_t i : graph.o_both()) {
    uint64_t nsec = 0;
    double y = 0;
    for (uint32_t e : graph.outcome_edges(i)) {
      uint32_t j = graph.edges()[e].treatment;
      if (graph.treatment_unit(j).eligibility != Eligibility::Secondary || mult[j] == 0) continue;
      nsec += mult[j];
      y += mult[j] * outcomes.edge_y[e];
    }
    if (nsec == 0) continue;
    const OutcomeExposure* r = by_unit[i];
    t.units.push_back(i);
    t.y.push_back(y);
    double n_prim = static_cast<double>(r->n_prim);
    rows.insert(rows.end(), {r->exposure(), r->gps, n_prim, static_cast<double>(nsec)});
    full.insert(full.end(),
                {1.0, gps_binomial(1.0, r->n_prim, p), n_prim, static_cast<double>(nsec)});
    zero.insert(zero.end(),
                {0.0, gps_binomial(0.0, r->n_prim, p), n_prim, static_cast<double>(nsec)});
  }
  if (t.units.empty()) fail(ErrorCode::Estimation, "bootstrap replicate has no induced outcomes");
  size_t nrows = t.units.size();
  t.X = Matrix{nrows, 4, std::move(rows)};
  t.x_full = Matrix{nrows, 4, std::move(full)};
  t.x_zero = Matrix{nrows, 4, std::move(zero)};
  auto model = fit_response_model(t, method, config, fit_seed);
  return estimate_effect(*model, t).estimate;
}

}  // namespace

BootstrapResult bootstrap_effect_ci(const BipartiteGraph& graph, const ExposureTable& exposures,
                                    const Outcomes& outcomes, Level level, ModelMethod method,
                                    const MlConfig& config, int B, double confidence,
                                    uint64_t seed, int jobs) {
  const Estimand estimand = estimand_for_level(level);
  const uint32_t pop = estimand == Estimand::PTTE
                           ? static_cast<uint32_t>(graph.primary_units().size())
                           : static_cast<uint32_t>(graph.secondary_units().size());
  const uint64_t fit_seed = derive_seed(seed, Stream::Estimator);

  if (level == Level::Treatment || level == Level::SecondaryTreatment) {
    FeatureTable observed = build_feature_table(graph, exposures, outcomes, level,
                                                exposures.treatment_probability);
    auto refit = [&](std::span<const uint32_t> sample) {
      return refit_treatment_rows(observed, method, config, fit_seed, sample);
    };
    return bootstrap_ci(refit, pop, B, confidence, seed, jobs);
  }

  if (!outcomes.has_components)
    fail(ErrorCode::Validation,
         "outcome-level bootstrap rebuilds targets on the induced multigraph and requires "
         "edge-level outcomes; use a projected treatment-level interval instead");

  if (level == Level::Outcome) {
    std::vector<uint8_t> z = exposures.assignment;
    auto refit = [&, z](std::span<const uint32_t> sample) {
      return refit_outcome_induced(graph, outcomes, exposures.treatment_probability, method,
                                   config, fit_seed, z, sample);
    };
    return bootstrap_ci(refit, pop, B, confidence, seed, jobs);
  }
  auto refit = [&](std::span<const uint32_t> sample) {
    return refit_secondary_outcome_induced(graph, outcomes, exposures, method, config, fit_seed,
                                           sample);
  };
  return bootstrap_ci(refit, pop, B, confidence, seed, jobs);
}

}  // namespace blift
