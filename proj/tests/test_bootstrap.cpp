#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "blift/common.hpp"
#include "blift/projection.hpp"
#include "blift/rng.hpp"
#include "blift/sim.hpp"
#include "helpers.hpp"

using namespace blift;

namespace {

// Small simulated experiment shared by the resample-refit tests.
struct Fixture {
  BipartiteGraph graph;
  ExposureTable exposures;
  Outcomes outcomes;
  GroundTruth gt;

  static Fixture make(uint64_t seed, const DgpConfig& config = DgpConfig{}) {
    ScenarioSpec spec = scenario_by_id(1);
    spec.n_outcome = 600;
    spec.n_primary = 30;
    spec.n_secondary = 20;
    auto graph = generate_graph(spec, seed);
    auto params = draw_dgp_params(config, graph, derive_seed(seed, Stream::DgpParams));
    auto gt = ground_truth_effects(graph, params);
    auto z = AssignmentVector::bernoulli(graph, 0.5, derive_seed(seed, Stream::Assignment));
    auto edge_y = simulate_outcomes(graph, params, z, derive_seed(seed, Stream::Noise));
    auto outcomes = Outcomes::from_edge_outcomes(graph, std::move(edge_y));
    auto exposures = compute_exposures(graph, z, 0.5);
    return {std::move(graph), std::move(exposures), std::move(outcomes), gt};
  }
};

MlConfig small_ml() {
  MlConfig ml;
  ml.krr.cv_subsample = 200;
  ml.krr.max_train = 400;
  ml.gbt.rounds = 60;
  return ml;
}

}  // namespace

TEST_CASE("zero-variance data collapses the interval to a point") {
  auto refit = [](std::span<const uint32_t>) { return 1.25; };
  auto result = bootstrap_ci(refit, 20, 100, 0.95, 3);
  CHECK(result.lo == 1.25);
  CHECK(result.hi == 1.25);
  CHECK(result.replicates.size() == 100);
}

TEST_CASE("same seed and B give an identical interval") {
  auto refit = [](std::span<const uint32_t> sample) {
    double mean = 0;
    for (uint32_t s : sample) mean += static_cast<double>(s);
    return mean / sample.size();
  };
  auto a = bootstrap_ci(refit, 50, 200, 0.95, 42);
  auto b = bootstrap_ci(refit, 50, 200, 0.95, 42);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.replicates == b.replicates);
  // Parallel execution must not change the replicate sequence.
  auto c = bootstrap_ci(refit, 50, 200, 0.95, 42, 4);
  CHECK(c.replicates == a.replicates);
}

TEST_CASE("failure rate above 20% aborts with diagnostics") {
  int calls = 0;
  auto refit = [&](std::span<const uint32_t>) -> double {
    if (++calls % 3 == 0) throw std::runtime_error("synthetic failure");
    return 1.0;
  };
  CHECK_THROWS_WITH_AS(bootstrap_ci(refit, 10, 90, 0.95, 1),
                       doctest::Contains("bootstrap aborted"), Error);

  calls = 0;
  auto rare = [&](std::span<const uint32_t>) -> double {
    if (++calls % 10 == 0) throw std::runtime_error("synthetic failure");
    return 1.0;
  };
  auto result = bootstrap_ci(rare, 10, 100, 0.95, 1);
  CHECK(result.failures == 10);
  CHECK(result.replicates.size() == 90);
}

TEST_CASE("bootstrap parameter validation") {
  auto refit = [](std::span<const uint32_t>) { return 0.0; };
  CHECK_THROWS_AS(bootstrap_ci(refit, 10, 1, 0.95, 1), Error);
  CHECK_THROWS_AS(bootstrap_ci(refit, 10, 10, 1.0, 1), Error);
  CHECK_THROWS_AS(bootstrap_ci(refit, 0, 10, 0.95, 1), Error);
}

TEST_CASE("treatment-level bootstrap interval brackets the ground truth") {
  auto fx = Fixture::make(12);
  auto result = bootstrap_effect_ci(fx.graph, fx.exposures, fx.outcomes, Level::Treatment,
                                    ModelMethod::KRR, small_ml(), 80, 0.95, 5);
  CHECK(result.replicates.size() == 80);
  CHECK(result.lo < result.hi);
  // Generous sanity band: the interval sits in the right order of magnitude.
  CHECK(result.lo < fx.gt.ptte_treatment * 1.5);
  CHECK(result.hi > fx.gt.ptte_treatment * 0.5);
}

TEST_CASE("projected replicates give the outcome-level interval") {
  auto fx = Fixture::make(13);
  auto boot = bootstrap_effect_ci(fx.graph, fx.exposures, fx.outcomes, Level::Treatment,
                                  ModelMethod::KRR, small_ml(), 60, 0.9, 7);
  auto factor = projection_factor(fx.graph, Estimand::PTTE);
  auto projected = project_replicates(boot, factor);
  CHECK(projected.lo == doctest::Approx(boot.lo * factor.factor));
  CHECK(projected.hi == doctest::Approx(boot.hi * factor.factor));
}

TEST_CASE("induced-multigraph outcome bootstrap runs and is deterministic") {
  auto fx = Fixture::make(14);
  MlConfig ml = small_ml();
  auto a = bootstrap_effect_ci(fx.graph, fx.exposures, fx.outcomes, Level::Outcome,
                               ModelMethod::LP, ml, 40, 0.95, 21);
  auto b = bootstrap_effect_ci(fx.graph, fx.exposures, fx.outcomes, Level::Outcome,
                               ModelMethod::LP, ml, 40, 0.95, 21);
  CHECK(a.replicates == b.replicates);
  CHECK(a.lo < a.hi);
  CHECK(a.lo < fx.gt.ptte_outcome * 1.5);
  CHECK(a.hi > fx.gt.ptte_outcome * 0.3);
}

TEST_CASE("outcome-level bootstrap without edge outcomes is refused") {
  auto fx = Fixture::make(15);
  Outcomes unit_only = Outcomes::from_unit_values(fx.graph, fx.outcomes.units.y_outcome,
                                                  fx.outcomes.units.y_treatment);
  CHECK_THROWS_WITH_AS(
      bootstrap_effect_ci(fx.graph, fx.exposures, unit_only, Level::Outcome, ModelMethod::LP,
                          small_ml(), 20, 0.95, 1),
      doctest::Contains("edge-level"), Error);
}

TEST_CASE("bootstrap is keyed by stable unit rank, not input order") {
  // The same experiment assembled from differently ordered input rows must
  // produce the same interval for the same seed.
  std::vector<TreatmentUnit> t;
  for (int j = 0; j < 12; ++j)
    t.push_back({"p" + std::to_string(100 + j), Eligibility::Primary, {}});
  t.push_back({"s100", Eligibility::Secondary, {}});
  std::vector<OutcomeUnit> o;
  std::vector<EdgeSpec> e;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 80; ++i) {
    std::string oid = "o" + std::to_string(100 + i);
    o.push_back({oid, {}});
    int a = static_cast<int>(rng() % 12);
    int b = (a + 1 + static_cast<int>(rng() % 11)) % 12;
    e.push_back({oid, "p" + std::to_string(100 + a), 1.0});
    e.push_back({oid, "p" + std::to_string(100 + b), 1.0});
    e.push_back({oid, "s100", 1.0});
  }
  auto shuffled_t = t;
  auto shuffled_o = o;
  auto shuffled_e = e;
  std::shuffle(shuffled_t.begin(), shuffled_t.end(), rng);
  std::shuffle(shuffled_o.begin(), shuffled_o.end(), rng);
  std::shuffle(shuffled_e.begin(), shuffled_e.end(), rng);
  auto g1 = BipartiteGraph::build(t, o, e);
  auto g2 = BipartiteGraph::build(shuffled_t, shuffled_o, shuffled_e);

  auto run = [&](const BipartiteGraph& g) {
    auto z = AssignmentVector::bernoulli(g, 0.5, 33);
    std::vector<double> edge_y(g.n_edges());
    // Deterministic edge outcomes from stable ids so both graphs agree.
    size_t k = 0;
    for (const auto& edge : g.edges()) {
      const auto& oid = g.outcome_unit(edge.outcome).id;
      const auto& tid = g.treatment_unit(edge.treatment).id;
      edge_y[k++] = 0.01 * ((oid[2] - '0') * 7 + (tid[2] - '0') * 3) + (z[edge.treatment] ? 0.5 : 0.0);
    }
    auto outcomes = Outcomes::from_edge_outcomes(g, edge_y);
    auto exposures = compute_exposures(g, z, 0.5);
    return bootstrap_effect_ci(g, exposures, outcomes, Level::Treatment, ModelMethod::KRR,
                               small_ml(), 50, 0.95, 77);
  };
  auto r1 = run(g1);
  auto r2 = run(g2);
  CHECK(r1.replicates == r2.replicates);
  CHECK(r1.lo == r2.lo);
  CHECK(r1.hi == r2.hi);
}

TEST_CASE("no-spillover null: STTE estimates sit within 3 bootstrap SEs of zero") {
  DgpConfig config;
  config.beta_pattern_name = "no_cross_spillover";
  auto fx = Fixture::make(16, config);
  REQUIRE(fx.gt.stte_outcome == 0.0);

  MlConfig ml = small_ml();
  auto table = build_feature_table(fx.graph, fx.exposures, fx.outcomes,
                                   Level::SecondaryTreatment, 0.5);
  auto model = fit_response_model(table, ModelMethod::KRR, ml, 3);
  double est_treatment = estimate_effect(*model, table).estimate;
  auto boot = bootstrap_effect_ci(fx.graph, fx.exposures, fx.outcomes,
                                  Level::SecondaryTreatment, ModelMethod::KRR, ml, 80, 0.95, 5);
  double se = bootstrap_std_error(boot);
  CHECK(std::abs(est_treatment) < 3 * se + 1e-9);

  // Outcome level via the projected replicates.
  auto factor = projection_factor(fx.graph, Estimand::STTE);
  double est_outcome = est_treatment * factor.factor;
  double se_outcome = se * factor.factor;
  CHECK(std::abs(est_outcome) < 3 * se_outcome + 1e-9);
}

TEST_CASE("bootstrap JSON carries the full replicate sequence") {
  auto refit = [](std::span<const uint32_t> sample) {
    return static_cast<double>(sample[0]);
  };
  auto result = bootstrap_ci(refit, 10, 25, 0.9, 11);
  auto j = bootstrap_to_json(result);
  CHECK(j["B"] == 25);
  CHECK(j["replicates"].size() == 25);
  CHECK(j["interval"].contains("lo"));
}
