#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "blift/common.hpp"
#include "blift/projection.hpp"
#include "blift/sim.hpp"
#include "helpers.hpp"

using namespace blift;

namespace {

// 600 outcome units, 300 primary units, each outcome wired to one primary
// (the spec's counts for the scaling example) plus one secondary unit so the
// STTE factor exists.
BipartiteGraph graph_600_300() {
  std::vector<TreatmentUnit> t;
  for (int j = 0; j < 300; ++j)
    t.push_back({"p" + std::to_string(1000 + j), Eligibility::Primary, {}});
  t.push_back({"s1000", Eligibility::Secondary, {}});
  std::vector<OutcomeUnit> o;
  std::vector<EdgeSpec> e;
  for (int i = 0; i < 600; ++i) {
    std::string oid = "o" + std::to_string(1000 + i);
    o.push_back({oid, {}});
    e.push_back({oid, "p" + std::to_string(1000 + i % 300), 1.0});
    e.push_back({oid, "s1000", 1.0});
  }
  return BipartiteGraph::build(std::move(t), std::move(o), e);
}

EffectEstimate treatment_estimate(double value, Estimand estimand = Estimand::PTTE) {
  EffectEstimate e;
  e.estimand = estimand;
  e.level = estimand == Estimand::PTTE ? Level::Treatment : Level::SecondaryTreatment;
  e.method = "krr";
  e.estimate = value;
  return e;
}

}  // namespace

TEST_CASE("projection scales by |T_prim| / |O_prim|") {
  auto g = graph_600_300();
  auto projected = project_effect(treatment_estimate(2.0), g, true);
  CHECK(projected.estimate == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(projected.level == Level::Outcome);
  CHECK(projected.method == "proj_krr");
  REQUIRE(projected.projection.has_value());
  CHECK(projected.projection->numerator == 300);
  CHECK(projected.projection->denominator == 600);
}

TEST_CASE("zero is scale-invariant under projection") {
  auto g = graph_600_300();
  auto projected = project_effect(treatment_estimate(0.0, Estimand::STTE), g, true);
  CHECK(projected.estimate == 0.0);
}

TEST_CASE("projection refuses to run without the edge-additivity assertion") {
  auto g = graph_600_300();
  CHECK_THROWS_WITH_AS(project_effect(treatment_estimate(1.0), g, false),
                       doctest::Contains("edge-additivity"), Error);
}

TEST_CASE("projection rejects outcome-level inputs and empty denominators") {
  auto g = graph_600_300();
  EffectEstimate wrong = treatment_estimate(1.0);
  wrong.level = Level::Outcome;
  CHECK_THROWS_AS(project_effect(wrong, g, true), Error);

  // A graph where no outcome touches a primary unit: PTTE factor undefined.
  std::vector<TreatmentUnit> t = {{"p1", Eligibility::Primary, {}},
                                  {"s1", Eligibility::Secondary, {}}};
  std::vector<OutcomeUnit> o = {{"o1", {}}};
  auto g2 = BipartiteGraph::build(std::move(t), std::move(o), {{"o1", "s1", 1.0}});
  CHECK_THROWS_WITH_AS(projection_factor(g2, Estimand::PTTE),
                       doctest::Contains("projection undefined"), Error);
}

TEST_CASE("projection is linear in the estimate") {
  auto g = graph_600_300();
  double a = 1.7, b = -0.4, x = 2.5, y = 0.9;
  double lhs = project_effect(treatment_estimate(a * x + b * y), g, true).estimate;
  double rhs = a * project_effect(treatment_estimate(x), g, true).estimate +
               b * project_effect(treatment_estimate(y), g, true).estimate;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("executable theorem: projection identity on random edge-additive tables") {
  // Any edge-additive outcome table satisfies the identity; the DGP is not
  // special. Random Y_ij at both deployment points, random graph shapes.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> value(-3.0, 3.0);
  for (int trial = 0; trial < 40; ++trial) {
    uint32_t n_out = 20 + static_cast<uint32_t>(rng() % 481);   // up to 500
    uint32_t n_prim = 2 + static_cast<uint32_t>(rng() % 30);
    uint32_t n_sec = 1 + static_cast<uint32_t>(rng() % 19);     // up to 50 total
    auto g = test::random_graph(n_out, n_prim, n_sec, 5, 3, rng());
    std::vector<double> y_full(g.n_edges()), y_zero(g.n_edges());
    for (size_t k = 0; k < g.n_edges(); ++k) {
      y_full[k] = value(rng);
      y_zero[k] = value(rng);
    }
    auto gt = effects_from_edge_outcomes(g, y_full, y_zero);
    if (!g.o_prim().empty()) {
      double factor = static_cast<double>(g.primary_units().size()) / g.o_prim().size();
      double rel = std::abs(gt.ptte_outcome - factor * gt.ptte_treatment) /
                   std::max(1e-300, std::abs(gt.ptte_outcome));
      CHECK(rel <= 1e-10);
    }
    if (!g.o_both().empty()) {
      double factor = static_cast<double>(g.secondary_units().size()) / g.o_both().size();
      double rel = std::abs(gt.stte_outcome - factor * gt.stte_treatment) /
                   std::max(1e-300, std::abs(gt.stte_outcome));
      CHECK(rel <= 1e-10);
    }
  }
}

TEST_CASE("projected intervals scale with the point estimate") {
  auto g = graph_600_300();
  EffectEstimate e = treatment_estimate(2.0);
  e.interval = Interval{1.0, 3.0, 0.95, 200, 7};
  auto projected = project_effect(e, g, true);
  REQUIRE(projected.interval.has_value());
  CHECK(projected.interval->lo == doctest::Approx(0.5));
  CHECK(projected.interval->hi == doctest::Approx(1.5));
}

TEST_CASE("widening the confidence never narrows the interval") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0, 1);
  BootstrapResult r;
  r.requested_B = 500;
  r.seed = 1;
  for (int i = 0; i < 500; ++i) r.replicates.push_back(noise(rng));
  double prev_width = -1;
  for (double conf : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    requantile(r, conf);
    double width = r.hi - r.lo;
    CHECK(width >= prev_width);
    prev_width = width;
  }
}
