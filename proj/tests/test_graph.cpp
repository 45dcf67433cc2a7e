#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "blift/common.hpp"
#include "blift/graph.hpp"
#include "helpers.hpp"

using namespace blift;

namespace {

const char* kUnitsCsv =
    "id,side,eligibility\n"
    "t1,treatment,primary\n"
    "t2,treatment,secondary\n"
    "o1,outcome,\n";

std::vector<uint32_t> ids_of(const BipartiteGraph& g, std::span<const uint32_t> ix) {
  return {ix.begin(), ix.end()};
}

}  // namespace

TEST_CASE("load_graph derives O_prim and O_Both from the edges") {
  auto g = parse_graph(kUnitsCsv,
                       "outcome_id,treatment_id,weight\n"
                       "o1,t1,1.0\n"
                       "o1,t2,1.0\n");
  CHECK(g.n_treatment() == 2);
  CHECK(g.n_outcome() == 1);
  REQUIRE(g.o_prim().size() == 1);
  REQUIRE(g.o_both().size() == 1);
  CHECK(g.o_prim()[0] == 0);
  CHECK(g.n_prim(0) == 1);
  CHECK(g.n_sec(0) == 1);
}

TEST_CASE("a graph with no edges has empty derived sets") {
  auto g = parse_graph("id,side,eligibility\nt1,treatment,primary\no1,outcome,\n",
                       "outcome_id,treatment_id,weight\n");
  CHECK(g.o_prim().empty());
  CHECK(g.o_both().empty());
  CHECK(g.n_edges() == 0);
}

TEST_CASE("malformed input is rejected, not repaired") {
  SUBCASE("duplicate edge") {
    CHECK_THROWS_WITH_AS(parse_graph(kUnitsCsv,
                                     "outcome_id,treatment_id,weight\n"
                                     "o1,t1,1.0\n"
                                     "o1,t1,1.0\n"),
                         doctest::Contains("duplicate edge"), Error);
  }
  SUBCASE("duplicate unit id") {
    CHECK_THROWS_WITH_AS(parse_graph("id,side,eligibility\n"
                                     "t1,treatment,primary\n"
                                     "t1,treatment,primary\n"
                                     "o1,outcome,\n",
                                     "outcome_id,treatment_id,weight\n"),
                         doctest::Contains("duplicate treatment unit id"), Error);
  }
  SUBCASE("unknown endpoint") {
    CHECK_THROWS_WITH_AS(parse_graph(kUnitsCsv,
                                     "outcome_id,treatment_id,weight\no1,tX,1.0\n"),
                         doctest::Contains("unknown treatment unit"), Error);
  }
  SUBCASE("negative weight") {
    CHECK_THROWS_WITH_AS(parse_graph(kUnitsCsv,
                                     "outcome_id,treatment_id,weight\no1,t1,-0.5\n"),
                         doctest::Contains("negative weight"), Error);
  }
  SUBCASE("zero weight") {
    CHECK_THROWS_AS(parse_graph(kUnitsCsv, "outcome_id,treatment_id,weight\no1,t1,0\n"),
                    Error);
  }
  SUBCASE("empty treatment side") {
    CHECK_THROWS_WITH_AS(parse_graph("id,side,eligibility\no1,outcome,\n",
                                     "outcome_id,treatment_id,weight\n"),
                         doctest::Contains("empty treatment side"), Error);
  }
  SUBCASE("outcome row with eligibility set") {
    CHECK_THROWS_AS(parse_graph("id,side,eligibility\n"
                                "t1,treatment,primary\n"
                                "o1,outcome,primary\n",
                                "outcome_id,treatment_id,weight\n"),
                    Error);
  }
}

TEST_CASE("derive_index_sets counts neighbors per side") {
  auto g = test::small_graph();
  auto d = derive_index_sets(g);
  int o1 = g.find_outcome("o1");
  int o3 = g.find_outcome("o3");
  REQUIRE(o1 >= 0);
  CHECK(d.n_prim[o1] == 2);
  CHECK(d.n_sec[o1] == 1);
  // t1 connects to o1 and o2
  int t1 = g.find_treatment("t1");
  CHECK(d.connected_outcomes[t1].size() == 2);
  // o3 touches only the secondary unit: excluded from both sets
  CHECK(!g.in_o_prim(o3));
  CHECK(!g.in_o_both(o3));
  CHECK(g.o_prim().size() == 2);
  CHECK(g.o_both().size() == 1);
}

TEST_CASE("derived sets are identical under shuffled edge order") {
  std::mt19937_64 rng(7);
  std::vector<EdgeSpec> edges = {
      {"o1", "t1", 1.0}, {"o1", "t2", 1.0}, {"o1", "t3", 1.0},
      {"o2", "t1", 1.0}, {"o3", "t3", 1.0},
  };
  auto build = [&](const std::vector<EdgeSpec>& e) {
    std::vector<TreatmentUnit> t = {{"t1", Eligibility::Primary, {}},
                                    {"t2", Eligibility::Primary, {}},
                                    {"t3", Eligibility::Secondary, {}}};
    std::vector<OutcomeUnit> o = {{"o1", {}}, {"o2", {}}, {"o3", {}}};
    return BipartiteGraph::build(std::move(t), std::move(o), e);
  };
  auto reference = derive_index_sets(build(edges));
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(edges.begin(), edges.end(), rng);
    auto d = derive_index_sets(build(edges));
    CHECK(d.o_prim == reference.o_prim);
    CHECK(d.o_both == reference.o_both);
    CHECK(d.n_prim == reference.n_prim);
    CHECK(d.n_sec == reference.n_sec);
    CHECK(d.primary_neighbors == reference.primary_neighbors);
    CHECK(d.connected_outcomes == reference.connected_outcomes);
  }
}

TEST_CASE("for primary units, connected outcomes lie inside O_prim") {
  for (uint64_t seed : {11u, 12u, 13u, 14u}) {
    auto g = test::random_graph(60, 8, 5, 4, 2, seed);
    for (uint32_t j : g.primary_units()) {
      for (uint32_t i : g.connected_outcomes(j)) CHECK(g.in_o_prim(i));
    }
  }
}

TEST_CASE("canonical JSON round-trips through load") {
  auto g = test::small_graph();
  std::string once = graph_to_canonical_json(g);
  // Rebuild from a shuffled unit order and differently ordered edges.
  std::vector<TreatmentUnit> t = {{"t3", Eligibility::Secondary, {}},
                                  {"t2", Eligibility::Primary, {}},
                                  {"t1", Eligibility::Primary, {}}};
  std::vector<OutcomeUnit> o = {{"o3", {}}, {"o1", {}}, {"o2", {}}};
  std::vector<EdgeSpec> e = {
      {"o3", "t3", 1.0}, {"o2", "t1", 1.0}, {"o1", "t3", 1.0},
      {"o1", "t2", 1.0}, {"o1", "t1", 1.0},
  };
  auto g2 = BipartiteGraph::build(std::move(t), std::move(o), e);
  CHECK(graph_to_canonical_json(g2) == once);
}

TEST_CASE("assignment validation") {
  auto g = test::small_graph();
  SUBCASE("all zeros is Z0") {
    auto z = AssignmentVector::zeros(g);
    for (uint32_t j = 0; j < g.n_treatment(); ++j) CHECK(z[j] == 0);
  }
  SUBCASE("Z1 treats every primary unit and no secondary unit") {
    auto z = AssignmentVector::full(g);
    for (uint32_t j : g.primary_units()) CHECK(z[j] == 1);
    for (uint32_t j : g.secondary_units()) CHECK(z[j] == 0);
  }
  SUBCASE("nonzero assignment on a secondary unit is rejected") {
    CHECK_THROWS_WITH_AS(
        parse_assignment(g, "treatment_id,z\nt1,1\nt2,0\nt3,1\n"),
        doctest::Contains("secondary"), Error);
  }
  SUBCASE("missing unit is rejected") {
    CHECK_THROWS_WITH_AS(parse_assignment(g, "treatment_id,z\nt1,1\nt2,0\n"),
                         doctest::Contains("missing"), Error);
  }
  SUBCASE("unknown unit is rejected") {
    CHECK_THROWS_AS(parse_assignment(g, "treatment_id,z\nt1,1\nt2,0\nt3,0\ntX,0\n"), Error);
  }
  SUBCASE("duplicate row is rejected") {
    CHECK_THROWS_AS(parse_assignment(g, "treatment_id,z\nt1,1\nt1,0\nt2,0\nt3,0\n"), Error);
  }
  SUBCASE("values outside {0,1} are rejected") {
    CHECK_THROWS_AS(parse_assignment(g, "treatment_id,z\nt1,2\nt2,0\nt3,0\n"), Error);
  }
}

TEST_CASE("covariates parse as all-blank or all-filled") {
  auto g = parse_graph(
      "id,side,eligibility,age,size\n"
      "t1,treatment,primary,1.5,2.5\n"
      "o1,outcome,,,\n",
      "outcome_id,treatment_id,weight\no1,t1,1.0\n");
  CHECK(g.treatment_covariate_names() == std::vector<std::string>{"age", "size"});
  CHECK(g.treatment_unit(0).covariates == std::vector<double>{1.5, 2.5});
  CHECK(g.outcome_unit(0).covariates.empty());

  CHECK_THROWS_WITH_AS(parse_graph("id,side,eligibility,age,size\n"
                                   "t1,treatment,primary,1.5,\n"
                                   "o1,outcome,,,\n",
                                   "outcome_id,treatment_id,weight\n"),
                       doctest::Contains("all blank or all filled"), Error);
}
