#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "blift/common.hpp"
#include "blift/csv.hpp"
#include "blift/estimators.hpp"
#include "blift/pipeline.hpp"
#include "blift/report.hpp"
#include "blift/rng.hpp"
#include "blift/sim.hpp"
#include "helpers.hpp"

using namespace blift;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("blift_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

nlohmann::json tiny_simulate_config(const std::string& out_dir, uint64_t seed = 5) {
  nlohmann::json config;
  config["seed"] = seed;
  config["out_dir"] = out_dir;
  config["jobs"] = 2;
  config["simulate"] = {
      {"scenarios", {1, 3}},
      {"replications", 3},
      {"counts", {{"outcome", 300}, {"primary", 20}, {"secondary", 14}}},
      {"estimators", {"basic", "lp", "gbt"}},
      {"gbt", {{"rounds", 40}}},
  };
  return config;
}

}  // namespace

TEST_CASE("overlap diagnostic: rich support is not flagged") {
  ScenarioSpec spec = scenario_by_id(3);  // n = 8, p = 0.5
  spec.n_outcome = 2000;
  spec.n_primary = 40;
  spec.n_secondary = 20;
  auto g = generate_graph(spec, 3);
  auto z = AssignmentVector::bernoulli(g, 0.5, 4);
  auto exposures = compute_exposures(g, z, 0.5);
  auto report = diagnose_overlap(exposures);
  REQUIRE(!report.strata.empty());
  for (const auto& s : report.strata) {
    CHECK(s.observed_levels >= 3);
    CHECK(!s.flagged);
  }
  CHECK(!report.any_flagged);
}

TEST_CASE("overlap diagnostic: degenerate assignment flags every stratum") {
  ScenarioSpec spec = scenario_by_id(1);
  spec.n_outcome = 500;
  spec.n_primary = 25;
  spec.n_secondary = 10;
  auto g = generate_graph(spec, 6);
  auto z1 = AssignmentVector::full(g);
  auto report = diagnose_overlap(compute_exposures(g, z1, 0.5));
  REQUIRE(!report.strata.empty());
  for (const auto& s : report.strata) {
    CHECK(s.observed_levels == 1);
    CHECK(s.flagged);
  }
  CHECK(report.any_flagged);
  CHECK(!report.warnings().empty());
}

TEST_CASE("overlap diagnostic: one-unit stratum carries the small-sample marker") {
  // o1 is the only outcome with n_prim = 2; o2 has n_prim = 1.
  auto g = test::small_graph();
  auto z = AssignmentVector::from_pairs(g, {{"t1", 1}, {"t2", 0}, {"t3", 0}}, "t");
  auto report = diagnose_overlap(compute_exposures(g, z, 0.5));
  for (const auto& s : report.strata) {
    CHECK(s.units == 1);
    CHECK(s.flagged);
    CHECK(s.small_sample);
  }
}

TEST_CASE("emit_report: degenerate distribution collapses to a point") {
  std::map<int, std::vector<ReplicationRow>> records;
  for (int r = 0; r < 50; ++r) {
    ReplicationRow row;
    row.replicate = r;
    row.estimand = "ptte";
    row.level = "outcome";
    row.method = "krr";
    row.estimate = 1.46;
    row.ground_truth = 1.46;
    records[1].push_back(row);
  }
  auto bundle = emit_report(records);
  REQUIRE(bundle.ptte_outcome.size() == 1);
  CHECK(bundle.ptte_outcome[0].cells.at("krr") == doctest::Approx(1.46));
  REQUIRE(bundle.boxplots.size() == 1);
  CHECK(bundle.boxplots[0].min == doctest::Approx(1.46));
  CHECK(bundle.boxplots[0].max == doctest::Approx(1.46));
  CHECK(bundle.boxplots[0].n_outliers == 0);
}

TEST_CASE("emit_report: one table row per provided scenario") {
  std::map<int, std::vector<ReplicationRow>> records;
  for (int spec : {1, 3}) {
    ReplicationRow row;
    row.replicate = 0;
    row.estimand = "ptte";
    row.level = "outcome";
    row.method = "basic";
    row.estimate = 0.4;
    row.ground_truth = 0.5;
    records[spec].push_back(row);
  }
  auto bundle = emit_report(records);
  CHECK(bundle.ptte_outcome.size() == 2);
  CHECK(bundle.ptte_outcome[0].spec_id == 1);
  CHECK(bundle.ptte_outcome[1].spec_id == 3);
  // singleton median equals the single estimate
  CHECK(bundle.ptte_outcome[0].cells.at("basic") == doctest::Approx(0.4));
}

TEST_CASE("report GT column equals the simulator's ground truth recomputed") {
  ScenarioSpec spec = scenario_by_id(1);
  spec.n_outcome = 300;
  spec.n_primary = 20;
  spec.n_secondary = 14;
  spec.replications = 3;
  spec.base_seed = 77;
  ReplicationOptions options;
  options.estimators = {"basic"};
  auto records = run_replications(spec, DgpConfig{}, options);

  // Oracle: recompute each replicate's ground truth from the same streams.
  std::vector<double> gts;
  for (int r = 0; r < spec.replications; ++r) {
    auto g = generate_graph(spec, derive_seed(spec.base_seed, Stream::Graph, r));
    auto params = draw_dgp_params(DgpConfig{}, g, derive_seed(spec.base_seed, Stream::DgpParams, r));
    gts.push_back(ground_truth_effects(g, params).ptte_outcome);
  }
  std::sort(gts.begin(), gts.end());
  double expected_median = gts[gts.size() / 2];

  std::map<int, std::vector<ReplicationRow>> by_spec;
  for (const auto& rec : records)
    for (const auto& row : rec.rows) by_spec[1].push_back(row);
  auto bundle = emit_report(by_spec);
  CHECK(bundle.ptte_outcome[0].cells.at("gt") == doctest::Approx(expected_median).epsilon(1e-12));
}

TEST_CASE("rendered medians are recomputable from the replication CSV") {
  auto dir = temp_dir("medians");
  auto config = tiny_simulate_config(dir.string());
  run_command("simulate", config);
  auto rows = read_replication_csv((dir / "replications_spec1.csv").string());
  REQUIRE(!rows.empty());

  std::vector<double> basics;
  for (const auto& row : rows)
    if (row.estimand == "ptte" && row.level == "outcome" && row.method == "basic")
      basics.push_back(row.estimate);
  REQUIRE(basics.size() == 3);
  std::sort(basics.begin(), basics.end());
  double expected = basics[1];

  nlohmann::json report_config;
  report_config["out_dir"] = (dir / "report").string();
  report_config["report"] = {{"dir", dir.string()}};
  run_command("report", report_config);
  auto table = csv::read_file((dir / "report" / "ptte_outcome_table.csv").string());
  int col = table.column("basic");
  REQUIRE(col >= 0);
  CHECK(csv::parse_double(table.rows[0][col], "basic") == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("simulate + report are byte-identical across runs (golden stability)") {
  auto dir1 = temp_dir("golden1");
  auto dir2 = temp_dir("golden2");
  for (const auto& dir : {dir1, dir2}) {
    auto config = tiny_simulate_config(dir.string(), 11);
    run_command("simulate", config);
    nlohmann::json rc;
    rc["out_dir"] = (dir / "rep").string();
    rc["report"] = {{"dir", dir.string()}};
    run_command("report", rc);
  }
  for (const char* name : {"replications_spec1.csv", "replications_spec3.csv"})
    CHECK(slurp((dir1 / name).string()) == slurp((dir2 / name).string()));
  for (const char* name : {"ptte_outcome_table.csv", "ptte_treatment_table.csv",
                           "stte_table.csv", "boxplot_summary.csv", "report.json"})
    CHECK(slurp((dir1 / "rep" / name).string()) == slurp((dir2 / "rep" / name).string()));
}

TEST_CASE("re-running from the manifest alone reproduces the artifacts") {
  auto dir = temp_dir("manifest");
  auto config = tiny_simulate_config(dir.string(), 19);
  run_command("simulate", config);
  std::string first = slurp((dir / "replications_spec1.csv").string());

  auto manifest = nlohmann::json::parse(slurp((dir / "manifest.json").string()));
  std::filesystem::remove(dir / "replications_spec1.csv");
  run_command("simulate", manifest);  // manifest accepted in place of a config
  CHECK(slurp((dir / "replications_spec1.csv").string()) == first);
}

TEST_CASE("config validation names the offending field") {
  nlohmann::json config;
  config["out_dir"] = temp_dir("badcfg").string();
  config["estimate"] = {{"units", "x.csv"}, {"edges", "y.csv"}, {"assignment", "z.csv"}};
  // missing outcomes and treatment_probability
  CHECK_THROWS_WITH_AS(run_command("estimate", config),
                       doctest::Contains("estimate.outcomes"), Error);
  CHECK_THROWS_AS(run_command("nosuch", config), Error);
}

TEST_CASE("project command refuses without the additivity assertion") {
  auto dir = temp_dir("projgate");
  nlohmann::json config;
  config["out_dir"] = dir.string();
  config["project"] = {{"estimate_file", (dir / "est.json").string()},
                       {"units", (dir / "u.csv").string()},
                       {"edges", (dir / "e.csv").string()}};
  CHECK_THROWS_WITH_AS(run_command("project", config),
                       doctest::Contains("edge_additivity"), Error);
}

TEST_CASE("estimate pipeline end-to-end on files, then project") {
  auto dir = temp_dir("estimate");
  // Simulated experiment dumped to the documented CSV formats.
  ScenarioSpec spec = scenario_by_id(1);
  spec.n_outcome = 250;
  spec.n_primary = 16;
  spec.n_secondary = 10;
  auto g = generate_graph(spec, 23);
  auto params = draw_dgp_params(DgpConfig{}, g, 24);
  auto z = AssignmentVector::bernoulli(g, 0.5, 25);
  auto edge_y = simulate_outcomes(g, params, z, 26);

  std::string units = "id,side,eligibility\n";
  for (uint32_t j = 0; j < g.n_treatment(); ++j) {
    const auto& u = g.treatment_unit(j);
    units += u.id + ",treatment," +
             (u.eligibility == Eligibility::Primary ? "primary" : "secondary") + "\n";
  }
  for (uint32_t i = 0; i < g.n_outcome(); ++i)
    units += g.outcome_unit(i).id + ",outcome,\n";
  std::string edges = "outcome_id,treatment_id,weight\n";
  std::string outcomes = "outcome_id,treatment_id,y\n";
  size_t k = 0;
  for (const auto& e : g.edges()) {
    edges += g.outcome_unit(e.outcome).id + "," + g.treatment_unit(e.treatment).id + ",1\n";
    outcomes += g.outcome_unit(e.outcome).id + "," + g.treatment_unit(e.treatment).id + "," +
                csv::format_double(edge_y[k++]) + "\n";
  }
  std::string assignment = "treatment_id,z\n";
  for (uint32_t j = 0; j < g.n_treatment(); ++j)
    assignment += g.treatment_unit(j).id + "," + std::to_string(int(z[j])) + "\n";
  csv::write_file_atomic((dir / "units.csv").string(), units);
  csv::write_file_atomic((dir / "edges.csv").string(), edges);
  csv::write_file_atomic((dir / "assignment.csv").string(), assignment);
  csv::write_file_atomic((dir / "outcomes.csv").string(), outcomes);

  nlohmann::json config;
  config["seed"] = 3;
  config["out_dir"] = (dir / "out").string();
  config["estimate"] = {{"units", (dir / "units.csv").string()},
                        {"edges", (dir / "edges.csv").string()},
                        {"assignment", (dir / "assignment.csv").string()},
                        {"outcomes", (dir / "outcomes.csv").string()},
                        {"treatment_probability", 0.5},
                        {"levels", {"outcome", "treatment"}},
                        {"methods", {"basic", "gbt"}},
                        {"gbt", {{"rounds", 30}}},
                        {"edge_additivity", true},
                        {"bootstrap", {{"enabled", true}, {"B", 30}, {"confidence", 0.9}}}};
  auto summary = run_command("estimate", config);
  CHECK(std::filesystem::exists(dir / "out" / "estimates.json"));
  CHECK(std::filesystem::exists(dir / "out" / "exposures.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "overlap.json"));
  CHECK(std::filesystem::exists(dir / "out" / "models" / "treatment_gbt.json"));

  // The projected treatment-level estimate rides along (additivity asserted).
  bool found_projected = false;
  for (const auto& e : summary["estimates"])
    if (e["method"] == "proj_gbt") found_projected = true;
  CHECK(found_projected);

  // Standalone project command over the written estimates file.
  nlohmann::json pconfig;
  pconfig["out_dir"] = (dir / "proj").string();
  pconfig["project"] = {{"estimate_file", (dir / "out" / "estimates.json").string()},
                        {"units", (dir / "units.csv").string()},
                        {"edges", (dir / "edges.csv").string()},
                        {"edge_additivity", true}};
  auto psummary = run_command("project", pconfig);
  CHECK(std::filesystem::exists(dir / "proj" / "projected.json"));
  CHECK(!psummary["estimates"].empty());
}
