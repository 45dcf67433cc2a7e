#include "blift/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "blift/rng.hpp"

#include "blift/common.hpp"
#include "blift/csv.hpp"
#include "blift/estimators.hpp"
#include "blift/projection.hpp"
#include "blift/report.hpp"
#include "blift/sim.hpp"

namespace blift {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void missing(const std::string& field) {
  fail(ErrorCode::Validation, "config: missing required field: " + field);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) missing(path);
  return j.at(key);
}

double need_number(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) fail(ErrorCode::Validation, "config: " + path + " must be a number");
  return v.get<double>();
}

std::string need_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_string()) fail(ErrorCode::Validation, "config: " + path + " must be a string");
  return v.get<std::string>();
}

int resolve_jobs(const json& config) {
  long jobs = 0;
  if (config.contains("jobs") && config["jobs"].is_number_integer())
    jobs = config["jobs"].get<long>();
  if (jobs <= 0) {
    if (const char* env = std::getenv("BLIFT_JOBS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end && *end == '\0' && v > 0) jobs = v;
    }
  }
  if (jobs <= 0) jobs = static_cast<long>(std::thread::hardware_concurrency());
  return static_cast<int>(std::max(1L, jobs));
}

uint64_t resolve_seed(const json& config) {
  if (!config.contains("seed")) return 1;
  if (!config["seed"].is_number_unsigned() && !config["seed"].is_number_integer())
    fail(ErrorCode::Validation, "config: seed must be an integer");
  return config["seed"].get<uint64_t>();
}

std::string resolve_out_dir(const json& config) {
  std::string dir = config.value("out_dir", std::string("out"));
  std::filesystem::create_directories(dir);
  return dir;
}

DgpConfig parse_dgp(const json& sim) {
  DgpConfig dgp;
  if (!sim.contains("dgp")) return dgp;
  const json& d = sim["dgp"];
  if (d.contains("alpha_range")) {
    auto v = d["alpha_range"].get<std::vector<double>>();
    if (v.size() != 2) fail(ErrorCode::Validation, "config: simulate.dgp.alpha_range needs 2 values");
    dgp.alpha_range = {v[0], v[1]};
  }
  if (d.contains("gamma_range")) {
    auto v = d["gamma_range"].get<std::vector<double>>();
    if (v.size() != 2) fail(ErrorCode::Validation, "config: simulate.dgp.gamma_range needs 2 values");
    dgp.gamma_range = {v[0], v[1]};
  }
  if (d.contains("beta_pattern")) dgp.beta_pattern_name = d["beta_pattern"].get<std::string>();
  if (d.contains("beta_matrix") && !d["beta_matrix"].is_null()) {
    auto m = d["beta_matrix"].get<std::vector<std::vector<double>>>();
    if (m.size() != 3 || m[0].size() != 3 || m[1].size() != 3 || m[2].size() != 3)
      fail(ErrorCode::Validation, "config: simulate.dgp.beta_matrix must be 3x3");
    BetaMatrix bm;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) bm[a][b] = m[a][b];
    dgp.beta_override = bm;
  }
  if (d.contains("sigma")) dgp.sigma = d["sigma"].get<double>();
  if (d.contains("visibility_base")) dgp.visibility_base = d["visibility_base"].get<double>();
  if (d.contains("visibility_treated"))
    dgp.visibility_treated = d["visibility_treated"].get<double>();
  // Validate the named pattern eagerly so config errors surface before work.
  beta_pattern(dgp.beta_pattern_name);
  return dgp;
}

ScenarioSpec parse_scenario(const json& sim, int spec_id, uint64_t seed) {
  ScenarioSpec spec = scenario_by_id(spec_id);
  spec.base_seed = derive_seed(seed, Stream::Fixture, static_cast<uint64_t>(spec_id));
  if (sim.contains("replications")) spec.replications = sim["replications"].get<int>();
  if (sim.contains("counts")) {
    const json& c = sim["counts"];
    if (c.contains("outcome")) spec.n_outcome = c["outcome"].get<uint32_t>();
    if (c.contains("primary")) spec.n_primary = c["primary"].get<uint32_t>();
    if (c.contains("secondary")) spec.n_secondary = c["secondary"].get<uint32_t>();
  }
  if (sim.contains("secondary_degree"))
    spec.secondary_degree = sim["secondary_degree"].get<uint32_t>();
  return spec;
}

ReplicationOptions parse_replication_options(const json& sim, int jobs) {
  ReplicationOptions options;
  options.jobs = jobs;
  if (sim.contains("estimators"))
    options.estimators = sim["estimators"].get<std::vector<std::string>>();
  if (sim.contains("krr")) {
    if (sim["krr"].contains("max_train")) options.krr_max_train = sim["krr"]["max_train"].get<int>();
    if (sim["krr"].contains("cv_subsample"))
      options.krr_cv_subsample = sim["krr"]["cv_subsample"].get<int>();
  }
  if (sim.contains("gbt") && sim["gbt"].contains("rounds"))
    options.gbt_rounds = sim["gbt"]["rounds"].get<int>();
  if (sim.contains("bootstrap")) {
    const json& b = sim["bootstrap"];
    options.bootstrap.enabled = b.value("enabled", false);
    options.bootstrap.B = b.value("B", 200);
    options.bootstrap.confidence = b.value("confidence", 0.95);
  }
  return options;
}

ordered_json write_manifest(const std::string& dir, const std::string& command,
                            const json& config, std::vector<ordered_json> artifacts) {
  ordered_json manifest;
  manifest["schema"] = "blift.manifest.v1";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["config_hash"] = config_hash(config);
  manifest["config"] = config;
  manifest["artifacts"] = artifacts;
  csv::write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

ordered_json cmd_simulate(const json& config) {
  const json& sim = need(config, "simulate", "simulate");
  const uint64_t seed = resolve_seed(config);
  const int jobs = resolve_jobs(config);
  const std::string dir = resolve_out_dir(config);

  std::vector<int> spec_ids = {1, 2, 3, 4, 5};
  if (sim.contains("scenarios")) spec_ids = sim["scenarios"].get<std::vector<int>>();
  if (spec_ids.empty()) fail(ErrorCode::Validation, "config: simulate.scenarios is empty");

  DgpConfig dgp = parse_dgp(sim);
  ReplicationOptions options = parse_replication_options(sim, jobs);

  std::vector<ordered_json> artifacts;
  ordered_json summary;
  summary["command"] = "simulate";
  auto& scen_summaries = summary["scenarios"] = ordered_json::array();
  for (int spec_id : spec_ids) {
    ScenarioSpec spec = parse_scenario(sim, spec_id, seed);
    auto records = run_replications(spec, dgp, options);
    std::string path = dir + "/replications_spec" + std::to_string(spec_id) + ".csv";
    write_replication_csv(records, path);
    artifacts.push_back({{"kind", "replications"}, {"spec", spec_id}, {"path", path}});

    int failures = 0;
    for (const auto& rec : records) failures += static_cast<int>(rec.errors.size());
    ordered_json s;
    s["spec"] = spec_id;
    s["replications"] = spec.replications;
    s["estimator_failures"] = failures;
    s["path"] = path;
    scen_summaries.push_back(std::move(s));
  }
  write_manifest(dir, "simulate", config, artifacts);
  summary["manifest"] = dir + "/manifest.json";
  return summary;
}

ordered_json cmd_report(const json& config) {
  const std::string dir = resolve_out_dir(config);
  std::map<int, std::vector<ReplicationRow>> by_spec;

  const json& rep = need(config, "report", "report");
  if (rep.contains("records")) {
    for (const auto& entry : rep["records"]) {
      int spec = need(entry, "spec", "report.records[].spec").get<int>();
      std::string path = need_string(entry, "path", "report.records[].path");
      auto rows = read_replication_csv(path);
      auto& dst = by_spec[spec];
      dst.insert(dst.end(), rows.begin(), rows.end());
    }
  } else if (rep.contains("dir")) {
    std::string src = rep["dir"].get<std::string>();
    std::ifstream in(src + "/manifest.json");
    if (!in) fail(ErrorCode::Io, "cannot open " + src + "/manifest.json");
    json manifest = json::parse(in);
    for (const auto& a : manifest.at("artifacts")) {
      if (a.value("kind", "") != "replications") continue;
      auto rows = read_replication_csv(a.at("path").get<std::string>());
      auto& dst = by_spec[a.at("spec").get<int>()];
      dst.insert(dst.end(), rows.begin(), rows.end());
    }
  } else {
    missing("report.records (or report.dir)");
  }

  ReportBundle bundle = emit_report(by_spec);
  bundle.write(dir);
  std::vector<ordered_json> artifacts = {
      {{"kind", "table"}, {"path", dir + "/ptte_outcome_table.csv"}},
      {{"kind", "table"}, {"path", dir + "/ptte_treatment_table.csv"}},
      {{"kind", "table"}, {"path", dir + "/stte_table.csv"}},
      {{"kind", "boxplot_summary"}, {"path", dir + "/boxplot_summary.csv"}},
      {{"kind", "report"}, {"path", dir + "/report.json"}}};
  write_manifest(dir, "report", config, artifacts);

  ordered_json summary;
  summary["command"] = "report";
  summary["rendered"] = bundle.render_text();
  summary["manifest"] = dir + "/manifest.json";
  return summary;
}

ordered_json cmd_estimate(const json& config) {
  const json& est = need(config, "estimate", "estimate");
  const uint64_t seed = resolve_seed(config);
  const int jobs = resolve_jobs(config);
  const std::string dir = resolve_out_dir(config);

  // Validate every required field before touching the filesystem.
  std::string units_path = need_string(est, "units", "estimate.units");
  std::string edges_path = need_string(est, "edges", "estimate.edges");
  std::string assignment_path = need_string(est, "assignment", "estimate.assignment");
  std::string outcomes_path = need_string(est, "outcomes", "estimate.outcomes");
  double p = need_number(est, "treatment_probability", "estimate.treatment_probability");
  if (p < 0 || p > 1)
    fail(ErrorCode::Validation, "config: estimate.treatment_probability outside [0,1]");

  BipartiteGraph graph = load_graph(units_path, edges_path);
  AssignmentVector z = load_assignment(graph, assignment_path);
  Outcomes outcomes = load_outcomes(graph, outcomes_path);

  ExposureTable exposures = compute_exposures(graph, z, p);
  OverlapReport overlap = diagnose_overlap(exposures);
  write_exposures_csv(exposures, graph, dir + "/exposures.csv");
  csv::write_file_atomic(dir + "/overlap.json", overlap.to_json().dump(2) + "\n");

  std::vector<std::string> levels;
  if (est.contains("levels")) {
    levels = est["levels"].get<std::vector<std::string>>();
  } else {
    levels = {"outcome", "treatment"};
    if (outcomes.has_components) {
      levels.push_back("secondary_outcome");
      levels.push_back("secondary_treatment");
    }
  }
  std::vector<std::string> methods =
      est.contains("methods") ? est["methods"].get<std::vector<std::string>>()
                              : std::vector<std::string>{"basic", "lp", "krr", "gbt"};
  const bool edge_additivity = est.value("edge_additivity", false);

  MlConfig ml;
  if (est.contains("krr")) {
    if (est["krr"].contains("max_train")) ml.krr.max_train = est["krr"]["max_train"].get<int>();
    if (est["krr"].contains("cv_subsample"))
      ml.krr.cv_subsample = est["krr"]["cv_subsample"].get<int>();
  }
  if (est.contains("gbt") && est["gbt"].contains("rounds"))
    ml.gbt.rounds = est["gbt"]["rounds"].get<int>();
  BootstrapSpec boot;
  if (est.contains("bootstrap")) {
    boot.enabled = est["bootstrap"].value("enabled", false);
    boot.B = est["bootstrap"].value("B", 1000);
    boot.confidence = est["bootstrap"].value("confidence", 0.95);
  }

  std::vector<ordered_json> estimate_docs;
  std::vector<ordered_json> artifacts;
  uint64_t model_seed_ix = 0;
  for (const auto& level_name_str : levels) {
    Level level = parse_level(level_name_str);
    for (const auto& method : methods) {
      if (method == "basic") {
        if (level != Level::Outcome && level != Level::Treatment) continue;
        EffectEstimate e = basic_estimate(graph, z, outcomes, level);
        for (const auto& w : overlap.warnings()) e.warnings.push_back(w);
        estimate_docs.push_back(estimate_to_json(e));
        continue;
      }
      ModelMethod mm = parse_method(method);
      FeatureTable table = build_feature_table(graph, exposures, outcomes, level, p);
      uint64_t fit_seed = derive_seed(seed, Stream::Estimator, model_seed_ix++);
      auto model = fit_response_model(table, mm, ml, fit_seed);
      EffectEstimate e = estimate_effect(*model, table);
      for (const auto& w : overlap.warnings()) e.warnings.push_back(w);

      std::string model_path = dir + "/models/" + level_name_str + "_" + method + ".json";
      csv::write_file_atomic(model_path, model->to_json().dump() + "\n");
      artifacts.push_back({{"kind", "model"}, {"path", model_path}});

      std::optional<BootstrapResult> boot_result;
      if (boot.enabled) {
        boot_result = bootstrap_effect_ci(graph, exposures, outcomes, level, mm, ml, boot.B,
                                          boot.confidence,
                                          derive_seed(seed, Stream::Bootstrap, model_seed_ix),
                                          jobs);
        e.interval = Interval{boot_result->lo, boot_result->hi, boot_result->confidence,
                              boot_result->requested_B, boot_result->seed};
        std::string boot_path =
            dir + "/bootstrap/" + level_name_str + "_" + method + ".json";
        csv::write_file_atomic(boot_path, bootstrap_to_json(*boot_result).dump() + "\n");
        artifacts.push_back({{"kind", "bootstrap"}, {"path", boot_path}});
      }
      estimate_docs.push_back(estimate_to_json(e));

      // Treatment-side estimates project to the outcome level when the caller
      // asserted edge additivity; bootstrap replicates are projected too.
      if (edge_additivity &&
          (level == Level::Treatment || level == Level::SecondaryTreatment)) {
        EffectEstimate projected = project_effect(e, graph, true);
        if (boot_result) {
          auto factor = projection_factor(graph, e.estimand);
          BootstrapResult pb = project_replicates(*boot_result, factor);
          projected.interval =
              Interval{pb.lo, pb.hi, pb.confidence, pb.requested_B, pb.seed};
        }
        estimate_docs.push_back(estimate_to_json(projected));
      }
    }
  }

  ordered_json estimates_doc;
  estimates_doc["schema"] = "blift.estimates.v1";
  estimates_doc["estimates"] = estimate_docs;
  csv::write_file_atomic(dir + "/estimates.json", estimates_doc.dump(2) + "\n");
  artifacts.push_back({{"kind", "estimates"}, {"path", dir + "/estimates.json"}});
  artifacts.push_back({{"kind", "exposures"}, {"path", dir + "/exposures.csv"}});
  artifacts.push_back({{"kind", "overlap"}, {"path", dir + "/overlap.json"}});
  write_manifest(dir, "estimate", config, artifacts);

  ordered_json summary;
  summary["command"] = "estimate";
  summary["estimates"] = estimate_docs;
  summary["overlap_flagged"] = overlap.any_flagged;
  summary["manifest"] = dir + "/manifest.json";
  return summary;
}

ordered_json cmd_project(const json& config) {
  const json& proj = need(config, "project", "project");
  const std::string dir = resolve_out_dir(config);
  if (!proj.value("edge_additivity", false))
    fail(ErrorCode::Validation,
         "config: project.edge_additivity must be asserted (true); the projection is exact "
         "only for edge-additive metrics");

  BipartiteGraph graph = load_graph(need_string(proj, "units", "project.units"),
                                    need_string(proj, "edges", "project.edges"));
  std::string est_path = need_string(proj, "estimate_file", "project.estimate_file");
  std::ifstream in(est_path);
  if (!in) fail(ErrorCode::Io, "cannot open " + est_path);
  json doc = json::parse(in);

  std::vector<json> inputs;
  if (doc.contains("estimates")) {
    for (const auto& e : doc["estimates"]) inputs.push_back(e);
  } else {
    inputs.push_back(doc);
  }

  std::vector<ordered_json> outputs;
  for (const auto& ej : inputs) {
    EffectEstimate e = estimate_from_json(ej);
    if (e.level != Level::Treatment && e.level != Level::SecondaryTreatment) continue;
    outputs.push_back(estimate_to_json(project_effect(e, graph, true)));
  }
  if (outputs.empty())
    fail(ErrorCode::Validation, "project: no treatment-level estimates found in " + est_path);

  ordered_json out_doc;
  out_doc["schema"] = "blift.estimates.v1";
  out_doc["estimates"] = outputs;
  csv::write_file_atomic(dir + "/projected.json", out_doc.dump(2) + "\n");
  write_manifest(dir, "project", config,
                 {{{"kind", "estimates"}, {"path", dir + "/projected.json"}}});

  ordered_json summary;
  summary["command"] = "project";
  summary["estimates"] = outputs;
  summary["manifest"] = dir + "/manifest.json";
  return summary;
}

}  // namespace

std::string config_hash(const json& config) {
  std::string canon = config.dump();  // nlohmann::json orders keys lexicographically
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ordered_json run_command(const std::string& command, const json& config_in) {
  // A manifest is accepted wherever a config is: re-running from the manifest
  // alone reproduces the artifacts.
  const json* config = &config_in;
  json unwrapped;
  if (config_in.contains("schema") && config_in["schema"] == "blift.manifest.v1") {
    unwrapped = config_in.at("config");
    config = &unwrapped;
  }
  if (command == "simulate") return cmd_simulate(*config);
  if (command == "estimate") return cmd_estimate(*config);
  if (command == "project") return cmd_project(*config);
  if (command == "report") return cmd_report(*config);
  fail(ErrorCode::InvalidArgument, "unknown command: " + command);
}

}  // namespace blift
