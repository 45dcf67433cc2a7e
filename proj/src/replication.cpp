#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "blift/common.hpp"
#include "blift/csv.hpp"
#include "blift/estimators.hpp"
#include "blift/projection.hpp"
#include "blift/rng.hpp"
#include "blift/sim.hpp"

// Seeded replication studies over the scenario grid: per replicate the graph,
// DGP draw, assignment and noise all come from independent streams derived
// from (base seed, replicate index), so replicates can run on any thread
// schedule and the records are identical.

namespace blift {

namespace {

bool wants(const ReplicationOptions& o, const std::string& name) {
  return std::find(o.estimators.begin(), o.estimators.end(), name) != o.estimators.end();
}

double gt_for(const GroundTruth& gt, const std::string& estimand, const std::string& level) {
  if (estimand == "ptte") return level == "outcome" ? gt.ptte_outcome : gt.ptte_treatment;
  return level == "outcome" ? gt.stte_outcome : gt.stte_treatment;
}

ReplicationRecord run_one(const ScenarioSpec& scenario, const DgpConfig& dgp,
                          const ReplicationOptions& options, int r) {
  ReplicationRecord record;
  record.replicate = r;

  const uint64_t base = scenario.base_seed;
  BipartiteGraph graph = generate_graph(scenario, derive_seed(base, Stream::Graph, r));
  DgpParams params = draw_dgp_params(dgp, graph, derive_seed(base, Stream::DgpParams, r));
  record.ground_truth = ground_truth_effects(graph, params);
  const GroundTruth& gt = record.ground_truth;

  auto z = AssignmentVector::bernoulli(graph, scenario.treatment_probability,
                                       derive_seed(base, Stream::Assignment, r));
  auto edge_y = simulate_outcomes(graph, params, z, derive_seed(base, Stream::Noise, r));
  Outcomes outcomes = Outcomes::from_edge_outcomes(graph, std::move(edge_y));
  ExposureTable exposures = compute_exposures(graph, z, scenario.treatment_probability);

  MlConfig ml;
  ml.krr.max_train = options.krr_max_train;
  ml.krr.cv_subsample = options.krr_cv_subsample;
  ml.gbt.rounds = options.gbt_rounds;
  const uint64_t est_seed = derive_seed(base, Stream::Estimator, r);

  auto add_row = [&](const std::string& estimand, const std::string& level,
                     const std::string& method, double value,
                     const std::optional<Interval>& iv = std::nullopt) {
    ReplicationRow row;
    row.replicate = r;
    row.estimand = estimand;
    row.level = level;
    row.method = method;
    row.estimate = value;
    if (iv) {
      row.ci_lo = iv->lo;
      row.ci_hi = iv->hi;
    }
    row.ground_truth = gt_for(gt, estimand, level);
    record.rows.push_back(std::move(row));
  };

  auto guarded = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      record.errors.push_back(what + ": " + e.what());
    }
  };

  // The projected ground truth is emitted as its own method column so the
  // report can show the exactness of the projection.
  ProjectionInfo ptte_factor = projection_factor(graph, Estimand::PTTE);
  ProjectionInfo stte_factor = projection_factor(graph, Estimand::STTE);
  add_row("ptte", "outcome", "proj_gt", gt.ptte_treatment * ptte_factor.factor);
  add_row("stte", "outcome", "proj_gt", gt.stte_treatment * stte_factor.factor);

  if (wants(options, "basic")) {
    guarded("basic/outcome", [&] {
      add_row("ptte", "outcome",
              "basic", basic_estimate(graph, z, outcomes, Level::Outcome).estimate);
    });
    guarded("basic/treatment", [&] {
      add_row("ptte", "treatment",
              "basic", basic_estimate(graph, z, outcomes, Level::Treatment).estimate);
    });
  }

  FeatureTable outcome_table, treatment_table;
  bool have_tables = false;
  guarded("feature tables", [&] {
    outcome_table = build_feature_table(graph, exposures, outcomes, Level::Outcome,
                                        scenario.treatment_probability);
    treatment_table = build_feature_table(graph, exposures, outcomes, Level::Treatment,
                                          scenario.treatment_probability);
    have_tables = true;
  });

  if (have_tables && wants(options, "lp")) {
    guarded("lp/outcome", [&] {
      auto model = fit_response_model(outcome_table, ModelMethod::LP, ml, est_seed);
      add_row("ptte", "outcome", "lp", estimate_effect(*model, outcome_table).estimate);
    });
    guarded("lp/treatment", [&] {
      auto model = fit_response_model(treatment_table, ModelMethod::LP, ml, est_seed);
      add_row("ptte", "treatment", "lp", estimate_effect(*model, treatment_table).estimate);
    });
  }

  if (have_tables && wants(options, "krr")) {
    guarded("krr/outcome", [&] {
      auto model = fit_response_model(outcome_table, ModelMethod::KRR, ml,
                                      derive_seed(est_seed, Stream::Subsample, 0));
      add_row("ptte", "outcome", "krr", estimate_effect(*model, outcome_table).estimate);
    });
    guarded("krr/treatment+projection", [&] {
      auto model = fit_response_model(treatment_table, ModelMethod::KRR, ml,
                                      derive_seed(est_seed, Stream::Subsample, 1));
      EffectEstimate est = estimate_effect(*model, treatment_table);
      std::optional<Interval> iv, proj_iv;
      if (options.bootstrap.enabled) {
        BootstrapResult boot = bootstrap_effect_ci(
            graph, exposures, outcomes, Level::Treatment, ModelMethod::KRR, ml,
            options.bootstrap.B, options.bootstrap.confidence,
            derive_seed(base, Stream::Bootstrap, r), 1);
        iv = Interval{boot.lo, boot.hi, boot.confidence, boot.requested_B, boot.seed};
        BootstrapResult projected = project_replicates(boot, ptte_factor);
        proj_iv = Interval{projected.lo, projected.hi, projected.confidence,
                           projected.requested_B, projected.seed};
      }
      add_row("ptte", "treatment", "krr", est.estimate, iv);
      add_row("ptte", "outcome", "proj_krr", est.estimate * ptte_factor.factor, proj_iv);
    });
  }

  // Secondary effects: boosted trees at the outcome level, KRR at the
  // treatment level with its projection (the Table 2 layout).
  if (wants(options, "gbt")) {
    guarded("gbt/secondary_outcome", [&] {
      FeatureTable t = build_feature_table(graph, exposures, outcomes, Level::SecondaryOutcome,
                                           scenario.treatment_probability);
      auto model = fit_response_model(t, ModelMethod::GBT, ml, est_seed);
      add_row("stte", "outcome", "gbt", estimate_effect(*model, t).estimate);
    });
  }
  if (wants(options, "krr")) {
    guarded("krr/secondary_treatment+projection", [&] {
      FeatureTable t = build_feature_table(graph, exposures, outcomes, Level::SecondaryTreatment,
                                           scenario.treatment_probability);
      auto model = fit_response_model(t, ModelMethod::KRR, ml,
                                      derive_seed(est_seed, Stream::Subsample, 2));
      EffectEstimate est = estimate_effect(*model, t);
      std::optional<Interval> iv, proj_iv;
      if (options.bootstrap.enabled) {
        BootstrapResult boot = bootstrap_effect_ci(
            graph, exposures, outcomes, Level::SecondaryTreatment, ModelMethod::KRR, ml,
            options.bootstrap.B, options.bootstrap.confidence,
            derive_seed(base, Stream::Bootstrap, r) ^ 0x5ec0ULL, 1);
        iv = Interval{boot.lo, boot.hi, boot.confidence, boot.requested_B, boot.seed};
        BootstrapResult projected = project_replicates(boot, stte_factor);
        proj_iv = Interval{projected.lo, projected.hi, projected.confidence,
                           projected.requested_B, projected.seed};
      }
      add_row("stte", "treatment", "krr", est.estimate, iv);
      add_row("stte", "outcome", "proj_krr", est.estimate * stte_factor.factor, proj_iv);
    });
  }
  return record;
}

}  // namespace

std::vector<ReplicationRecord> run_replications(const ScenarioSpec& scenario,
                                                const DgpConfig& dgp,
                                                const ReplicationOptions& options) {
  if (scenario.replications < 1)
    fail(ErrorCode::InvalidArgument, "replications must be >= 1");
  const int R = scenario.replications;
  std::vector<ReplicationRecord> records(R);

  int jobs = std::max(1, options.jobs);
  if (jobs > 1 && R > 1) {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    int n_threads = std::min(jobs, R);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < R; r = next.fetch_add(1))
          records[r] = run_one(scenario, dgp, options, r);
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (int r = 0; r < R; ++r) records[r] = run_one(scenario, dgp, options, r);
  }
  return records;
}

std::string replication_rows_to_csv(const std::vector<ReplicationRecord>& records) {
  std::string out = "replicate,estimand,level,method,estimate,ci_lo,ci_hi,ground_truth\n";
  for (const auto& record : records) {
    for (const auto& row : record.rows) {
      out += std::to_string(row.replicate);
      out += ',' + row.estimand + ',' + row.level + ',' + row.method + ',';
      out += csv::format_double(row.estimate);
      out += ',';
      if (row.ci_lo) out += csv::format_double(*row.ci_lo);
      out += ',';
      if (row.ci_hi) out += csv::format_double(*row.ci_hi);
      out += ',' + csv::format_double(row.ground_truth) + '\n';
    }
  }
  return out;
}

void write_replication_csv(const std::vector<ReplicationRecord>& records,
                           const std::string& path) {
  csv::write_file_atomic(path, replication_rows_to_csv(records));
}

std::vector<ReplicationRow> read_replication_csv(const std::string& path) {
  auto t = csv::read_file(path);
  std::vector<std::string> expected = {"replicate", "estimand", "level",      "method",
                                       "estimate",  "ci_lo",    "ci_hi",      "ground_truth"};
  if (t.header != expected)
    fail(ErrorCode::Parse, path + ": unexpected replication CSV header");
  std::vector<ReplicationRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& raw : t.rows) {
    ReplicationRow row;
    row.replicate = static_cast<int>(csv::parse_long(raw[0], "replicate"));
    row.estimand = raw[1];
    row.level = raw[2];
    row.method = raw[3];
    row.estimate = csv::parse_double(raw[4], "estimate");
    if (!raw[5].empty()) row.ci_lo = csv::parse_double(raw[5], "ci_lo");
    if (!raw[6].empty()) row.ci_hi = csv::parse_double(raw[6], "ci_hi");
    row.ground_truth = csv::parse_double(raw[7], "ground_truth");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace blift
