#include "blift/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "blift/common.hpp"
#include "blift/csv.hpp"

namespace blift {

std::string level_name(Level level) {
  switch (level) {
    case Level::Outcome: return "outcome";
    case Level::Treatment: return "treatment";
    case Level::SecondaryOutcome: return "secondary_outcome";
    case Level::SecondaryTreatment: return "secondary_treatment";
  }
  return "?";
}

std::string estimand_name(Estimand estimand) {
  return estimand == Estimand::PTTE ? "ptte" : "stte";
}

Level parse_level(const std::string& name) {
  if (name == "outcome") return Level::Outcome;
  if (name == "treatment") return Level::Treatment;
  if (name == "secondary_outcome") return Level::SecondaryOutcome;
  if (name == "secondary_treatment") return Level::SecondaryTreatment;
  fail(ErrorCode::InvalidArgument, "unknown level: " + name);
}

Estimand estimand_for_level(Level level) {
  return (level == Level::Outcome || level == Level::Treatment) ? Estimand::PTTE
                                                                : Estimand::STTE;
}

Outcomes Outcomes::from_edge_outcomes(const BipartiteGraph& graph, std::vector<double> edge_y) {
  Outcomes o;
  o.has_components = true;
  o.units = sum_unit_outcomes(graph, edge_y);
  o.edge_y = std::move(edge_y);
  return o;
}

Outcomes Outcomes::from_unit_values(const BipartiteGraph& graph, std::vector<double> outcome_y,
                                    std::vector<double> treatment_y) {
  if (outcome_y.size() != graph.n_outcome() || treatment_y.size() != graph.n_treatment())
    fail(ErrorCode::InvalidArgument, "unit outcome vectors do not match graph");
  Outcomes o;
  o.has_components = false;
  o.units.y_outcome = std::move(outcome_y);
  o.units.y_treatment = std::move(treatment_y);
  return o;
}

Outcomes parse_outcomes(const BipartiteGraph& graph, const std::string& csv_text) {
  auto t = csv::parse(csv_text, "outcomes CSV");
  if (t.header == std::vector<std::string>{"outcome_id", "treatment_id", "y"}) {
    // Edge-level: every edge exactly once.
    std::vector<double> edge_y(graph.n_edges(), 0.0);
    std::vector<bool> seen(graph.n_edges(), false);
    for (const auto& row : t.rows) {
      int i = graph.find_outcome(row[0]);
      int j = graph.find_treatment(row[1]);
      if (i < 0 || j < 0)
        fail(ErrorCode::Validation, "outcomes CSV references unknown unit in edge (" + row[0] +
                                        ", " + row[1] + ")");
      // locate the edge index
      auto edges = graph.outcome_edges(static_cast<uint32_t>(i));
      int found = -1;
      for (uint32_t k : edges)
        if (graph.edges()[k].treatment == static_cast<uint32_t>(j)) found = static_cast<int>(k);
      if (found < 0)
        fail(ErrorCode::Validation,
             "outcomes CSV references nonexistent edge (" + row[0] + ", " + row[1] + ")");
      if (seen[found])
        fail(ErrorCode::Validation, "duplicate outcome row for edge (" + row[0] + ", " + row[1] + ")");
      seen[found] = true;
      edge_y[found] = csv::parse_double(row[2], "outcome y");
    }
    for (size_t k = 0; k < seen.size(); ++k)
      if (!seen[k])
        fail(ErrorCode::Validation, "outcomes CSV missing a row for edge (" +
                                        graph.outcome_unit(graph.edges()[k].outcome).id + ", " +
                                        graph.treatment_unit(graph.edges()[k].treatment).id + ")");
    return Outcomes::from_edge_outcomes(graph, std::move(edge_y));
  }
  if (t.header == std::vector<std::string>{"unit_id", "y"}) {
    std::vector<double> oy(graph.n_outcome(), 0.0), ty(graph.n_treatment(), 0.0);
    std::vector<bool> oseen(graph.n_outcome(), false), tseen(graph.n_treatment(), false);
    for (const auto& row : t.rows) {
      double y = csv::parse_double(row[1], "outcome y");
      int i = graph.find_outcome(row[0]);
      if (i >= 0) {
        if (oseen[i]) fail(ErrorCode::Validation, "duplicate outcome row for unit " + row[0]);
        oseen[i] = true;
        oy[i] = y;
        continue;
      }
      int j = graph.find_treatment(row[0]);
      if (j < 0) fail(ErrorCode::Validation, "outcomes CSV references unknown unit " + row[0]);
      if (tseen[j]) fail(ErrorCode::Validation, "duplicate outcome row for unit " + row[0]);
      tseen[j] = true;
      ty[j] = y;
    }
    for (uint32_t i = 0; i < graph.n_outcome(); ++i)
      if (!oseen[i])
        fail(ErrorCode::Validation, "outcomes CSV missing unit " + graph.outcome_unit(i).id);
    for (uint32_t j = 0; j < graph.n_treatment(); ++j)
      if (!tseen[j])
        fail(ErrorCode::Validation, "outcomes CSV missing unit " + graph.treatment_unit(j).id);
    return Outcomes::from_unit_values(graph, std::move(oy), std::move(ty));
  }
  fail(ErrorCode::Parse,
       "outcomes CSV header must be outcome_id,treatment_id,y or unit_id,y");
}

Outcomes load_outcomes(const BipartiteGraph& graph, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_outcomes(graph, ss.str());
}

namespace {

void append_covariates(std::vector<double>& row, const std::vector<double>& cov, size_t expected) {
  // Units may legitimately carry no covariates (empty sequence): zeros then.
  if (cov.empty()) {
    row.insert(row.end(), expected, 0.0);
  } else {
    row.insert(row.end(), cov.begin(), cov.end());
  }
}

// Counterfactual treatment-side exposures at full deployment come from the
// exposure maps evaluated at Z(1).
struct FullDeploymentExposures {
  std::vector<double> e_dir;      // indexed by treatment unit
  std::vector<double> e_ind;
  std::vector<double> e_ind_sec;
};

FullDeploymentExposures full_deployment(const BipartiteGraph& graph) {
  auto z1 = AssignmentVector::full(graph);
  FullDeploymentExposures f;
  f.e_dir.assign(graph.n_treatment(), 0.0);
  f.e_ind.assign(graph.n_treatment(), 0.0);
  f.e_ind_sec.assign(graph.n_treatment(), 0.0);
  for (const auto& row : compute_treatment_exposures(graph, z1)) {
    f.e_dir[row.unit] = row.e_dir;
    f.e_ind[row.unit] = row.e_ind;
  }
  for (const auto& row : compute_secondary_indirect_exposures(graph, z1))
    f.e_ind_sec[row.unit] = row.e_ind;
  return f;
}

}  // namespace

FeatureTable build_feature_table(const BipartiteGraph& graph, const ExposureTable& exposures,
                                 const Outcomes& outcomes, Level level,
                                 double treatment_probability) {
  if (exposures.graph_fingerprint != graph.fingerprint())
    fail(ErrorCode::Validation, "exposure table was not computed against this graph");
  const double p = treatment_probability;
  if (p < 0 || p > 1) fail(ErrorCode::InvalidArgument, "treatment probability outside [0,1]");

  FeatureTable table;
  table.level = level;
  table.estimand = estimand_for_level(level);

  const bool outcome_side = (level == Level::Outcome || level == Level::SecondaryOutcome);
  const auto& cov_names =
      outcome_side ? graph.outcome_covariate_names() : graph.treatment_covariate_names();

  if ((level == Level::SecondaryOutcome || level == Level::SecondaryTreatment) &&
      !outcomes.has_components)
    fail(ErrorCode::Validation,
         level_name(level) + " requires edge-level outcome components, which are not present");

  std::vector<std::vector<double>> rows, full_rows, zero_rows;
  auto push = [&](std::vector<std::vector<double>>& dst, std::vector<double> row) {
    dst.push_back(std::move(row));
  };

  if (level == Level::Outcome) {
    table.columns = {"E", "gps", "n_prim"};
    if (!outcomes.has_components)
      table.caveats.push_back(
          "unit-level outcomes only: Y_i approximates the primary component Y_i,prim");
    for (const auto& r : exposures.outcomes) {
      table.units.push_back(r.unit);
      table.y.push_back(outcomes.has_components ? outcomes.units.y_outcome_prim[r.unit]
                                                : outcomes.units.y_outcome[r.unit]);
      std::vector<double> row = {r.exposure(), r.gps, static_cast<double>(r.n_prim)};
      append_covariates(row, graph.outcome_unit(r.unit).covariates, cov_names.size());
      std::vector<double> full = {1.0, gps_binomial(1.0, r.n_prim, p),
                                  static_cast<double>(r.n_prim)};
      std::vector<double> zero = {0.0, gps_binomial(0.0, r.n_prim, p),
                                  static_cast<double>(r.n_prim)};
      append_covariates(full, graph.outcome_unit(r.unit).covariates, cov_names.size());
      append_covariates(zero, graph.outcome_unit(r.unit).covariates, cov_names.size());
      push(rows, std::move(row));
      push(full_rows, std::move(full));
      push(zero_rows, std::move(zero));
    }
  } else if (level == Level::SecondaryOutcome) {
    table.columns = {"E", "gps", "n_prim", "n_sec"};
    // Population is O_Both; e_max is the exposure under Z(1), i.e. 1 under
    // the default uniform weights.
    for (const auto& r : exposures.outcomes) {
      if (r.n_sec == 0) continue;
      table.units.push_back(r.unit);
      table.y.push_back(outcomes.units.y_outcome_sec[r.unit]);
      std::vector<double> row = {r.exposure(), r.gps, static_cast<double>(r.n_prim),
                                 static_cast<double>(r.n_sec)};
      append_covariates(row, graph.outcome_unit(r.unit).covariates, cov_names.size());
      std::vector<double> full = {1.0, gps_binomial(1.0, r.n_prim, p),
                                  static_cast<double>(r.n_prim), static_cast<double>(r.n_sec)};
      std::vector<double> zero = {0.0, gps_binomial(0.0, r.n_prim, p),
                                  static_cast<double>(r.n_prim), static_cast<double>(r.n_sec)};
      append_covariates(full, graph.outcome_unit(r.unit).covariates, cov_names.size());
      append_covariates(zero, graph.outcome_unit(r.unit).covariates, cov_names.size());
      push(rows, std::move(row));
      push(full_rows, std::move(full));
      push(zero_rows, std::move(zero));
    }
  } else if (level == Level::Treatment) {
    table.columns = {"Z", "E_dir", "E_ind", "n_out"};
    if (exposures.assignment.size() != graph.n_treatment())
      fail(ErrorCode::Validation, "exposure table carries no realized assignment");
    auto full_exp = full_deployment(graph);
    for (const auto& r : exposures.treatments) {
      uint32_t j = r.unit;
      table.units.push_back(j);
      table.y.push_back(outcomes.units.y_treatment[j]);
      double n_out = static_cast<double>(graph.connected_outcomes(j).size());
      double z_j = exposures.assignment[j] ? 1.0 : 0.0;
      std::vector<double> row = {z_j, r.e_dir, r.e_ind, n_out};
      append_covariates(row, graph.treatment_unit(j).covariates, cov_names.size());
      std::vector<double> full = {1.0, full_exp.e_dir[j], full_exp.e_ind[j], n_out};
      std::vector<double> zero = {0.0, 0.0, 0.0, n_out};
      append_covariates(full, graph.treatment_unit(j).covariates, cov_names.size());
      append_covariates(zero, graph.treatment_unit(j).covariates, cov_names.size());
      push(rows, std::move(row));
      push(full_rows, std::move(full));
      push(zero_rows, std::move(zero));
    }
  } else {  // SecondaryTreatment
    table.columns = {"E_ind", "n_out_both"};
    auto full_exp = full_deployment(graph);
    for (const auto& r : exposures.secondaries) {
      uint32_t j = r.unit;
      table.units.push_back(j);
      table.y.push_back(outcomes.units.y_treatment_sec[j]);
      uint32_t n_both = 0;
      for (uint32_t i : graph.connected_outcomes(j))
        if (graph.in_o_both(i)) ++n_both;
      std::vector<double> row = {r.e_ind, static_cast<double>(n_both)};
      append_covariates(row, graph.treatment_unit(j).covariates, cov_names.size());
      std::vector<double> full = {full_exp.e_ind_sec[j], static_cast<double>(n_both)};
      std::vector<double> zero = {0.0, static_cast<double>(n_both)};
      append_covariates(full, graph.treatment_unit(j).covariates, cov_names.size());
      append_covariates(zero, graph.treatment_unit(j).covariates, cov_names.size());
      push(rows, std::move(row));
      push(full_rows, std::move(full));
      push(zero_rows, std::move(zero));
    }
  }

  table.n_core = table.columns.size();
  for (const auto& name : cov_names) table.columns.push_back("x_" + name);

  const size_t ncol = table.columns.size();
  auto to_matrix = [&](const std::vector<std::vector<double>>& src) {
    Matrix m = Matrix::zeros(src.size(), ncol);
    for (size_t r = 0; r < src.size(); ++r) {
      if (src[r].size() != ncol)
        fail(ErrorCode::Internal, "feature row width mismatch");
      std::copy(src[r].begin(), src[r].end(), m.data.begin() + r * ncol);
    }
    return m;
  };
  table.X = to_matrix(rows);
  table.x_full = to_matrix(full_rows);
  table.x_zero = to_matrix(zero_rows);
  return table;
}

std::unique_ptr<ResponseModel> fit_response_model(const FeatureTable& table, ModelMethod method,
                                                  const MlConfig& config, uint64_t seed) {
  for (double v : table.y)
    if (!std::isfinite(v)) fail(ErrorCode::Estimation, "non-finite target values");
  size_t min_rows = 10;
  if (method == ModelMethod::LP) {
    LpBasis basis;
    auto col = [&](const std::string& name) {
      for (size_t c = 0; c < table.columns.size(); ++c)
        if (table.columns[c] == name) return static_cast<int>(c);
      fail(ErrorCode::Internal, "lp basis column missing: " + name);
    };
    basis.terms.push_back({-1, -1, "1"});
    if (table.level == Level::Outcome || table.level == Level::SecondaryOutcome) {
      int e = col("E"), r = col("gps");
      basis.terms.push_back({e, -1, "E"});
      basis.terms.push_back({r, -1, "gps"});
      basis.terms.push_back({e, r, "E*gps"});
      basis.terms.push_back({e, e, "E^2"});
      basis.terms.push_back({r, r, "gps^2"});
    } else if (table.level == Level::Treatment) {
      int ed = col("E_dir"), ei = col("E_ind");
      basis.terms.push_back({ed, -1, "E_dir"});
      basis.terms.push_back({ei, -1, "E_ind"});
      basis.terms.push_back({ed, ed, "E_dir^2"});
      basis.terms.push_back({ei, ei, "E_ind^2"});
      basis.terms.push_back({ed, ei, "E_dir*E_ind"});
    } else {
      int ei = col("E_ind");
      basis.terms.push_back({ei, -1, "E_ind"});
      basis.terms.push_back({ei, ei, "E_ind^2"});
    }
    for (size_t c = table.n_core; c < table.columns.size(); ++c)
      basis.terms.push_back({static_cast<int>(c), -1, table.columns[c]});
    min_rows = std::max(min_rows, basis.terms.size());
    if (table.X.rows < min_rows)
      fail(ErrorCode::Estimation, "too few rows (" + std::to_string(table.X.rows) +
                                      ") to fit lp (need " + std::to_string(min_rows) + ")");
    return fit_lp(table.X, table.y, basis);
  }
  if (table.X.rows < min_rows)
    fail(ErrorCode::Estimation, "too few rows (" + std::to_string(table.X.rows) + ") to fit " +
                                    method_name(method));
  if (method == ModelMethod::KRR) return fit_krr(table.X, table.y, config.krr, seed);
  return fit_gbt(table.X, table.y, config.gbt);
}

EffectEstimate estimate_effect(const ResponseModel& model, const FeatureTable& table) {
  if (table.units.empty()) fail(ErrorCode::Estimation, "empty estimand population");
  std::vector<double> pred_full = model.predict(table.x_full);
  std::vector<double> pred_zero = model.predict(table.x_zero);
  long double acc = 0;
  for (size_t r = 0; r < table.units.size(); ++r) acc += pred_full[r] - pred_zero[r];

  EffectEstimate est;
  est.estimand = table.estimand;
  est.level = table.level;
  est.method = method_name(model.method());
  est.estimate = static_cast<double>(acc / table.units.size());
  est.population = table.units.size();
  est.warnings = table.caveats;
  if (!std::isfinite(est.estimate))
    fail(ErrorCode::Estimation, "non-finite effect estimate");

  // Overlap guard: counterfactual feature points outside the observed support
  // are extrapolations and must never pass silently.
  for (size_t c = 0; c < table.n_core; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (size_t r = 0; r < table.X.rows; ++r) {
      lo = std::min(lo, table.X.at(r, c));
      hi = std::max(hi, table.X.at(r, c));
    }
    size_t outside = 0;
    double worst = 0;
    for (size_t r = 0; r < table.X.rows; ++r) {
      for (const Matrix* m : {&table.x_full, &table.x_zero}) {
        double v = m->at(r, c);
        if (v < lo - 1e-12 || v > hi + 1e-12) {
          ++outside;
          worst = std::max(worst, std::max(lo - v, v - hi));
        }
      }
    }
    if (outside > 0) {
      est.warnings.push_back(
          "extrapolation: column " + table.columns[c] + " has " + std::to_string(outside) +
          " counterfactual points outside observed [" + csv::format_double(lo) + ", " +
          csv::format_double(hi) + "] (max excess " + csv::format_double(worst) + ")");
    }
  }
  return est;
}

EffectEstimate basic_estimate(const BipartiteGraph& graph, const AssignmentVector& z,
                              const Outcomes& outcomes, Level level) {
  require_same_graph(graph, z);
  EffectEstimate est;
  est.method = "basic";
  est.level = level;
  est.estimand = Estimand::PTTE;
  if (level == Level::Treatment) {
    long double sum1 = 0, sum0 = 0;
    uint64_t n1 = 0, n0 = 0;
    for (uint32_t j : graph.primary_units()) {
      if (z[j]) {
        sum1 += outcomes.units.y_treatment[j];
        ++n1;
      } else {
        sum0 += outcomes.units.y_treatment[j];
        ++n0;
      }
    }
    if (n1 == 0) fail(ErrorCode::Estimation, "basic: empty treated group");
    if (n0 == 0) fail(ErrorCode::Estimation, "basic: empty control group");
    est.estimate = static_cast<double>(sum1 / n1 - sum0 / n0);
    est.population = n1 + n0;
    return est;
  }
  if (level != Level::Outcome)
    fail(ErrorCode::InvalidArgument, "basic method is defined for the PTTE levels only");

  auto rows = compute_outcome_exposures(graph, z);
  if (!outcomes.has_components)
    est.warnings.push_back(
        "unit-level outcomes only: Y_i approximates the primary component Y_i,prim");
  long double sum_hi = 0, sum_lo = 0;
  uint64_t n_hi = 0, n_lo = 0;
  for (const auto& r : rows) {
    if (2ull * r.treated_prim == r.n_prim) continue;  // E = 1/2 excluded
    double y = outcomes.has_components ? outcomes.units.y_outcome_prim[r.unit]
                                       : outcomes.units.y_outcome[r.unit];
    if (2ull * r.treated_prim > r.n_prim) {
      sum_hi += y;
      ++n_hi;
    } else {
      sum_lo += y;
      ++n_lo;
    }
  }
  if (n_hi == 0) fail(ErrorCode::Estimation, "basic: empty majority-exposed group");
  if (n_lo == 0) fail(ErrorCode::Estimation, "basic: empty minority-exposed group");
  est.estimate = static_cast<double>(sum_hi / n_hi - sum_lo / n_lo);
  est.population = n_hi + n_lo;
  return est;
}

nlohmann::ordered_json estimate_to_json(const EffectEstimate& e) {
  nlohmann::ordered_json j;
  j["schema"] = "blift.estimate.v1";
  j["estimand"] = estimand_name(e.estimand);
  j["level"] = level_name(e.level);
  j["method"] = e.method;
  j["estimate"] = e.estimate;
  j["population"] = e.population;
  if (e.interval) {
    j["interval"] = {{"lo", e.interval->lo},
                     {"hi", e.interval->hi},
                     {"confidence", e.interval->confidence},
                     {"B", e.interval->B},
                     {"seed", e.interval->seed}};
  }
  if (e.projection) {
    j["projection"] = {{"estimand", estimand_name(e.projection->estimand)},
                       {"numerator", e.projection->numerator},
                       {"denominator", e.projection->denominator},
                       {"factor", e.projection->factor},
                       {"source_level", e.projection->source_level}};
  }
  j["warnings"] = e.warnings;
  return j;
}

EffectEstimate estimate_from_json(const nlohmann::json& j) {
  EffectEstimate e;
  std::string estimand = j.at("estimand").get<std::string>();
  if (estimand == "ptte") e.estimand = Estimand::PTTE;
  else if (estimand == "stte") e.estimand = Estimand::STTE;
  else fail(ErrorCode::Parse, "estimate: unknown estimand " + estimand);
  e.level = parse_level(j.at("level").get<std::string>());
  e.method = j.at("method").get<std::string>();
  e.estimate = j.at("estimate").get<double>();
  e.population = j.value("population", uint64_t{0});
  if (j.contains("interval")) {
    Interval iv;
    iv.lo = j["interval"].at("lo").get<double>();
    iv.hi = j["interval"].at("hi").get<double>();
    iv.confidence = j["interval"].value("confidence", 0.95);
    iv.B = j["interval"].value("B", 0);
    iv.seed = j["interval"].value("seed", uint64_t{0});
    e.interval = iv;
  }
  if (j.contains("warnings")) e.warnings = j["warnings"].get<std::vector<std::string>>();
  return e;
}

}  // namespace blift
