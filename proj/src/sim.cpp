#include "blift/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "blift/common.hpp"
#include "blift/rng.hpp"

namespace blift {

std::vector<ScenarioSpec> scenario_grid() {
  std::vector<ScenarioSpec> grid;
  const double degrees[5] = {2.8, 5.4, 8.0, 8.0, 8.0};
  const double probs[5] = {0.50, 0.50, 0.50, 0.45, 0.40};
  for (int s = 0; s < 5; ++s) {
    ScenarioSpec spec;
    spec.spec_id = s + 1;
    spec.target_mean_primary_degree = degrees[s];
    spec.treatment_probability = probs[s];
    grid.push_back(spec);
  }
  return grid;
}

ScenarioSpec scenario_by_id(int spec_id) {
  if (spec_id < 1 || spec_id > 5)
    fail(ErrorCode::InvalidArgument, "scenario spec_id must be in 1..5");
  return scenario_grid()[spec_id - 1];
}

BetaMatrix beta_pattern(const std::string& name) {
  // Only the treated-type column is live at runtime (untreated types keep
  // visibility 1, so log v = 0); the rest is kept for config completeness.
  if (name == "amplification") {
    return {{{1.0, -0.2, -0.2},
             {0.8, -0.5, 0.0},
             {-0.3, 0.0, -0.5}}};
  }
  if (name == "prominence_saturation") {
    return {{{-1.0, -0.2, -0.2},
             {0.8, -0.5, 0.0},
             {-0.3, 0.0, -0.5}}};
  }
  if (name == "no_cross_spillover") {
    return {{{1.0, -0.2, -0.2},
             {0.0, -0.5, 0.0},
             {0.0, 0.0, -0.5}}};
  }
  fail(ErrorCode::InvalidArgument, "unknown beta pattern: " + name);
}

DgpParams draw_dgp_params(const DgpConfig& config, const BipartiteGraph& graph, uint64_t seed) {
  DgpParams p;
  p.beta = config.beta_override ? *config.beta_override : beta_pattern(config.beta_pattern_name);
  if (config.beta_pattern_name == "prominence_saturation" && !config.beta_override &&
      p.beta[kTypeTreated][kTypeTreated] >= 0)
    fail(ErrorCode::Validation,
         "prominence_saturation requires a negative diagonal for the treated type");
  p.sigma = config.sigma;
  if (p.sigma < 0) fail(ErrorCode::InvalidArgument, "sigma must be >= 0");
  p.visibility_base = config.visibility_base;
  p.visibility_treated = config.visibility_treated;
  if (p.visibility_base <= 0 || p.visibility_treated <= 0)
    fail(ErrorCode::InvalidArgument, "visibility scores must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> alpha_draw(config.alpha_range[0], config.alpha_range[1]);
  for (auto& a : p.alpha) a = alpha_draw(rng);
  std::uniform_real_distribution<double> gamma_draw(config.gamma_range[0], config.gamma_range[1]);
  p.gamma.resize(graph.n_outcome());
  for (auto& g : p.gamma) g = gamma_draw(rng);

  // Primary units are the treated type. Secondary types come from the graph's
  // vtype covariates when present (the generator writes them); otherwise they
  // alternate between substitute and competitor in stable (id-sorted) order.
  p.treatment_type.assign(graph.n_treatment(), kTypeTreated);
  const auto& names = graph.treatment_covariate_names();
  int sub_col = -1, comp_col = -1;
  for (size_t c = 0; c < names.size(); ++c) {
    if (names[c] == "vtype_substitute") sub_col = static_cast<int>(c);
    if (names[c] == "vtype_competitor") comp_col = static_cast<int>(c);
  }
  uint32_t rank = 0;
  for (uint32_t j : graph.secondary_units()) {
    const auto& cov = graph.treatment_unit(j).covariates;
    if (sub_col >= 0 && comp_col >= 0 && !cov.empty()) {
      p.treatment_type[j] = cov[sub_col] > 0.5 ? kTypeSubstitute : kTypeCompetitor;
    } else {
      p.treatment_type[j] = (rank % 2 == 0) ? kTypeSubstitute : kTypeCompetitor;
    }
    ++rank;
  }
  return p;
}

namespace {

std::string padded_id(char prefix, uint32_t index, uint32_t count) {
  uint32_t width = 1;
  for (uint32_t c = count; c >= 10; c /= 10) ++width;
  std::string digits = std::to_string(index);
  std::string out(1, prefix);
  out.append(width > digits.size() ? width - digits.size() : 0, '0');
  out += digits;
  return out;
}

// Sample k distinct values from [0, n) without replacement.
void sample_without_replacement(uint32_t n, uint32_t k, std::mt19937_64& rng,
                                std::vector<uint32_t>& pool, std::vector<uint32_t>& out) {
  out.clear();
  for (uint32_t t = 0; t < k; ++t) {
    std::uniform_int_distribution<uint32_t> pick(t, n - 1);
    uint32_t r = pick(rng);
    std::swap(pool[t], pool[r]);
    out.push_back(pool[t]);
  }
}

}  // namespace

BipartiteGraph generate_graph(const ScenarioSpec& scenario, uint64_t seed) {
  const uint32_t n_out = scenario.n_outcome;
  const uint32_t n_prim = scenario.n_primary;
  const uint32_t n_sec = scenario.n_secondary;
  const double mu = scenario.target_mean_primary_degree;
  if (n_out == 0 || n_prim == 0 || n_sec == 0)
    fail(ErrorCode::InvalidArgument, "unit counts must be positive");
  if (mu < 1.0)
    fail(ErrorCode::InvalidArgument, "target mean primary degree must be >= 1");
  if (mu > static_cast<double>(n_prim))
    fail(ErrorCode::InvalidArgument,
         "infeasible degree target " + std::to_string(mu) + " with " +
             std::to_string(n_prim) + " primary units");
  uint32_t sec_deg = std::min(scenario.secondary_degree, n_sec);
  if (sec_deg == 0) sec_deg = 1;

  const uint32_t lo = static_cast<uint32_t>(std::floor(mu));
  const double frac = mu - lo;
  const uint32_t hi = std::min< uint32_t>(lo + 1, n_prim);

  std::vector<TreatmentUnit> tunits;
  tunits.reserve(n_prim + n_sec);
  for (uint32_t j = 0; j < n_prim; ++j)
    tunits.push_back({padded_id('p', j, n_prim), Eligibility::Primary, {}});
  for (uint32_t j = 0; j < n_sec; ++j)
    tunits.push_back({padded_id('s', j, n_sec), Eligibility::Secondary, {}});
  std::sort(tunits.begin(), tunits.end(),
            [](const TreatmentUnit& a, const TreatmentUnit& b) { return a.id < b.id; });
  std::vector<OutcomeUnit> ounits;
  ounits.reserve(n_out);
  for (uint32_t i = 0; i < n_out; ++i) ounits.push_back({padded_id('o', i, n_out), {}});

  // Index lookup after sorting: primary ids sort before secondary ('p' < 's').
  // Treatment index of primary j is j; of secondary j is n_prim + j.
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution extra(frac);
  std::vector<uint32_t> prim_pool(n_prim), sec_pool(n_sec), picks;
  for (uint32_t j = 0; j < n_prim; ++j) prim_pool[j] = j;
  for (uint32_t j = 0; j < n_sec; ++j) sec_pool[j] = j;

  std::vector<Edge> edges;
  edges.reserve(static_cast<size_t>(n_out) * (lo + 1 + sec_deg));
  for (uint32_t i = 0; i < n_out; ++i) {
    uint32_t d = lo;
    if (frac > 0 && extra(rng)) d = hi;
    d = std::max<uint32_t>(1, std::min(d, n_prim));
    sample_without_replacement(n_prim, d, rng, prim_pool, picks);
    for (uint32_t j : picks) edges.push_back({i, j, 1.0});
    sample_without_replacement(n_sec, sec_deg, rng, sec_pool, picks);
    for (uint32_t j : picks) edges.push_back({i, n_prim + j, 1.0});
  }
  return BipartiteGraph::build_indexed(std::move(tunits), std::move(ounits), std::move(edges));
}

namespace {

// Per-outcome sum over neighbors of beta[row][type(k)] * log v_k(Z), the only
// assignment-dependent piece of the outcome model. Returned per beta row.
std::array<std::vector<double>, 3> spillover_terms(const BipartiteGraph& graph,
                                                   const DgpParams& params,
                                                   const AssignmentVector& z) {
  const double logv = std::log(params.visibility_treated) - std::log(params.visibility_base);
  std::array<std::vector<double>, 3> s;
  for (auto& v : s) v.assign(graph.n_outcome(), 0.0);
  for (const auto& e : graph.edges()) {
    if (!z[e.treatment]) continue;
    int tk = params.treatment_type[e.treatment];
    for (int row = 0; row < 3; ++row) s[row][e.outcome] += params.beta[row][tk] * logv;
  }
  return s;
}

void check_params(const BipartiteGraph& graph, const DgpParams& params) {
  if (params.gamma.size() != graph.n_outcome() ||
      params.treatment_type.size() != graph.n_treatment())
    fail(ErrorCode::InvalidArgument, "DGP parameters sized for a different graph");
}

}  // namespace

std::vector<double> evaluate_noiseless(const BipartiteGraph& graph, const DgpParams& params,
                                       const AssignmentVector& z) {
  require_same_graph(graph, z);
  check_params(graph, params);
  auto s = spillover_terms(graph, params, z);
  std::vector<double> y(graph.n_edges());
  size_t k = 0;
  for (const auto& e : graph.edges()) {
    int tj = params.treatment_type[e.treatment];
    y[k++] = params.alpha[tj] + params.gamma[e.outcome] * s[tj][e.outcome];
  }
  return y;
}

std::vector<double> simulate_outcomes(const BipartiteGraph& graph, const DgpParams& params,
                                      const AssignmentVector& z, uint64_t noise_seed) {
  std::vector<double> y = evaluate_noiseless(graph, params, z);
  if (params.sigma > 0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, params.sigma);
    for (auto& v : y) v += noise(rng);
  }
  return y;
}

UnitOutcomes sum_unit_outcomes(const BipartiteGraph& graph, const std::vector<double>& edge_y) {
  if (edge_y.size() != graph.n_edges())
    fail(ErrorCode::InvalidArgument, "edge outcome vector does not match graph edges");
  UnitOutcomes u;
  u.y_outcome.assign(graph.n_outcome(), 0.0);
  u.y_outcome_prim.assign(graph.n_outcome(), 0.0);
  u.y_outcome_sec.assign(graph.n_outcome(), 0.0);
  u.y_treatment.assign(graph.n_treatment(), 0.0);
  u.y_treatment_sec.assign(graph.n_treatment(), 0.0);
  size_t k = 0;
  for (const auto& e : graph.edges()) {
    double y = edge_y[k++];
    u.y_outcome[e.outcome] += y;
    u.y_treatment[e.treatment] += y;
    if (graph.treatment_unit(e.treatment).eligibility == Eligibility::Primary) {
      u.y_outcome_prim[e.outcome] += y;
    } else {
      u.y_outcome_sec[e.outcome] += y;
      if (graph.in_o_both(e.outcome)) u.y_treatment_sec[e.treatment] += y;
    }
  }
  return u;
}

GroundTruth effects_from_edge_outcomes(const BipartiteGraph& graph,
                                       const std::vector<double>& edge_y_full,
                                       const std::vector<double>& edge_y_zero) {
  if (edge_y_full.size() != graph.n_edges() || edge_y_zero.size() != graph.n_edges())
    fail(ErrorCode::InvalidArgument, "edge outcome vectors do not match graph edges");

  // The outcome-side and treatment-side sums are computed independently (the
  // same edge differences grouped by outcome unit vs by treatment unit); the
  // projection identity is asserted to 1e-10 relative error downstream, so
  // accumulate in extended precision.
  GroundTruth gt;
  auto is_primary = [&](uint32_t j) {
    return graph.treatment_unit(j).eligibility == Eligibility::Primary;
  };

  long double acc = 0;
  for (uint32_t i : graph.o_prim()) {
    long double unit = 0;
    for (uint32_t k : graph.outcome_edges(i)) {
      if (is_primary(graph.edges()[k].treatment))
        unit += static_cast<long double>(edge_y_full[k]) - edge_y_zero[k];
    }
    acc += unit;
  }
  if (!graph.o_prim().empty()) gt.ptte_outcome = static_cast<double>(acc / graph.o_prim().size());

  acc = 0;
  for (uint32_t j : graph.primary_units()) {
    long double unit = 0;
    for (uint32_t k : graph.treatment_edges(j))
      unit += static_cast<long double>(edge_y_full[k]) - edge_y_zero[k];
    acc += unit;
  }
  if (!graph.primary_units().empty())
    gt.ptte_treatment = static_cast<double>(acc / graph.primary_units().size());

  acc = 0;
  for (uint32_t i : graph.o_both()) {
    long double unit = 0;
    for (uint32_t k : graph.outcome_edges(i)) {
      if (!is_primary(graph.edges()[k].treatment))
        unit += static_cast<long double>(edge_y_full[k]) - edge_y_zero[k];
    }
    acc += unit;
  }
  if (!graph.o_both().empty()) gt.stte_outcome = static_cast<double>(acc / graph.o_both().size());

  acc = 0;
  for (uint32_t j : graph.secondary_units()) {
    long double unit = 0;
    for (uint32_t k : graph.treatment_edges(j)) {
      if (graph.in_o_both(graph.edges()[k].outcome))
        unit += static_cast<long double>(edge_y_full[k]) - edge_y_zero[k];
    }
    acc += unit;
  }
  if (!graph.secondary_units().empty())
    gt.stte_treatment = static_cast<double>(acc / graph.secondary_units().size());
  return gt;
}

GroundTruth ground_truth_effects(const BipartiteGraph& graph, const DgpParams& params) {
  check_params(graph, params);
  auto z1 = AssignmentVector::full(graph);
  auto z0 = AssignmentVector::zeros(graph);
  return effects_from_edge_outcomes(graph, evaluate_noiseless(graph, params, z1),
                                    evaluate_noiseless(graph, params, z0));
}

}  // namespace blift
