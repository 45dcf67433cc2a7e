#include "blift/graph.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "blift/common.hpp"
#include "blift/csv.hpp"
#include "blift/rng.hpp"

namespace blift {

namespace {

uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename Unit>
void sort_and_check_unique(std::vector<Unit>& units, const char* side) {
  std::sort(units.begin(), units.end(),
            [](const Unit& a, const Unit& b) { return a.id < b.id; });
  for (size_t i = 1; i < units.size(); ++i) {
    if (units[i].id == units[i - 1].id)
      fail(ErrorCode::Validation,
           std::string("duplicate ") + side + " unit id: " + units[i].id);
  }
}

template <typename Unit>
std::unordered_map<std::string, uint32_t> index_of(const std::vector<Unit>& units) {
  std::unordered_map<std::string, uint32_t> m;
  m.reserve(units.size());
  for (uint32_t i = 0; i < units.size(); ++i) m.emplace(units[i].id, i);
  return m;
}

}  // namespace

BipartiteGraph BipartiteGraph::build(std::vector<TreatmentUnit> treatment_units,
                                     std::vector<OutcomeUnit> outcome_units,
                                     const std::vector<EdgeSpec>& edges,
                                     std::vector<std::string> treatment_covariate_names,
                                     std::vector<std::string> outcome_covariate_names) {
  sort_and_check_unique(treatment_units, "treatment");
  sort_and_check_unique(outcome_units, "outcome");
  auto tix = index_of(treatment_units);
  auto oix = index_of(outcome_units);

  std::vector<Edge> indexed;
  indexed.reserve(edges.size());
  for (const auto& e : edges) {
    auto oi = oix.find(e.outcome_id);
    if (oi == oix.end())
      fail(ErrorCode::Validation, "edge references unknown outcome unit: " + e.outcome_id);
    auto ti = tix.find(e.treatment_id);
    if (ti == tix.end())
      fail(ErrorCode::Validation, "edge references unknown treatment unit: " + e.treatment_id);
    indexed.push_back({oi->second, ti->second, e.weight});
  }
  return build_indexed(std::move(treatment_units), std::move(outcome_units),
                       std::move(indexed), std::move(treatment_covariate_names),
                       std::move(outcome_covariate_names));
}

BipartiteGraph BipartiteGraph::build_indexed(std::vector<TreatmentUnit> treatment_units,
                                             std::vector<OutcomeUnit> outcome_units,
                                             std::vector<Edge> edges,
                                             std::vector<std::string> treatment_covariate_names,
                                             std::vector<std::string> outcome_covariate_names) {
  if (treatment_units.empty())
    fail(ErrorCode::Validation, "empty treatment side");
  for (size_t i = 1; i < treatment_units.size(); ++i)
    if (!(treatment_units[i - 1].id < treatment_units[i].id))
      fail(ErrorCode::Validation, "treatment units not sorted/unique by id");
  for (size_t i = 1; i < outcome_units.size(); ++i)
    if (!(outcome_units[i - 1].id < outcome_units[i].id))
      fail(ErrorCode::Validation, "outcome units not sorted/unique by id");

  for (const auto& e : edges) {
    if (e.outcome >= outcome_units.size() || e.treatment >= treatment_units.size())
      fail(ErrorCode::Validation, "edge endpoint out of range");
    if (e.weight < 0)
      fail(ErrorCode::Validation,
           "negative weight on edge (" + outcome_units[e.outcome].id + ", " +
               treatment_units[e.treatment].id + ")");
    if (e.weight == 0)
      fail(ErrorCode::Validation,
           "zero-weight edge (" + outcome_units[e.outcome].id + ", " +
               treatment_units[e.treatment].id + "); existing edges must have weight > 0");
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.outcome != b.outcome ? a.outcome < b.outcome : a.treatment < b.treatment;
  });
  for (size_t k = 1; k < edges.size(); ++k) {
    if (edges[k].outcome == edges[k - 1].outcome &&
        edges[k].treatment == edges[k - 1].treatment)
      fail(ErrorCode::Validation,
           "duplicate edge (" + outcome_units[edges[k].outcome].id + ", " +
               treatment_units[edges[k].treatment].id + ")");
  }

  BipartiteGraph g;
  g.treatment_units_ = std::move(treatment_units);
  g.outcome_units_ = std::move(outcome_units);
  g.edges_ = std::move(edges);
  g.treatment_cov_names_ = std::move(treatment_covariate_names);
  g.outcome_cov_names_ = std::move(outcome_covariate_names);
  g.finalize();
  return g;
}

void BipartiteGraph::finalize() {
  const uint32_t nt = n_treatment();
  const uint32_t no = n_outcome();

  for (uint32_t j = 0; j < nt; ++j) {
    if (treatment_units_[j].eligibility == Eligibility::Primary)
      primary_units_.push_back(j);
    else
      secondary_units_.push_back(j);
  }

  derived_ = derive_index_sets(*this);

  // CSR incidence in both directions, edge order preserved within a unit.
  outcome_edge_start_.assign(no + 1, 0);
  treatment_edge_start_.assign(nt + 1, 0);
  for (const auto& e : edges_) {
    ++outcome_edge_start_[e.outcome + 1];
    ++treatment_edge_start_[e.treatment + 1];
  }
  for (uint32_t i = 0; i < no; ++i) outcome_edge_start_[i + 1] += outcome_edge_start_[i];
  for (uint32_t j = 0; j < nt; ++j) treatment_edge_start_[j + 1] += treatment_edge_start_[j];
  outcome_edge_index_.resize(edges_.size());
  treatment_edge_index_.resize(edges_.size());
  std::vector<uint32_t> ocur(outcome_edge_start_.begin(), outcome_edge_start_.end() - 1);
  std::vector<uint32_t> tcur(treatment_edge_start_.begin(), treatment_edge_start_.end() - 1);
  for (uint32_t k = 0; k < edges_.size(); ++k) {
    outcome_edge_index_[ocur[edges_[k].outcome]++] = k;
    treatment_edge_index_[tcur[edges_[k].treatment]++] = k;
  }

  uint64_t fp = 0xcbf29ce484222325ULL;
  for (const auto& u : treatment_units_) {
    fp = fnv1a(u.id, fp);
    fp = fnv1a(u.eligibility == Eligibility::Primary ? "P" : "S", fp);
  }
  for (const auto& u : outcome_units_) fp = fnv1a(u.id, fp);
  fingerprint_ = fp;
}

std::span<const uint32_t> BipartiteGraph::outcome_edges(uint32_t i) const {
  return {outcome_edge_index_.data() + outcome_edge_start_[i],
          outcome_edge_index_.data() + outcome_edge_start_[i + 1]};
}

std::span<const uint32_t> BipartiteGraph::treatment_edges(uint32_t j) const {
  return {treatment_edge_index_.data() + treatment_edge_start_[j],
          treatment_edge_index_.data() + treatment_edge_start_[j + 1]};
}

int BipartiteGraph::find_treatment(const std::string& id) const {
  auto it = std::lower_bound(treatment_units_.begin(), treatment_units_.end(), id,
                             [](const TreatmentUnit& u, const std::string& s) { return u.id < s; });
  if (it == treatment_units_.end() || it->id != id) return -1;
  return static_cast<int>(it - treatment_units_.begin());
}

int BipartiteGraph::find_outcome(const std::string& id) const {
  auto it = std::lower_bound(outcome_units_.begin(), outcome_units_.end(), id,
                             [](const OutcomeUnit& u, const std::string& s) { return u.id < s; });
  if (it == outcome_units_.end() || it->id != id) return -1;
  return static_cast<int>(it - outcome_units_.begin());
}

DerivedIndexSets derive_index_sets(const BipartiteGraph& graph) {
  DerivedIndexSets d;
  const uint32_t no = graph.n_outcome();
  const uint32_t nt = graph.n_treatment();
  d.primary_neighbors.assign(no, {});
  d.n_prim.assign(no, 0);
  d.n_sec.assign(no, 0);
  d.connected_outcomes.assign(nt, {});

  for (const auto& e : graph.edges()) {
    if (graph.treatment_unit(e.treatment).eligibility == Eligibility::Primary) {
      d.primary_neighbors[e.outcome].push_back(e.treatment);
      ++d.n_prim[e.outcome];
    } else {
      ++d.n_sec[e.outcome];
    }
    d.connected_outcomes[e.treatment].push_back(e.outcome);
  }
  for (auto& v : d.primary_neighbors) std::sort(v.begin(), v.end());
  for (auto& v : d.connected_outcomes) std::sort(v.begin(), v.end());
  for (uint32_t i = 0; i < no; ++i) {
    if (d.n_prim[i] >= 1) {
      d.o_prim.push_back(i);
      if (d.n_sec[i] >= 1) d.o_both.push_back(i);
    }
  }
  return d;
}

AssignmentVector AssignmentVector::validated(const BipartiteGraph& graph,
                                             std::vector<uint8_t> z, std::string label) {
  if (z.size() != graph.n_treatment())
    fail(ErrorCode::Validation, "assignment covers " + std::to_string(z.size()) +
                                    " units, graph has " + std::to_string(graph.n_treatment()));
  for (uint32_t j = 0; j < z.size(); ++j) {
    if (z[j] != 0 && z[j] != 1)
      fail(ErrorCode::Validation, "assignment value for " + graph.treatment_unit(j).id +
                                      " is not in {0,1}");
    if (z[j] == 1 && graph.treatment_unit(j).eligibility == Eligibility::Secondary)
      fail(ErrorCode::Validation, "nonzero assignment on secondary (ineligible) unit " +
                                      graph.treatment_unit(j).id);
  }
  return AssignmentVector(std::move(z), std::move(label), graph.fingerprint());
}

AssignmentVector AssignmentVector::zeros(const BipartiteGraph& graph) {
  return validated(graph, std::vector<uint8_t>(graph.n_treatment(), 0), "Z0");
}

AssignmentVector AssignmentVector::full(const BipartiteGraph& graph) {
  std::vector<uint8_t> z(graph.n_treatment(), 0);
  for (uint32_t j : graph.primary_units()) z[j] = 1;
  return validated(graph, std::move(z), "Z1");
}

AssignmentVector AssignmentVector::bernoulli(const BipartiteGraph& graph, double p,
                                             uint64_t seed) {
  if (p < 0 || p > 1) fail(ErrorCode::InvalidArgument, "treatment probability outside [0,1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<uint8_t> z(graph.n_treatment(), 0);
  for (uint32_t j : graph.primary_units()) z[j] = coin(rng) ? 1 : 0;
  return validated(graph, std::move(z), "bernoulli");
}

AssignmentVector AssignmentVector::from_pairs(
    const BipartiteGraph& graph, const std::vector<std::pair<std::string, int>>& pairs,
    std::string label) {
  std::vector<uint8_t> z(graph.n_treatment(), 0);
  std::vector<bool> seen(graph.n_treatment(), false);
  for (const auto& [id, value] : pairs) {
    int j = graph.find_treatment(id);
    if (j < 0) fail(ErrorCode::Validation, "assignment references unknown treatment unit: " + id);
    if (seen[j]) fail(ErrorCode::Validation, "duplicate assignment row for unit: " + id);
    seen[j] = true;
    if (value != 0 && value != 1)
      fail(ErrorCode::Validation, "assignment value for " + id + " is not in {0,1}");
    z[j] = static_cast<uint8_t>(value);
  }
  for (uint32_t j = 0; j < graph.n_treatment(); ++j) {
    if (!seen[j])
      fail(ErrorCode::Validation,
           "assignment missing treatment unit: " + graph.treatment_unit(j).id);
  }
  return validated(graph, std::move(z), std::move(label));
}

AssignmentVector AssignmentVector::with_flipped(const BipartiteGraph& graph, uint32_t j) const {
  std::vector<uint8_t> z = z_;
  if (j >= z.size()) fail(ErrorCode::InvalidArgument, "flip index out of range");
  z[j] = z[j] ? 0 : 1;
  return validated(graph, std::move(z), label_ + "+flip");
}

void require_same_graph(const BipartiteGraph& graph, const AssignmentVector& z) {
  if (z.graph_fingerprint() != graph.fingerprint() || z.size() != graph.n_treatment())
    fail(ErrorCode::Validation, "assignment was not validated against this graph");
}

namespace {

std::vector<double> parse_covariates(const std::vector<std::string>& row, size_t first_col,
                                     const std::string& id) {
  size_t total = row.size() - first_col;
  size_t blank = 0;
  for (size_t c = first_col; c < row.size(); ++c)
    if (row[c].empty()) ++blank;
  if (blank == total) return {};
  if (blank != 0)
    fail(ErrorCode::Parse, "unit " + id + ": covariates must be all blank or all filled");
  std::vector<double> values;
  values.reserve(total);
  for (size_t c = first_col; c < row.size(); ++c)
    values.push_back(csv::parse_double(row[c], "unit " + id + " covariate"));
  return values;
}

BipartiteGraph graph_from_tables(const csv::Table& units, const csv::Table& edges) {
  if (units.header.size() < 3 || units.header[0] != "id" || units.header[1] != "side" ||
      units.header[2] != "eligibility")
    fail(ErrorCode::Parse, "units CSV header must start with id,side,eligibility");
  std::vector<std::string> cov_names(units.header.begin() + 3, units.header.end());

  std::vector<TreatmentUnit> tunits;
  std::vector<OutcomeUnit> ounits;
  for (const auto& row : units.rows) {
    const std::string& id = row[0];
    if (id.empty()) fail(ErrorCode::Parse, "units CSV: empty unit id");
    const std::string& side = row[1];
    const std::string& elig = row[2];
    if (side == "treatment") {
      TreatmentUnit u;
      u.id = id;
      if (elig == "primary") u.eligibility = Eligibility::Primary;
      else if (elig == "secondary") u.eligibility = Eligibility::Secondary;
      else fail(ErrorCode::Parse, "unit " + id + ": eligibility must be primary or secondary");
      u.covariates = parse_covariates(row, 3, id);
      tunits.push_back(std::move(u));
    } else if (side == "outcome") {
      if (!elig.empty())
        fail(ErrorCode::Parse, "outcome unit " + id + ": eligibility must be blank");
      OutcomeUnit u;
      u.id = id;
      u.covariates = parse_covariates(row, 3, id);
      ounits.push_back(std::move(u));
    } else {
      fail(ErrorCode::Parse, "unit " + id + ": side must be treatment or outcome");
    }
  }

  if (edges.header != std::vector<std::string>{"outcome_id", "treatment_id", "weight"})
    fail(ErrorCode::Parse, "edges CSV header must be outcome_id,treatment_id,weight");
  std::vector<EdgeSpec> especs;
  especs.reserve(edges.rows.size());
  for (const auto& row : edges.rows) {
    especs.push_back({row[0], row[1], csv::parse_double(row[2], "edge weight")});
  }
  return BipartiteGraph::build(std::move(tunits), std::move(ounits), especs,
                               cov_names, cov_names);
}

}  // namespace

BipartiteGraph load_graph(const std::string& units_csv_path, const std::string& edges_csv_path) {
  return graph_from_tables(csv::read_file(units_csv_path), csv::read_file(edges_csv_path));
}

BipartiteGraph parse_graph(const std::string& units_csv_text, const std::string& edges_csv_text) {
  return graph_from_tables(csv::parse(units_csv_text, "units CSV"),
                           csv::parse(edges_csv_text, "edges CSV"));
}

AssignmentVector parse_assignment(const BipartiteGraph& graph, const std::string& csv_text) {
  auto t = csv::parse(csv_text, "assignment CSV");
  if (t.header != std::vector<std::string>{"treatment_id", "z"})
    fail(ErrorCode::Parse, "assignment CSV header must be treatment_id,z");
  std::vector<std::pair<std::string, int>> pairs;
  pairs.reserve(t.rows.size());
  for (const auto& row : t.rows)
    pairs.emplace_back(row[0], static_cast<int>(csv::parse_long(row[1], "assignment z")));
  return AssignmentVector::from_pairs(graph, pairs, "file");
}

AssignmentVector load_assignment(const BipartiteGraph& graph, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_assignment(graph, ss.str());
}

std::string graph_to_canonical_json(const BipartiteGraph& graph) {
  nlohmann::ordered_json j;
  j["schema"] = "blift.graph.v1";
  j["covariate_names"] = {{"treatment", graph.treatment_covariate_names()},
                          {"outcome", graph.outcome_covariate_names()}};
  auto& tu = j["treatment_units"] = nlohmann::ordered_json::array();
  for (uint32_t k = 0; k < graph.n_treatment(); ++k) {
    const auto& u = graph.treatment_unit(k);
    tu.push_back({{"id", u.id},
                  {"eligibility", u.eligibility == Eligibility::Primary ? "primary" : "secondary"},
                  {"covariates", u.covariates}});
  }
  auto& ou = j["outcome_units"] = nlohmann::ordered_json::array();
  for (uint32_t k = 0; k < graph.n_outcome(); ++k) {
    const auto& u = graph.outcome_unit(k);
    ou.push_back({{"id", u.id}, {"covariates", u.covariates}});
  }
  auto& ed = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges()) {
    ed.push_back({graph.outcome_unit(e.outcome).id, graph.treatment_unit(e.treatment).id,
                  e.weight});
  }
  return j.dump(2) + "\n";
}

}  // namespace blift
