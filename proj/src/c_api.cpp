#include "blift/blift.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "blift/common.hpp"
#include "blift/estimators.hpp"
#include "blift/exposure.hpp"
#include "blift/graph.hpp"
#include "blift/pipeline.hpp"
#include "blift/projection.hpp"

// Thin extern-C shell: opaque handles wrap the C++ value types, every entry
// point catches and converts exceptions, the message lands in a thread-local
// slot for blift_last_error().

struct blift_graph {
  blift::BipartiteGraph graph;
};
struct blift_assignment {
  blift::AssignmentVector z;
};
struct blift_exposures {
  blift::ExposureTable table;
};

namespace {

thread_local std::string g_last_error;

blift_status_t code_to_status(blift::ErrorCode code) {
  using blift::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return BLIFT_ERR_INVALID_ARGUMENT;
    case ErrorCode::Parse: return BLIFT_ERR_PARSE;
    case ErrorCode::Validation: return BLIFT_ERR_VALIDATION;
    case ErrorCode::Io: return BLIFT_ERR_IO;
    case ErrorCode::Estimation: return BLIFT_ERR_ESTIMATION;
    case ErrorCode::Internal: return BLIFT_ERR_INTERNAL;
  }
  return BLIFT_ERR_INTERNAL;
}

template <typename Fn>
blift_status_t guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return BLIFT_OK;
  } catch (const blift::Error& e) {
    g_last_error = e.what();
    return code_to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BLIFT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BLIFT_ERR_INTERNAL;
  }
}

blift_status_t require(bool ok, const char* message) {
  if (ok) return BLIFT_OK;
  g_last_error = message;
  return BLIFT_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* blift_version(void) { return blift::kVersion; }

const char* blift_last_error(void) { return g_last_error.c_str(); }

void blift_string_free(char* s) { std::free(s); }

blift_status_t blift_graph_load_csv(const char* units_csv_path, const char* edges_csv_path,
                                    blift_graph_t** out_graph) {
  if (auto st = require(units_csv_path && edges_csv_path && out_graph, "null argument"))
    return st;
  return guarded([&] {
    *out_graph = new blift_graph{blift::load_graph(units_csv_path, edges_csv_path)};
  });
}

blift_status_t blift_graph_parse_csv(const char* units_csv_text, const char* edges_csv_text,
                                     blift_graph_t** out_graph) {
  if (auto st = require(units_csv_text && edges_csv_text && out_graph, "null argument"))
    return st;
  return guarded([&] {
    *out_graph = new blift_graph{blift::parse_graph(units_csv_text, edges_csv_text)};
  });
}

void blift_graph_free(blift_graph_t* graph) { delete graph; }

blift_status_t blift_graph_counts(const blift_graph_t* graph, blift_graph_counts_t* out_counts) {
  if (auto st = require(graph && out_counts, "null argument")) return st;
  return guarded([&] {
    const auto& g = graph->graph;
    out_counts->treatment_units = g.n_treatment();
    out_counts->outcome_units = g.n_outcome();
    out_counts->edges = g.n_edges();
    out_counts->primary_units = g.primary_units().size();
    out_counts->secondary_units = g.secondary_units().size();
    out_counts->outcomes_with_primary = g.o_prim().size();
    out_counts->outcomes_with_both = g.o_both().size();
  });
}

blift_status_t blift_graph_canonical_json(const blift_graph_t* graph, char** out_json) {
  if (auto st = require(graph && out_json, "null argument")) return st;
  return guarded([&] { *out_json = dup_string(blift::graph_to_canonical_json(graph->graph)); });
}

blift_status_t blift_assignment_load_csv(const blift_graph_t* graph, const char* path,
                                         blift_assignment_t** out) {
  if (auto st = require(graph && path && out, "null argument")) return st;
  return guarded([&] {
    *out = new blift_assignment{blift::load_assignment(graph->graph, path)};
  });
}

blift_status_t blift_assignment_parse_csv(const blift_graph_t* graph, const char* text,
                                          blift_assignment_t** out) {
  if (auto st = require(graph && text && out, "null argument")) return st;
  return guarded([&] {
    *out = new blift_assignment{blift::parse_assignment(graph->graph, text)};
  });
}

blift_status_t blift_assignment_full(const blift_graph_t* graph, blift_assignment_t** out) {
  if (auto st = require(graph && out, "null argument")) return st;
  return guarded([&] {
    *out = new blift_assignment{blift::AssignmentVector::full(graph->graph)};
  });
}

blift_status_t blift_assignment_zero(const blift_graph_t* graph, blift_assignment_t** out) {
  if (auto st = require(graph && out, "null argument")) return st;
  return guarded([&] {
    *out = new blift_assignment{blift::AssignmentVector::zeros(graph->graph)};
  });
}

blift_status_t blift_assignment_bernoulli(const blift_graph_t* graph, double p, uint64_t seed,
                                          blift_assignment_t** out) {
  if (auto st = require(graph && out, "null argument")) return st;
  return guarded([&] {
    *out = new blift_assignment{blift::AssignmentVector::bernoulli(graph->graph, p, seed)};
  });
}

void blift_assignment_free(blift_assignment_t* assignment) { delete assignment; }

blift_status_t blift_exposures_compute(const blift_graph_t* graph,
                                       const blift_assignment_t* assignment,
                                       double treatment_probability, blift_exposures_t** out) {
  if (auto st = require(graph && assignment && out, "null argument")) return st;
  return guarded([&] {
    *out = new blift_exposures{
        blift::compute_exposures(graph->graph, assignment->z, treatment_probability)};
  });
}

blift_status_t blift_exposures_to_csv(const blift_exposures_t* exposures,
                                      const blift_graph_t* graph, char** out_csv) {
  if (auto st = require(exposures && graph && out_csv, "null argument")) return st;
  return guarded([&] {
    *out_csv = dup_string(blift::exposures_to_csv(exposures->table, graph->graph));
  });
}

void blift_exposures_free(blift_exposures_t* exposures) { delete exposures; }

blift_status_t blift_gps_binomial(double exposure, uint32_t n_prim, double p, double* out_gps) {
  if (auto st = require(out_gps != nullptr, "null argument")) return st;
  return guarded([&] { *out_gps = blift::gps_binomial(exposure, n_prim, p); });
}

blift_status_t blift_projection_factor(const blift_graph_t* graph, blift_estimand_t estimand,
                                       double* out_factor) {
  if (auto st = require(graph && out_factor, "null argument")) return st;
  return guarded([&] {
    auto info = blift::projection_factor(
        graph->graph,
        estimand == BLIFT_ESTIMAND_PTTE ? blift::Estimand::PTTE : blift::Estimand::STTE);
    *out_factor = info.factor;
  });
}

blift_status_t blift_project_estimate(const blift_graph_t* graph, blift_estimand_t estimand,
                                      int assume_edge_additivity,
                                      double treatment_level_estimate,
                                      double* out_outcome_level_estimate) {
  if (auto st = require(graph && out_outcome_level_estimate, "null argument")) return st;
  return guarded([&] {
    blift::EffectEstimate e;
    e.estimand =
        estimand == BLIFT_ESTIMAND_PTTE ? blift::Estimand::PTTE : blift::Estimand::STTE;
    e.level = e.estimand == blift::Estimand::PTTE ? blift::Level::Treatment
                                                  : blift::Level::SecondaryTreatment;
    e.method = "external";
    e.estimate = treatment_level_estimate;
    blift::EffectEstimate projected =
        blift::project_effect(e, graph->graph, assume_edge_additivity != 0);
    *out_outcome_level_estimate = projected.estimate;
  });
}

blift_status_t blift_run(const char* command, const char* config_json,
                         char** out_summary_json) {
  if (auto st = require(command && config_json && out_summary_json, "null argument")) return st;
  return guarded([&] {
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      blift::fail(blift::ErrorCode::Parse, std::string("config JSON: ") + e.what());
    }
    auto summary = blift::run_command(command, config);
    *out_summary_json = dup_string(summary.dump(2) + "\n");
  });
}

}  // extern "C"
