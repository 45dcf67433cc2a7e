/* blift -- eligibility-constrained bipartite experiment toolkit, C API.
 *
 * All functions returning blift_status_t set a thread-local error message
 * readable via blift_last_error() on failure. Handles are opaque and each
 * kind pairs with a matching free function. Strings returned through char**
 * out-params are owned by the caller and released with blift_string_free().
 */
#ifndef BLIFT_H
#define BLIFT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BLIFT_API __declspec(dllexport)
#else
#define BLIFT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum blift_status {
  BLIFT_OK = 0,
  BLIFT_ERR_INVALID_ARGUMENT = 1,
  BLIFT_ERR_PARSE = 2,
  BLIFT_ERR_VALIDATION = 3,
  BLIFT_ERR_IO = 4,
  BLIFT_ERR_ESTIMATION = 5,
  BLIFT_ERR_INTERNAL = 6
} blift_status_t;

typedef enum blift_estimand {
  BLIFT_ESTIMAND_PTTE = 0,
  BLIFT_ESTIMAND_STTE = 1
} blift_estimand_t;

BLIFT_API const char* blift_version(void);

/* Message for the most recent failing call on this thread; empty string when
 * the last call succeeded. The pointer stays valid until the next API call on
 * the same thread. */
BLIFT_API const char* blift_last_error(void);

BLIFT_API void blift_string_free(char* s);

/* ---- graphs ---------------------------------------------------------- */

typedef struct blift_graph blift_graph_t;

BLIFT_API blift_status_t blift_graph_load_csv(const char* units_csv_path,
                                              const char* edges_csv_path,
                                              blift_graph_t** out_graph);
BLIFT_API blift_status_t blift_graph_parse_csv(const char* units_csv_text,
                                               const char* edges_csv_text,
                                               blift_graph_t** out_graph);
BLIFT_API void blift_graph_free(blift_graph_t* graph);

typedef struct blift_graph_counts {
  uint64_t treatment_units;
  uint64_t outcome_units;
  uint64_t edges;
  uint64_t primary_units;
  uint64_t secondary_units;
  uint64_t outcomes_with_primary; /* |O_prim| */
  uint64_t outcomes_with_both;    /* |O_Both| */
} blift_graph_counts_t;

BLIFT_API blift_status_t blift_graph_counts(const blift_graph_t* graph,
                                            blift_graph_counts_t* out_counts);

/* Canonical JSON serialization (sorted unit ids, sorted edge pairs). */
BLIFT_API blift_status_t blift_graph_canonical_json(const blift_graph_t* graph, char** out_json);

/* ---- assignments ------------------------------------------------------ */

typedef struct blift_assignment blift_assignment_t;

BLIFT_API blift_status_t blift_assignment_load_csv(const blift_graph_t* graph, const char* path,
                                                   blift_assignment_t** out);
BLIFT_API blift_status_t blift_assignment_parse_csv(const blift_graph_t* graph, const char* text,
                                                    blift_assignment_t** out);
/* Z(1): every primary unit treated. */
BLIFT_API blift_status_t blift_assignment_full(const blift_graph_t* graph,
                                               blift_assignment_t** out);
/* Z(0): nobody treated. */
BLIFT_API blift_status_t blift_assignment_zero(const blift_graph_t* graph,
                                               blift_assignment_t** out);
BLIFT_API blift_status_t blift_assignment_bernoulli(const blift_graph_t* graph, double p,
                                                    uint64_t seed, blift_assignment_t** out);
BLIFT_API void blift_assignment_free(blift_assignment_t* assignment);

/* ---- exposures and the GPS -------------------------------------------- */

typedef struct blift_exposures blift_exposures_t;

BLIFT_API blift_status_t blift_exposures_compute(const blift_graph_t* graph,
                                                 const blift_assignment_t* assignment,
                                                 double treatment_probability,
                                                 blift_exposures_t** out);
BLIFT_API blift_status_t blift_exposures_to_csv(const blift_exposures_t* exposures,
                                                const blift_graph_t* graph, char** out_csv);
BLIFT_API void blift_exposures_free(blift_exposures_t* exposures);

/* Binomial generalized propensity score r(e, n, p). */
BLIFT_API blift_status_t blift_gps_binomial(double exposure, uint32_t n_prim, double p,
                                            double* out_gps);

/* ---- projection -------------------------------------------------------- */

/* |T_prim|/|O_prim| (PTTE) or |T_sec|/|O_Both| (STTE). */
BLIFT_API blift_status_t blift_projection_factor(const blift_graph_t* graph,
                                                 blift_estimand_t estimand, double* out_factor);

/* Treatment-level point estimate -> outcome level. Refuses unless
 * assume_edge_additivity is nonzero. */
BLIFT_API blift_status_t blift_project_estimate(const blift_graph_t* graph,
                                                blift_estimand_t estimand,
                                                int assume_edge_additivity,
                                                double treatment_level_estimate,
                                                double* out_outcome_level_estimate);

/* ---- pipeline ---------------------------------------------------------- */

/* Runs one pipeline stage ("simulate" | "estimate" | "project" | "report")
 * against a JSON config document; artifacts land under the config's out_dir.
 * On success *out_summary_json holds the run summary. */
BLIFT_API blift_status_t blift_run(const char* command, const char* config_json,
                                   char** out_summary_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BLIFT_H */
