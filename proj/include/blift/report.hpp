#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blift/exposure.hpp"
#include "blift/sim.hpp"

namespace blift {

/// Positivity diagnostic: per n_prim stratum, the observed exposure support.
/// A stratum with fewer than two distinct observed levels cannot identify an
/// exposure-response slope and is flagged.
struct OverlapStratum {
  uint32_t n_prim = 0;
  uint64_t units = 0;
  uint32_t attainable_levels = 0;  // n_prim + 1
  uint32_t observed_levels = 0;
  double min_exposure = 0;
  double max_exposure = 0;
  bool flagged = false;
  bool small_sample = false;  // under 5 units
};

struct OverlapReport {
  std::vector<OverlapStratum> strata;  // ascending n_prim
  bool any_flagged = false;

  nlohmann::ordered_json to_json() const;
  std::vector<std::string> warnings() const;  // attachable to estimates
};

OverlapReport diagnose_overlap(const ExposureTable& exposures);

/// Median table + boxplot summaries in the layout of the simulation results
/// tables, plus a machine-readable manifest.
struct MedianTableRow {
  int spec_id = 0;
  double avg_primary_degree = 0;
  double pct_treated = 0;
  std::map<std::string, double> cells;  // column name -> median
};

struct BoxplotStat {
  int spec_id = 0;
  std::string estimand, level, method;
  uint64_t n = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  uint64_t n_outliers = 0;  // beyond 1.5 IQR
};

struct ReportBundle {
  std::vector<MedianTableRow> ptte_outcome;  // columns gt, basic, lp, krr, proj_gt, proj_krr
  std::vector<MedianTableRow> ptte_treatment;  // columns gt, basic, lp, krr
  std::vector<MedianTableRow> stte;  // gt_outcome, gbt, proj_krr, gt_treatment, krr
  std::vector<BoxplotStat> boxplots;

  std::string render_text() const;  // 2-dp tables for the terminal
  /// Writes ptte_outcome_table.csv, ptte_treatment_table.csv, stte_table.csv,
  /// boxplot_summary.csv and report.json under dir (atomic writes).
  void write(const std::string& dir) const;
};

/// Records grouped per scenario id; every rendered number is recomputable
/// from the replication rows alone.
ReportBundle emit_report(const std::map<int, std::vector<ReplicationRow>>& records_by_spec);

}  // namespace blift
