#include "blift/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "blift/common.hpp"
#include "blift/csv.hpp"

namespace blift {

OverlapReport diagnose_overlap(const ExposureTable& exposures) {
  std::map<uint32_t, std::map<uint32_t, uint64_t>> support;  // n_prim -> treated count -> units
  for (const auto& r : exposures.outcomes) support[r.n_prim][r.treated_prim] += 1;

  OverlapReport report;
  for (const auto& [n, levels] : support) {
    OverlapStratum s;
    s.n_prim = n;
    s.attainable_levels = n + 1;
    s.observed_levels = static_cast<uint32_t>(levels.size());
    for (const auto& [k, c] : levels) s.units += c;
    s.min_exposure = static_cast<double>(levels.begin()->first) / n;
    s.max_exposure = static_cast<double>(levels.rbegin()->first) / n;
    s.flagged = s.observed_levels < 2;
    s.small_sample = s.units < 5;
    report.any_flagged |= s.flagged;
    report.strata.push_back(s);
  }
  return report;
}

nlohmann::ordered_json OverlapReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "blift.overlap.v1";
  j["any_flagged"] = any_flagged;
  auto& arr = j["strata"] = nlohmann::ordered_json::array();
  for (const auto& s : strata) {
    arr.push_back({{"n_prim", s.n_prim},
                   {"units", s.units},
                   {"attainable_levels", s.attainable_levels},
                   {"observed_levels", s.observed_levels},
                   {"min_exposure", s.min_exposure},
                   {"max_exposure", s.max_exposure},
                   {"flagged", s.flagged},
                   {"small_sample", s.small_sample}});
  }
  return j;
}

std::vector<std::string> OverlapReport::warnings() const {
  std::vector<std::string> out;
  for (const auto& s : strata) {
    if (!s.flagged) continue;
    std::string w = "overlap: stratum n_prim=" + std::to_string(s.n_prim) + " shows " +
                    std::to_string(s.observed_levels) + " of " +
                    std::to_string(s.attainable_levels) + " exposure levels across " +
                    std::to_string(s.units) + " units";
    if (s.small_sample) w += " (small sample)";
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) fail(ErrorCode::InvalidArgument, "median of empty set");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_sorted(const std::vector<double>& v, double q) {
  double pos = q * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1 - frac) + v[hi] * frac;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

using Key = std::pair<std::string, std::string>;  // (estimand:level, method)

}  // namespace

ReportBundle emit_report(const std::map<int, std::vector<ReplicationRow>>& records_by_spec) {
  if (records_by_spec.empty())
    fail(ErrorCode::InvalidArgument, "report needs records for at least one scenario");
  ReportBundle bundle;

  for (const auto& [spec_id, rows] : records_by_spec) {
    ScenarioSpec spec = scenario_by_id(spec_id);
    // Collect estimates and ground truths per (estimand, level, method).
    std::map<std::string, std::vector<double>> series;
    std::map<std::string, std::vector<double>> gt_series;
    for (const auto& row : rows) {
      std::string key = row.estimand + "/" + row.level + "/" + row.method;
      series[key].push_back(row.estimate);
      gt_series[row.estimand + "/" + row.level].push_back(row.ground_truth);
    }
    auto cell = [&](std::map<std::string, double>& cells, const std::string& name,
                    const std::string& key) {
      auto it = series.find(key);
      if (it != series.end()) cells[name] = median_of(it->second);
    };
    auto gt_cell = [&](std::map<std::string, double>& cells, const std::string& name,
                       const std::string& key) {
      auto it = gt_series.find(key);
      if (it != gt_series.end()) cells[name] = median_of(it->second);
    };

    MedianTableRow po{spec_id, spec.target_mean_primary_degree,
                      spec.treatment_probability * 100.0, {}};
    gt_cell(po.cells, "gt", "ptte/outcome");
    cell(po.cells, "basic", "ptte/outcome/basic");
    cell(po.cells, "lp", "ptte/outcome/lp");
    cell(po.cells, "krr", "ptte/outcome/krr");
    cell(po.cells, "proj_gt", "ptte/outcome/proj_gt");
    cell(po.cells, "proj_krr", "ptte/outcome/proj_krr");
    bundle.ptte_outcome.push_back(std::move(po));

    MedianTableRow pt{spec_id, spec.target_mean_primary_degree,
                      spec.treatment_probability * 100.0, {}};
    gt_cell(pt.cells, "gt", "ptte/treatment");
    cell(pt.cells, "basic", "ptte/treatment/basic");
    cell(pt.cells, "lp", "ptte/treatment/lp");
    cell(pt.cells, "krr", "ptte/treatment/krr");
    bundle.ptte_treatment.push_back(std::move(pt));

    MedianTableRow st{spec_id, spec.target_mean_primary_degree,
                      spec.treatment_probability * 100.0, {}};
    gt_cell(st.cells, "gt_outcome", "stte/outcome");
    cell(st.cells, "gbt", "stte/outcome/gbt");
    cell(st.cells, "proj_krr", "stte/outcome/proj_krr");
    gt_cell(st.cells, "gt_treatment", "stte/treatment");
    cell(st.cells, "krr", "stte/treatment/krr");
    bundle.stte.push_back(std::move(st));

    for (const auto& [key, values] : series) {
      if (values.empty()) continue;
      auto slash1 = key.find('/');
      auto slash2 = key.find('/', slash1 + 1);
      BoxplotStat b;
      b.spec_id = spec_id;
      b.estimand = key.substr(0, slash1);
      b.level = key.substr(slash1 + 1, slash2 - slash1 - 1);
      b.method = key.substr(slash2 + 1);
      std::vector<double> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      b.n = sorted.size();
      b.min = sorted.front();
      b.max = sorted.back();
      b.q1 = quantile_sorted(sorted, 0.25);
      b.median = quantile_sorted(sorted, 0.5);
      b.q3 = quantile_sorted(sorted, 0.75);
      double iqr = b.q3 - b.q1;
      for (double v : sorted)
        if (v < b.q1 - 1.5 * iqr || v > b.q3 + 1.5 * iqr) ++b.n_outliers;
      bundle.boxplots.push_back(std::move(b));
    }
  }
  return bundle;
}

namespace {

std::string render_median_table(const std::string& title,
                                const std::vector<std::string>& columns,
                                const std::vector<MedianTableRow>& rows) {
  std::string out = title + "\n";
  out += "spec  degree  %treated";
  for (const auto& c : columns) out += "  " + c;
  out += "\n";
  for (const auto& row : rows) {
    char head[64];
    std::snprintf(head, sizeof(head), "%4d  %6.1f  %8.0f", row.spec_id,
                  row.avg_primary_degree, row.pct_treated);
    out += head;
    for (const auto& c : columns) {
      auto it = row.cells.find(c);
      out += "  ";
      out += it == row.cells.end() ? std::string("-") : fmt2(it->second);
    }
    out += "\n";
  }
  return out;
}

std::string median_table_csv(const std::vector<std::string>& columns,
                             const std::vector<MedianTableRow>& rows) {
  std::string out = "spec,avg_primary_degree,pct_treated";
  for (const auto& c : columns) out += "," + c;
  out += "\n";
  for (const auto& row : rows) {
    out += std::to_string(row.spec_id) + "," + csv::format_double(row.avg_primary_degree) +
           "," + csv::format_double(row.pct_treated);
    for (const auto& c : columns) {
      auto it = row.cells.find(c);
      out += ",";
      if (it != row.cells.end()) out += csv::format_double(it->second);
    }
    out += "\n";
  }
  return out;
}

const std::vector<std::string> kPtteOutcomeCols = {"gt", "basic", "lp", "krr", "proj_gt", "proj_krr"};
const std::vector<std::string> kPtteTreatmentCols = {"gt", "basic", "lp", "krr"};
const std::vector<std::string> kStteCols = {"gt_outcome", "gbt", "proj_krr", "gt_treatment", "krr"};

}  // namespace

std::string ReportBundle::render_text() const {
  std::string out;
  out += render_median_table("PTTE, outcome level (medians)", kPtteOutcomeCols, ptte_outcome);
  out += "\n";
  out += render_median_table("PTTE, treatment level (medians)", kPtteTreatmentCols, ptte_treatment);
  out += "\n";
  out += render_median_table("STTE (medians)", kStteCols, stte);
  return out;
}

void ReportBundle::write(const std::string& dir) const {
  csv::write_file_atomic(dir + "/ptte_outcome_table.csv",
                         median_table_csv(kPtteOutcomeCols, ptte_outcome));
  csv::write_file_atomic(dir + "/ptte_treatment_table.csv",
                         median_table_csv(kPtteTreatmentCols, ptte_treatment));
  csv::write_file_atomic(dir + "/stte_table.csv", median_table_csv(kStteCols, stte));

  std::string box = "spec,estimand,level,method,n,min,q1,median,q3,max,n_outliers\n";
  for (const auto& b : boxplots) {
    box += std::to_string(b.spec_id) + "," + b.estimand + "," + b.level + "," + b.method + "," +
           std::to_string(b.n) + "," + csv::format_double(b.min) + "," +
           csv::format_double(b.q1) + "," + csv::format_double(b.median) + "," +
           csv::format_double(b.q3) + "," + csv::format_double(b.max) + "," +
           std::to_string(b.n_outliers) + "\n";
  }
  csv::write_file_atomic(dir + "/boxplot_summary.csv", box);

  nlohmann::ordered_json j;
  j["schema"] = "blift.report.v1";
  auto table_json = [](const std::vector<MedianTableRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
      nlohmann::ordered_json r;
      r["spec"] = row.spec_id;
      r["avg_primary_degree"] = row.avg_primary_degree;
      r["pct_treated"] = row.pct_treated;
      for (const auto& [k, v] : row.cells) r[k] = v;
      arr.push_back(std::move(r));
    }
    return arr;
  };
  j["ptte_outcome"] = table_json(ptte_outcome);
  j["ptte_treatment"] = table_json(ptte_treatment);
  j["stte"] = table_json(stte);
  csv::write_file_atomic(dir + "/report.json", j.dump(2) + "\n");
}

}  // namespace blift
