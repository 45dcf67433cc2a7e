#include "blift/projection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "blift/common.hpp"
#include "blift/rng.hpp"

namespace blift {

ProjectionInfo projection_factor(const BipartiteGraph& graph, Estimand estimand) {
  ProjectionInfo info;
  info.estimand = estimand;
  if (estimand == Estimand::PTTE) {
    info.numerator = graph.primary_units().size();
    info.denominator = graph.o_prim().size();
    info.source_level = level_name(Level::Treatment);
  } else {
    info.numerator = graph.secondary_units().size();
    info.denominator = graph.o_both().size();
    info.source_level = level_name(Level::SecondaryTreatment);
  }
  if (info.denominator == 0)
    fail(ErrorCode::Validation,
         estimand == Estimand::PTTE
             ? "projection undefined: no outcome units connect to a primary unit"
             : "projection undefined: no outcome units connect to both primary and secondary units");
  info.factor = static_cast<double>(info.numerator) / static_cast<double>(info.denominator);
  return info;
}

EffectEstimate project_effect(const EffectEstimate& estimate, const BipartiteGraph& graph,
                              bool assume_edge_additivity) {
  if (!assume_edge_additivity)
    fail(ErrorCode::Validation,
         "projection requires the edge-additivity assertion; refusing to project a "
         "potentially non-additive metric");
  Level expected = estimate.estimand == Estimand::PTTE ? Level::Treatment
                                                       : Level::SecondaryTreatment;
  if (estimate.level != expected)
    fail(ErrorCode::InvalidArgument, "projection expects a treatment-level estimate, got " +
                                         level_name(estimate.level));
  ProjectionInfo info = projection_factor(graph, estimate.estimand);

  EffectEstimate out = estimate;
  out.level = estimate.estimand == Estimand::PTTE ? Level::Outcome : Level::SecondaryOutcome;
  out.method = "proj_" + estimate.method;
  out.estimate = estimate.estimate * info.factor;
  out.population = info.denominator;
  out.projection = info;
  if (out.interval) {
    out.interval->lo = estimate.interval->lo * info.factor;
    out.interval->hi = estimate.interval->hi * info.factor;
  }
  return out;
}

namespace {

// Linear-interpolation empirical quantile on a sorted copy.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0;
  if (sorted.size() == 1) return sorted[0];
  double pos = q * static_cast<double>(sorted.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

void compute_interval(BootstrapResult& r) {
  std::vector<double> sorted = r.replicates;
  std::sort(sorted.begin(), sorted.end());
  r.lo = quantile_sorted(sorted, (1.0 - r.confidence) / 2.0);
  r.hi = quantile_sorted(sorted, (1.0 + r.confidence) / 2.0);
}

}  // namespace

BootstrapResult bootstrap_ci(const std::function<double(std::span<const uint32_t>)>& refit,
                             uint32_t population_size, int B, double confidence, uint64_t seed,
                             int jobs) {
  if (B < 2) fail(ErrorCode::InvalidArgument, "bootstrap: B must be >= 2");
  if (confidence <= 0 || confidence >= 1)
    fail(ErrorCode::InvalidArgument, "bootstrap: confidence must be in (0,1)");
  if (population_size == 0) fail(ErrorCode::InvalidArgument, "bootstrap: empty population");

  std::vector<double> values(B, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(B);

  auto run_one = [&](int b) {
    std::mt19937_64 rng(derive_seed(seed, Stream::Bootstrap, static_cast<uint64_t>(b)));
    std::uniform_int_distribution<uint32_t> pick(0, population_size - 1);
    std::vector<uint32_t> sample(population_size);
    for (auto& s : sample) s = pick(rng);
    try {
      values[b] = refit(sample);
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  };

  if (jobs > 1 && B > 1) {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int b = next.fetch_add(1); b < B; b = next.fetch_add(1)) run_one(b);
    };
    std::vector<std::thread> pool;
    int n_threads = std::min(jobs, B);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    for (int b = 0; b < B; ++b) run_one(b);
  }

  BootstrapResult result;
  result.requested_B = B;
  result.confidence = confidence;
  result.seed = seed;
  std::string first_error;
  for (int b = 0; b < B; ++b) {
    if (std::isnan(values[b]) && !errors[b].empty()) {
      ++result.failures;
      if (first_error.empty()) first_error = errors[b];
    } else {
      result.replicates.push_back(values[b]);
    }
  }
  if (result.failures * 5 > B) {
    fail(ErrorCode::Estimation,
         "bootstrap aborted: " + std::to_string(result.failures) + " of " + std::to_string(B) +
             " replicates failed (first failure: " + first_error + ")");
  }
  compute_interval(result);
  return result;
}

void requantile(BootstrapResult& result, double confidence) {
  if (confidence <= 0 || confidence >= 1)
    fail(ErrorCode::InvalidArgument, "bootstrap: confidence must be in (0,1)");
  result.confidence = confidence;
  compute_interval(result);
}

BootstrapResult project_replicates(const BootstrapResult& result, const ProjectionInfo& info) {
  BootstrapResult out = result;
  for (auto& v : out.replicates) v *= info.factor;
  compute_interval(out);
  return out;
}

double bootstrap_std_error(const BootstrapResult& result) {
  const auto& v = result.replicates;
  if (v.size() < 2) return 0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

nlohmann::ordered_json bootstrap_to_json(const BootstrapResult& r) {
  nlohmann::ordered_json j;
  j["schema"] = "blift.bootstrap.v1";
  j["B"] = r.requested_B;
  j["failures"] = r.failures;
  j["confidence"] = r.confidence;
  j["seed"] = r.seed;
  j["interval"] = {{"lo", r.lo}, {"hi", r.hi}};
  j["replicates"] = r.replicates;
  return j;
}

}  // namespace blift
