#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "blift/common.hpp"
#include "blift/models.hpp"

// Kernel ridge regression with a Gaussian kernel on standardized features and
// an unpenalized linear mean term (universal-kriging form):
//
//   f(x) = [1, x]' beta + sum_t alpha_t k(x, x_t),
//   min ||y - X beta - K alpha||^2 + ridge * alpha' K alpha.
//
// The linear part carries the global trend, which is what makes
// counterfactual feature points far outside the observed cloud (the
// treatment-level full-deployment exposures) behave; the kernel part picks up
// curvature where there is support. (bandwidth, ridge) are selected by k-fold
// cross-validation over a fixed log grid centered at the median pairwise
// distance. Fits cap the training set with a seeded subsample so cost does
// not grow cubically with the table.

namespace blift {

namespace {

struct CvEntry {
  double bandwidth = 0;
  double ridge = 0;
  double mse = 0;
};

class KrrModel final : public ResponseModel {
 public:
  KrrModel(std::vector<double> means, std::vector<double> sds, Matrix train_std,
           std::vector<double> alpha, std::vector<double> beta, double bandwidth, double ridge,
           std::vector<CvEntry> cv_table, nlohmann::ordered_json hyper)
      : means_(std::move(means)),
        sds_(std::move(sds)),
        train_(std::move(train_std)),
        alpha_(std::move(alpha)),
        beta_(std::move(beta)),
        bandwidth_(bandwidth),
        ridge_(ridge),
        cv_table_(std::move(cv_table)),
        hyper_(std::move(hyper)) {}

  ModelMethod method() const override { return ModelMethod::KRR; }

  std::vector<double> predict(const Matrix& X) const override {
    if (X.cols != means_.size())
      fail(ErrorCode::InvalidArgument, "krr: feature count mismatch at prediction");
    const double inv2b2 = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    std::vector<double> out(X.rows, 0.0);
    std::vector<double> xstd(X.cols);
    for (size_t r = 0; r < X.rows; ++r) {
      const double* row = X.row(r);
      double acc = beta_[0];
      for (size_t c = 0; c < X.cols; ++c) {
        xstd[c] = (row[c] - means_[c]) / sds_[c];
        acc += beta_[c + 1] * xstd[c];
      }
      for (size_t t = 0; t < train_.rows; ++t) {
        const double* tr = train_.row(t);
        double d2 = 0;
        for (size_t c = 0; c < X.cols; ++c) {
          double d = xstd[c] - tr[c];
          d2 += d * d;
        }
        acc += alpha_[t] * std::exp(-d2 * inv2b2);
      }
      out[r] = acc;
    }
    return out;
  }

  nlohmann::ordered_json to_json() const override {
    nlohmann::ordered_json j;
    j["method"] = "krr";
    j["hyperparameters"] = hyper_;
    j["selected"] = {{"bandwidth", bandwidth_}, {"ridge", ridge_}};
    auto& cv = j["cv_table"] = nlohmann::ordered_json::array();
    for (const auto& e : cv_table_)
      cv.push_back({{"bandwidth", e.bandwidth}, {"ridge", e.ridge}, {"mse", e.mse}});
    j["standardization"] = {{"means", means_}, {"sds", sds_}};
    j["beta"] = beta_;
    j["train"] = {{"rows", train_.rows}, {"cols", train_.cols}, {"data", train_.data}};
    j["alpha"] = alpha_;
    return j;
  }

  static std::unique_ptr<ResponseModel> from_json(const nlohmann::json& j) {
    Matrix train;
    train.rows = j.at("train").at("rows").get<size_t>();
    train.cols = j.at("train").at("cols").get<size_t>();
    train.data = j.at("train").at("data").get<std::vector<double>>();
    std::vector<CvEntry> cv;
    for (const auto& e : j.at("cv_table"))
      cv.push_back({e.at("bandwidth").get<double>(), e.at("ridge").get<double>(),
                    e.at("mse").get<double>()});
    nlohmann::ordered_json hyper = j.at("hyperparameters");
    return std::make_unique<KrrModel>(
        j.at("standardization").at("means").get<std::vector<double>>(),
        j.at("standardization").at("sds").get<std::vector<double>>(), std::move(train),
        j.at("alpha").get<std::vector<double>>(), j.at("beta").get<std::vector<double>>(),
        j.at("selected").at("bandwidth").get<double>(),
        j.at("selected").at("ridge").get<double>(), std::move(cv), std::move(hyper));
  }

 private:
  std::vector<double> means_, sds_;
  Matrix train_;  // standardized
  std::vector<double> alpha_;
  std::vector<double> beta_;  // intercept + one slope per standardized feature
  double bandwidth_ = 1;
  double ridge_ = 0;
  std::vector<CvEntry> cv_table_;
  nlohmann::ordered_json hyper_;
};

Eigen::MatrixXd squared_distances(const Matrix& pts) {
  const size_t n = pts.rows;
  Eigen::MatrixXd d2(n, n);
  for (size_t a = 0; a < n; ++a) {
    d2(a, a) = 0;
    for (size_t b = a + 1; b < n; ++b) {
      double acc = 0;
      const double* ra = pts.row(a);
      const double* rb = pts.row(b);
      for (size_t c = 0; c < pts.cols; ++c) {
        double d = ra[c] - rb[c];
        acc += d * d;
      }
      d2(a, b) = acc;
      d2(b, a) = acc;
    }
  }
  return d2;
}

// Solves the partially penalized system for (beta, alpha) given the factored
// regularized kernel: beta = (X'AX)^-1 X'Ay, alpha = A(y - X beta) with
// A = (K + ridge I)^-1.
struct MeanKernelFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
};

MeanKernelFit solve_mean_kernel(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                const Eigen::MatrixXd& Xlin, const Eigen::VectorXd& y) {
  Eigen::VectorXd Ay = llt.solve(y);
  Eigen::MatrixXd AX = llt.solve(Xlin);
  Eigen::MatrixXd M = Xlin.transpose() * AX;
  M.diagonal().array() += 1e-10;  // zero-variance feature columns
  MeanKernelFit fit;
  fit.beta = M.ldlt().solve(Xlin.transpose() * Ay);
  fit.alpha = Ay - AX * fit.beta;
  return fit;
}

}  // namespace

std::unique_ptr<ResponseModel> fit_krr(const Matrix& X, const std::vector<double>& y,
                                       const KrrConfig& config, uint64_t seed) {
  const size_t n = X.rows;
  const size_t d = X.cols;
  if (y.size() != n) fail(ErrorCode::InvalidArgument, "krr: rows/targets mismatch");
  if (config.cv_folds < 2) fail(ErrorCode::InvalidArgument, "krr: cv_folds must be >= 2");
  if (n < static_cast<size_t>(config.cv_folds))
    fail(ErrorCode::Estimation, "krr: empty CV fold (" + std::to_string(n) + " rows for " +
                                    std::to_string(config.cv_folds) + " folds)");

  // Standardization over the full table, frozen for counterfactual prediction.
  std::vector<double> means(d, 0.0), sds(d, 1.0);
  for (size_t c = 0; c < d; ++c) {
    double m = 0;
    for (size_t r = 0; r < n; ++r) m += X.at(r, c);
    m /= n;
    double v = 0;
    for (size_t r = 0; r < n; ++r) {
      double dd = X.at(r, c) - m;
      v += dd * dd;
    }
    v /= n;
    means[c] = m;
    sds[c] = v > 0 ? std::sqrt(v) : 1.0;
  }

  // One shuffled permutation; the final fit takes the head, CV a shorter head.
  std::vector<uint32_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = static_cast<uint32_t>(i);
  std::mt19937_64 rng(seed);
  for (size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  const size_t n_train = std::min<size_t>(n, std::max(1, config.max_train));
  const size_t n_cv = std::min<size_t>(n, std::max(config.cv_folds, config.cv_subsample));
  std::vector<uint32_t> train_ix(perm.begin(), perm.begin() + n_train);
  std::vector<uint32_t> cv_ix(perm.begin(), perm.begin() + n_cv);
  std::sort(train_ix.begin(), train_ix.end());
  std::sort(cv_ix.begin(), cv_ix.end());

  auto standardized = [&](const std::vector<uint32_t>& ix) {
    Matrix m = Matrix::zeros(ix.size(), d);
    for (size_t r = 0; r < ix.size(); ++r)
      for (size_t c = 0; c < d; ++c) m.at(r, c) = (X.at(ix[r], c) - means[c]) / sds[c];
    return m;
  };
  Matrix cv_pts = standardized(cv_ix);
  Eigen::MatrixXd cv_d2 = squared_distances(cv_pts);

  // Median pairwise distance on the CV subsample sets the bandwidth scale.
  std::vector<double> dists;
  dists.reserve(n_cv * (n_cv - 1) / 2);
  for (size_t a = 0; a < n_cv; ++a)
    for (size_t b = a + 1; b < n_cv; ++b) dists.push_back(std::sqrt(cv_d2(a, b)));
  double median_dist = 1.0;
  if (!dists.empty()) {
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    median_dist = dists[dists.size() / 2];
    if (median_dist <= 0) median_dist = 1.0;
  }
  std::vector<double> bandwidths;
  int half = config.bandwidth_grid / 2;
  for (int g = 0; g < config.bandwidth_grid; ++g)
    bandwidths.push_back(median_dist * std::pow(2.0, g - half));

  // Round-robin folds over the shuffled CV subsample.
  std::vector<int> fold_of(n_cv);
  for (size_t i = 0; i < n_cv; ++i) fold_of[i] = static_cast<int>(i % config.cv_folds);
  std::vector<double> y_cv(n_cv);
  for (size_t i = 0; i < n_cv; ++i) y_cv[i] = y[cv_ix[i]];

  std::vector<CvEntry> cv_table;
  double best_mse = std::numeric_limits<double>::infinity();
  double best_bw = bandwidths.front(), best_ridge = config.ridge_grid.front();

  std::vector<size_t> tr_rows, va_rows;
  for (double bw : bandwidths) {
    const double inv2b2 = 1.0 / (2.0 * bw * bw);
    std::vector<double> sse(config.ridge_grid.size(), 0.0);
    for (int f = 0; f < config.cv_folds; ++f) {
      tr_rows.clear();
      va_rows.clear();
      for (size_t i = 0; i < n_cv; ++i) (fold_of[i] == f ? va_rows : tr_rows).push_back(i);
      if (tr_rows.empty() || va_rows.empty())
        fail(ErrorCode::Estimation, "krr: empty CV fold");
      const size_t nt = tr_rows.size();
      Eigen::MatrixXd K(nt, nt);
      for (size_t a = 0; a < nt; ++a)
        for (size_t b = 0; b <= a; ++b) {
          double k = std::exp(-cv_d2(tr_rows[a], tr_rows[b]) * inv2b2);
          K(a, b) = k;
          K(b, a) = k;
        }
      Eigen::MatrixXd Xlin(nt, d + 1);
      Eigen::VectorXd yt(nt);
      for (size_t a = 0; a < nt; ++a) {
        Xlin(a, 0) = 1.0;
        for (size_t c = 0; c < d; ++c) Xlin(a, c + 1) = cv_pts.at(tr_rows[a], c);
        yt(a) = y_cv[tr_rows[a]];
      }
      for (size_t ri = 0; ri < config.ridge_grid.size(); ++ri) {
        Eigen::MatrixXd Kr = K;
        Kr.diagonal().array() += config.ridge_grid[ri];
        auto llt = Kr.llt();
        MeanKernelFit fit = solve_mean_kernel(llt, Xlin, yt);
        for (size_t v : va_rows) {
          double pred = fit.beta(0);
          for (size_t c = 0; c < d; ++c) pred += fit.beta(c + 1) * cv_pts.at(v, c);
          for (size_t a = 0; a < nt; ++a)
            pred += fit.alpha(a) * std::exp(-cv_d2(v, tr_rows[a]) * inv2b2);
          double err = pred - y_cv[v];
          sse[ri] += err * err;
        }
      }
    }
    for (size_t ri = 0; ri < config.ridge_grid.size(); ++ri) {
      double mse = sse[ri] / n_cv;
      cv_table.push_back({bw, config.ridge_grid[ri], mse});
      if (mse < best_mse) {
        best_mse = mse;
        best_bw = bw;
        best_ridge = config.ridge_grid[ri];
      }
    }
  }

  // Final fit on the (possibly larger) training subsample.
  Matrix train_std = standardized(train_ix);
  const double inv2b2 = 1.0 / (2.0 * best_bw * best_bw);
  Eigen::MatrixXd K(n_train, n_train);
  for (size_t a = 0; a < n_train; ++a) {
    const double* ra = train_std.row(a);
    for (size_t b = 0; b <= a; ++b) {
      const double* rb = train_std.row(b);
      double d2 = 0;
      for (size_t c = 0; c < d; ++c) {
        double dd = ra[c] - rb[c];
        d2 += dd * dd;
      }
      double k = std::exp(-d2 * inv2b2);
      K(a, b) = k;
      K(b, a) = k;
    }
  }
  K.diagonal().array() += best_ridge;
  Eigen::MatrixXd Xlin(n_train, d + 1);
  Eigen::VectorXd yt(n_train);
  for (size_t a = 0; a < n_train; ++a) {
    Xlin(a, 0) = 1.0;
    for (size_t c = 0; c < d; ++c) Xlin(a, c + 1) = train_std.at(a, c);
    yt(a) = y[train_ix[a]];
  }
  auto llt = K.llt();
  MeanKernelFit fit = solve_mean_kernel(llt, Xlin, yt);
  std::vector<double> alpha_v(fit.alpha.data(), fit.alpha.data() + n_train);
  std::vector<double> beta_v(fit.beta.data(), fit.beta.data() + d + 1);
  for (double a : alpha_v)
    if (!std::isfinite(a)) fail(ErrorCode::Estimation, "krr: non-finite dual weights");
  for (double b : beta_v)
    if (!std::isfinite(b)) fail(ErrorCode::Estimation, "krr: non-finite mean coefficients");

  nlohmann::ordered_json hyper;
  hyper["cv_folds"] = config.cv_folds;
  hyper["bandwidth_grid"] = bandwidths;
  hyper["ridge_grid"] = config.ridge_grid;
  hyper["cv_subsample"] = n_cv;
  hyper["max_train"] = n_train;
  hyper["median_pairwise_distance"] = median_dist;
  hyper["seed"] = seed;

  return std::make_unique<KrrModel>(std::move(means), std::move(sds), std::move(train_std),
                                    std::move(alpha_v), std::move(beta_v), best_bw, best_ridge,
                                    std::move(cv_table), std::move(hyper));
}

std::unique_ptr<ResponseModel> krr_from_json(const nlohmann::json& j) {
  return KrrModel::from_json(j);
}

}  // namespace blift
