#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace blift {

/// Row-major dense matrix with named columns.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  static Matrix zeros(size_t r, size_t c) { return Matrix{r, c, std::vector<double>(r * c, 0.0)}; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }
  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  const double* row(size_t r) const { return data.data() + r * cols; }
};

enum class ModelMethod { LP, KRR, GBT };
std::string method_name(ModelMethod m);
ModelMethod parse_method(const std::string& name);

struct KrrConfig {
  int cv_folds = 5;
  int bandwidth_grid = 7;  // log2-spaced around the median pairwise distance
  std::vector<double> ridge_grid = {1e-7, 1e-5, 1e-3, 1e-1, 10.0};
  int cv_subsample = 500;
  int max_train = 2000;
};

struct GbtConfig {
  int rounds = 200;
  int depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
};

struct MlConfig {
  KrrConfig krr;
  GbtConfig gbt;
};

/// Explicit least-squares basis: products of named feature columns.
struct LpBasis {
  struct Term {
    int a = -1;  // column index, -1 for the intercept
    int b = -1;  // second factor, -1 for a linear term
    std::string name;
  };
  std::vector<Term> terms;
};

/// A fitted response surface. Prediction is a pure function of the feature
/// row; models are immutable after fitting and safe to share across threads.
class ResponseModel {
 public:
  virtual ~ResponseModel() = default;
  virtual ModelMethod method() const = 0;
  /// X must carry the same columns, in the same order, as the training data.
  virtual std::vector<double> predict(const Matrix& X) const = 0;
  /// Dump sufficient to reproduce predictions bit-for-bit via from_json.
  virtual nlohmann::ordered_json to_json() const = 0;

  static std::unique_ptr<ResponseModel> from_json(const nlohmann::json& j);
};

std::unique_ptr<ResponseModel> fit_lp(const Matrix& X, const std::vector<double>& y,
                                      const LpBasis& basis);
std::unique_ptr<ResponseModel> fit_krr(const Matrix& X, const std::vector<double>& y,
                                       const KrrConfig& config, uint64_t seed);
std::unique_ptr<ResponseModel> fit_gbt(const Matrix& X, const std::vector<double>& y,
                                       const GbtConfig& config);

}  // namespace blift
