#include "blift/models.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "blift/common.hpp"

namespace blift {

std::string method_name(ModelMethod m) {
  switch (m) {
    case ModelMethod::LP: return "lp";
    case ModelMethod::KRR: return "krr";
    case ModelMethod::GBT: return "gbt";
  }
  return "?";
}

ModelMethod parse_method(const std::string& name) {
  if (name == "lp") return ModelMethod::LP;
  if (name == "krr") return ModelMethod::KRR;
  if (name == "gbt") return ModelMethod::GBT;
  fail(ErrorCode::InvalidArgument, "unknown model method: " + name);
}

namespace {

class LpModel final : public ResponseModel {
 public:
  LpModel(LpBasis basis, std::vector<double> coef, int rank, double condition)
      : basis_(std::move(basis)), coef_(std::move(coef)), rank_(rank), condition_(condition) {}

  ModelMethod method() const override { return ModelMethod::LP; }

  std::vector<double> predict(const Matrix& X) const override {
    std::vector<double> out(X.rows, 0.0);
    for (size_t r = 0; r < X.rows; ++r) {
      const double* row = X.row(r);
      double acc = 0;
      for (size_t t = 0; t < basis_.terms.size(); ++t) {
        const auto& term = basis_.terms[t];
        double v = 1.0;
        if (term.a >= 0) v = row[term.a];
        if (term.b >= 0) v *= row[term.b];
        acc += coef_[t] * v;
      }
      out[r] = acc;
    }
    return out;
  }

  nlohmann::ordered_json to_json() const override {
    nlohmann::ordered_json j;
    j["method"] = "lp";
    auto& terms = j["basis"] = nlohmann::ordered_json::array();
    for (const auto& t : basis_.terms)
      terms.push_back({{"name", t.name}, {"a", t.a}, {"b", t.b}});
    j["coefficients"] = coef_;
    j["diagnostics"] = {{"rank", rank_}, {"condition", condition_}};
    return j;
  }

  static std::unique_ptr<ResponseModel> from_json(const nlohmann::json& j) {
    LpBasis basis;
    for (const auto& t : j.at("basis"))
      basis.terms.push_back({t.at("a").get<int>(), t.at("b").get<int>(),
                             t.at("name").get<std::string>()});
    return std::make_unique<LpModel>(std::move(basis),
                                     j.at("coefficients").get<std::vector<double>>(),
                                     j.at("diagnostics").at("rank").get<int>(),
                                     j.at("diagnostics").at("condition").get<double>());
  }

 private:
  LpBasis basis_;
  std::vector<double> coef_;
  int rank_ = 0;
  double condition_ = 0;
};

}  // namespace

std::unique_ptr<ResponseModel> fit_lp(const Matrix& X, const std::vector<double>& y,
                                      const LpBasis& basis) {
  const size_t n = X.rows;
  const size_t t = basis.terms.size();
  if (y.size() != n) fail(ErrorCode::InvalidArgument, "lp: rows/targets mismatch");
  if (n < t) fail(ErrorCode::Estimation, "lp: fewer rows than basis terms");

  Eigen::MatrixXd D(n, t);
  for (size_t r = 0; r < n; ++r) {
    const double* row = X.row(r);
    for (size_t c = 0; c < t; ++c) {
      const auto& term = basis.terms[c];
      double v = 1.0;
      if (term.a >= 0) v = row[term.a];
      if (term.b >= 0) v *= row[term.b];
      D(r, c) = v;
    }
  }
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  const auto& R = qr.matrixR();
  double rmax = 0, rmin = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < t; ++c) {
    double d = std::abs(R(c, c));
    rmax = std::max(rmax, d);
    rmin = std::min(rmin, d);
  }
  double condition = rmin > 0 ? rmax / rmin : std::numeric_limits<double>::infinity();
  int rank = static_cast<int>(qr.rank());
  if (rank < static_cast<int>(t)) {
    fail(ErrorCode::Estimation,
         "lp: singular design matrix (rank " + std::to_string(rank) + " of " +
             std::to_string(t) + ", condition ~" + std::to_string(condition) + ")");
  }
  Eigen::VectorXd beta = qr.solve(yv);
  std::vector<double> coef(beta.data(), beta.data() + t);
  for (double c : coef)
    if (!std::isfinite(c)) fail(ErrorCode::Estimation, "lp: non-finite coefficients");
  return std::make_unique<LpModel>(basis, std::move(coef), rank, condition);
}

std::unique_ptr<ResponseModel> krr_from_json(const nlohmann::json& j);
std::unique_ptr<ResponseModel> gbt_from_json(const nlohmann::json& j);
std::unique_ptr<ResponseModel> lp_from_json_impl(const nlohmann::json& j) {
  return LpModel::from_json(j);
}

std::unique_ptr<ResponseModel> ResponseModel::from_json(const nlohmann::json& j) {
  std::string m = j.at("method").get<std::string>();
  if (m == "lp") return lp_from_json_impl(j);
  if (m == "krr") return krr_from_json(j);
  if (m == "gbt") return gbt_from_json(j);
  fail(ErrorCode::Parse, "model dump: unknown method " + m);
}

}  // namespace blift
