#include <algorithm>
#include <cmath>
#include <limits>

#include "blift/common.hpp"
#include "blift/models.hpp"

// Fixed-depth regression-tree boosting, squared loss, no stochastic
// subsampling: exact greedy splits over pre-sorted feature orders, ties broken
// by lowest feature index then lowest threshold, so fitting is deterministic.

namespace blift {

namespace {

struct TreeNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;  // mean residual at the leaf
};

using Tree = std::vector<TreeNode>;

double predict_tree(const Tree& tree, const double* row) {
  int node = 0;
  while (!tree[node].leaf)
    node = row[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
  return tree[node].value;
}

class GbtModel final : public ResponseModel {
 public:
  GbtModel(double base, double learning_rate, std::vector<Tree> trees, GbtConfig config)
      : base_(base), lr_(learning_rate), trees_(std::move(trees)), config_(config) {}

  ModelMethod method() const override { return ModelMethod::GBT; }

  std::vector<double> predict(const Matrix& X) const override {
    std::vector<double> out(X.rows, base_);
    for (size_t r = 0; r < X.rows; ++r) {
      const double* row = X.row(r);
      double acc = 0;
      for (const auto& tree : trees_) acc += predict_tree(tree, row);
      out[r] += lr_ * acc;
    }
    return out;
  }

  nlohmann::ordered_json to_json() const override {
    nlohmann::ordered_json j;
    j["method"] = "gbt";
    j["hyperparameters"] = {{"rounds", config_.rounds},
                            {"depth", config_.depth},
                            {"learning_rate", config_.learning_rate},
                            {"min_samples_leaf", config_.min_samples_leaf}};
    j["base_score"] = base_;
    auto& trees = j["trees"] = nlohmann::ordered_json::array();
    for (const auto& tree : trees_) {
      nlohmann::ordered_json tj = nlohmann::ordered_json::array();
      for (const auto& n : tree)
        tj.push_back({{"leaf", n.leaf},
                      {"feature", n.feature},
                      {"threshold", n.threshold},
                      {"left", n.left},
                      {"right", n.right},
                      {"value", n.value}});
      trees.push_back(std::move(tj));
    }
    return j;
  }

  static std::unique_ptr<ResponseModel> from_json(const nlohmann::json& j) {
    GbtConfig config;
    const auto& h = j.at("hyperparameters");
    config.rounds = h.at("rounds").get<int>();
    config.depth = h.at("depth").get<int>();
    config.learning_rate = h.at("learning_rate").get<double>();
    config.min_samples_leaf = h.at("min_samples_leaf").get<int>();
    std::vector<Tree> trees;
    for (const auto& tj : j.at("trees")) {
      Tree tree;
      for (const auto& n : tj)
        tree.push_back({n.at("leaf").get<bool>(), n.at("feature").get<int>(),
                        n.at("threshold").get<double>(), n.at("left").get<int>(),
                        n.at("right").get<int>(), n.at("value").get<double>()});
      trees.push_back(std::move(tree));
    }
    return std::make_unique<GbtModel>(j.at("base_score").get<double>(),
                                      config.learning_rate, std::move(trees), config);
  }

 private:
  double base_ = 0;
  double lr_ = 0.1;
  std::vector<Tree> trees_;
  GbtConfig config_;
};

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0;
  double gain = 0;
};

// Samples are kept per-feature in globally sorted value order; children
// inherit the order by stable partition, so no re-sorting per node.
struct NodeSamples {
  std::vector<std::vector<uint32_t>> by_feature;
  size_t size() const { return by_feature.empty() ? 0 : by_feature[0].size(); }
};

SplitChoice best_split(const Matrix& X, const std::vector<double>& residual,
                       const NodeSamples& node, int min_leaf) {
  const size_t n = node.size();
  SplitChoice best;
  if (n < static_cast<size_t>(2 * min_leaf)) return best;
  double total = 0;
  for (uint32_t r : node.by_feature[0]) total += residual[r];
  const double parent_score = total * total / static_cast<double>(n);

  for (size_t f = 0; f < X.cols; ++f) {
    const auto& order = node.by_feature[f];
    double left_sum = 0;
    for (size_t pos = 0; pos + 1 < n; ++pos) {
      uint32_t r = order[pos];
      left_sum += residual[r];
      double v = X.at(r, f);
      double v_next = X.at(order[pos + 1], f);
      if (v == v_next) continue;  // only between distinct values
      size_t nl = pos + 1, nr = n - nl;
      if (nl < static_cast<size_t>(min_leaf) || nr < static_cast<size_t>(min_leaf)) continue;
      double right_sum = total - left_sum;
      double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
      double gain = score - parent_score;
      if (gain > best.gain + 1e-12) {
        best.found = true;
        best.feature = static_cast<int>(f);
        best.threshold = v + 0.5 * (v_next - v);
        best.gain = gain;
      }
    }
  }
  return best;
}

void grow(const Matrix& X, const std::vector<double>& residual, NodeSamples node, int depth,
          const GbtConfig& config, Tree& tree, int node_index) {
  const size_t n = node.size();
  double mean = 0;
  for (uint32_t r : node.by_feature[0]) mean += residual[r];
  mean /= static_cast<double>(n);

  SplitChoice split;
  if (depth < config.depth) split = best_split(X, residual, node, config.min_samples_leaf);
  if (!split.found) {
    tree[node_index].leaf = true;
    tree[node_index].value = mean;
    return;
  }

  NodeSamples left, right;
  left.by_feature.resize(X.cols);
  right.by_feature.resize(X.cols);
  for (size_t f = 0; f < X.cols; ++f) {
    for (uint32_t r : node.by_feature[f]) {
      if (X.at(r, split.feature) <= split.threshold)
        left.by_feature[f].push_back(r);
      else
        right.by_feature[f].push_back(r);
    }
  }

  tree[node_index].leaf = false;
  tree[node_index].feature = split.feature;
  tree[node_index].threshold = split.threshold;
  int li = static_cast<int>(tree.size());
  tree.push_back({});
  int ri = static_cast<int>(tree.size());
  tree.push_back({});
  tree[node_index].left = li;
  tree[node_index].right = ri;
  grow(X, residual, std::move(left), depth + 1, config, tree, li);
  grow(X, residual, std::move(right), depth + 1, config, tree, ri);
}

}  // namespace

std::unique_ptr<ResponseModel> fit_gbt(const Matrix& X, const std::vector<double>& y,
                                       const GbtConfig& config) {
  const size_t n = X.rows;
  if (y.size() != n) fail(ErrorCode::InvalidArgument, "gbt: rows/targets mismatch");
  if (n == 0) fail(ErrorCode::Estimation, "gbt: no rows");
  if (config.rounds < 1 || config.depth < 1 || config.learning_rate <= 0)
    fail(ErrorCode::InvalidArgument, "gbt: bad hyperparameters");

  double base = 0;
  for (double v : y) base += v;
  base /= static_cast<double>(n);

  NodeSamples root;
  root.by_feature.resize(X.cols);
  for (size_t f = 0; f < X.cols; ++f) {
    auto& order = root.by_feature[f];
    order.resize(n);
    for (size_t r = 0; r < n; ++r) order[r] = static_cast<uint32_t>(r);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
      double va = X.at(a, f), vb = X.at(b, f);
      return va != vb ? va < vb : a < b;
    });
  }

  std::vector<double> residual(n);
  for (size_t r = 0; r < n; ++r) residual[r] = y[r] - base;

  std::vector<Tree> trees;
  trees.reserve(config.rounds);
  for (int round = 0; round < config.rounds; ++round) {
    Tree tree;
    tree.push_back({});
    grow(X, residual, root, 0, config, tree, 0);
    for (size_t r = 0; r < n; ++r)
      residual[r] -= config.learning_rate * predict_tree(tree, X.row(r));
    trees.push_back(std::move(tree));
  }
  return std::make_unique<GbtModel>(base, config.learning_rate, std::move(trees), config);
}

std::unique_ptr<ResponseModel> gbt_from_json(const nlohmann::json& j) {
  return GbtModel::from_json(j);
}

}  // namespace blift
