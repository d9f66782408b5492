#include "kcsc/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kcsc/error.hpp"

namespace kcsc {

void RandomForest::fit(const std::vector<std::vector<double>>& x, std::span<const double> y, std::uint64_t seed) {
  if (x.empty() || x.size() != y.size()) throw InvalidArgument("forest fit needs matching non-empty x and y");
  if (options_.trees < 1) throw InvalidArgument("forest needs at least one tree");
  dim_ = x.front().size();
  for (const auto& row : x)
    if (row.size() != dim_) throw InvalidArgument("forest rows have different dimensions");

  trees_.clear();
  trees_.reserve(static_cast<std::size_t>(options_.trees));
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(x.size());
  std::uniform_int_distribution<int> draw(0, n - 1);
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int t = 0; t < options_.trees; ++t) {
    if (options_.bootstrap) {
      for (auto& r : rows) r = draw(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    Tree tree;
    grow(tree, x, y, rows, 0, n, 0);
    trees_.push_back(std::move(tree));
  }
}

int RandomForest::grow(Tree& tree, const std::vector<std::vector<double>>& x, std::span<const double> y,
                       std::vector<int>& rows, int begin, int end, int depth) const {
  const int id = static_cast<int>(tree.size());
  tree.emplace_back();
  const int count = end - begin;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int t = begin; t < end; ++t) {
    sum += y[rows[t]];
    sum_sq += y[rows[t]] * y[rows[t]];
  }
  tree[id].value = sum / count;
  const double node_sse = sum_sq - sum * sum / count;
  const bool depth_left = options_.max_depth <= 0 || depth < options_.max_depth;
  if (count < 2 * options_.min_samples_leaf || node_sse <= 1e-14 * std::max(1.0, sum_sq) || !depth_left) return id;

  // Exhaustive best split by SSE reduction over every feature.
  int best_feature = -1;
  double best_threshold = 0.0;
  double best_sse = node_sse;
  std::vector<std::pair<double, double>> column(static_cast<std::size_t>(count));
  for (std::size_t f = 0; f < dim_; ++f) {
    for (int t = 0; t < count; ++t) column[t] = {x[rows[begin + t]][f], y[rows[begin + t]]};
    std::sort(column.begin(), column.end());
    if (column.front().first == column.back().first) continue;
    double left_sum = 0.0;
    double left_sq = 0.0;
    for (int t = 0; t + 1 < count; ++t) {
      left_sum += column[t].second;
      left_sq += column[t].second * column[t].second;
      const int nl = t + 1;
      const int nr = count - nl;
      if (nl < options_.min_samples_leaf || nr < options_.min_samples_leaf) continue;
      if (column[t].first == column[t + 1].first) continue;
      const double right_sum = sum - left_sum;
      const double right_sq = sum_sq - left_sq;
      const double sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
      if (sse < best_sse - 1e-15) {
        best_sse = sse;
        best_feature = static_cast<int>(f);
        best_threshold = 0.5 * (column[t].first + column[t + 1].first);
      }
    }
  }
  if (best_feature < 0) return id;

  const auto mid_it = std::partition(rows.begin() + begin, rows.begin() + end,
                                     [&](int r) { return x[r][best_feature] <= best_threshold; });
  const int mid = static_cast<int>(mid_it - rows.begin());
  const int left = grow(tree, x, y, rows, begin, mid, depth + 1);
  const int right = grow(tree, x, y, rows, mid, end, depth + 1);
  tree[id].feature = best_feature;
  tree[id].threshold = best_threshold;
  tree[id].left = left;
  tree[id].right = right;
  return id;
}

double RandomForest::predict_tree(const Tree& tree, std::span<const double> x) {
  int node = 0;
  while (tree[node].feature >= 0) node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
  return tree[node].value;
}

RandomForest::Prediction RandomForest::predict(std::span<const double> x) const {
  if (trees_.empty()) throw InvalidArgument("forest is not fitted");
  if (x.size() != dim_) throw InvalidArgument("forest query has the wrong dimension");
  std::vector<double> values;
  values.reserve(trees_.size());
  for (const auto& tree : trees_) values.push_back(predict_tree(tree, x));
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return {values.front(), 0.0};
  }
  const double m = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / m)};
}

}  // namespace kcsc
