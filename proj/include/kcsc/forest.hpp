#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kcsc {

struct ForestOptions {
  int trees = 100;
  /// 0 means unlimited depth.
  int max_depth = 0;
  int min_samples_leaf = 1;
  bool bootstrap = true;
};

/// Regression forest whose per-tree predictions give a mean and a spread.
class RandomForest {
 public:
  struct Prediction {
    double mean = 0.0;
    double sd = 0.0;
  };

  explicit RandomForest(ForestOptions options = {}) : options_(options) {}

  /// Rows of `x` are samples; all rows must share one dimension.
  void fit(const std::vector<std::vector<double>>& x, std::span<const double> y, std::uint64_t seed);
  Prediction predict(std::span<const double> x) const;
  bool fitted() const { return !trees_.empty(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  int grow(Tree& tree, const std::vector<std::vector<double>>& x, std::span<const double> y, std::vector<int>& rows,
           int begin, int end, int depth) const;
  static double predict_tree(const Tree& tree, std::span<const double> x);

  ForestOptions options_;
  std::vector<Tree> trees_;
  std::size_t dim_ = 0;
};

}  // namespace kcsc
