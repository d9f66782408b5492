#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kcsc {

using Index = Eigen::Index;

/// n x d feature matrix with optional ground-truth labels and train membership.
///
/// Values must be finite, n >= 2 and d >= 1. Immutable after construction;
/// with_train_mask() returns a modified copy.
class DataMatrix {
 public:
  explicit DataMatrix(Eigen::MatrixXd values, std::optional<std::vector<int>> labels = std::nullopt,
                      std::optional<std::vector<bool>> train_mask = std::nullopt);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  const std::optional<std::vector<bool>>& train_mask() const { return train_mask_; }

  /// Number of distinct labels; 0 when unlabeled.
  int num_classes() const;
  std::vector<Index> train_indices() const;
  std::vector<Index> test_indices() const;

  DataMatrix with_train_mask(std::vector<bool> mask) const;

 private:
  Eigen::MatrixXd values_;
  std::optional<std::vector<int>> labels_;
  std::optional<std::vector<bool>> train_mask_;
};

struct Constraint {
  Index i = 0;
  Index j = 0;
  double weight = 1.0;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Weighted must-link / cannot-link pairs.
///
/// Pairs are stored canonically (i < j) and sorted. Construction rejects
/// self-pairs, non-positive weights, duplicates and pairs present in both lists.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(std::vector<Constraint> must_link, std::vector<Constraint> cannot_link);

  const std::vector<Constraint>& must_link() const { return must_link_; }
  const std::vector<Constraint>& cannot_link() const { return cannot_link_; }
  std::size_t size() const { return must_link_.size() + cannot_link_.size(); }
  bool empty() const { return size() == 0; }
  /// Largest referenced row index, or -1 for an empty set.
  Index max_index() const;
  /// Throws InvalidArgument if any index is >= n.
  void check_bounds(Index n) const;

  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;

 private:
  std::vector<Constraint> must_link_;
  std::vector<Constraint> cannot_link_;
};

struct SplitSpec {
  double train_fraction = 0.25;
  double pair_fraction = 0.10;
  std::size_t max_pairs = 5000;
  std::uint64_t seed = 0;

  /// Checks ranges and that train_fraction * n >= k.
  void validate(Index n, int k) const;
};

/// Reads a delimiter-separated table (tab or comma, auto-detected) with a
/// header row. The label column is removed from the features.
DataMatrix load_dataset(const std::filesystem::path& path, const std::string& label_column = "target");
void save_dataset(const DataMatrix& data, const std::filesystem::path& path,
                  const std::string& label_column = "target");

/// Stratified train/test split using largest-remainder rounding per class.
DataMatrix stratified_split(const DataMatrix& data, const SplitSpec& spec);

/// Draws min(ceil(pair_fraction * T), max_pairs) distinct pairs among the
/// T = t(t-1)/2 pairs of train rows; same label gives must-link.
ConstraintSet sample_constraints(const DataMatrix& data, const SplitSpec& spec);

/// Transitive closure of must-links plus cannot-links entailed between the
/// must-link components of each cannot-link pair.
ConstraintSet augment_constraints(const ConstraintSet& cs);

/// Components of the must-link graph over {0..n-1}; size descending, ties by
/// smallest member. Members are sorted ascending.
std::vector<std::vector<Index>> connected_components(const ConstraintSet& cs, Index n);

/// `i<TAB>j<TAB>{ML|CL}<TAB>weight`, one pair per line.
ConstraintSet read_constraints(const std::filesystem::path& path);
void write_constraints(const ConstraintSet& cs, const std::filesystem::path& path);

/// Column-wise z-scoring with population standard deviation. Columns with zero
/// variance are dropped; their original indices are appended to `dropped`.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, std::vector<Index>* dropped = nullptr);

}  // namespace kcsc
