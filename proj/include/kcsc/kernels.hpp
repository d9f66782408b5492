#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcsc/dataio.hpp"

namespace kcsc {

enum class KernelFamily { rbf, laplace, polynomial, sigmoid, linear };
enum class DataView { raw, standardized };

std::string to_string(KernelFamily family);
std::string to_string(DataView view);
KernelFamily parse_family(const std::string& name);
DataView parse_view(const std::string& name);

/// One base kernel.
///
///   rbf         exp(-|x-y|^2 / (2 width^2))
///   laplace     exp(-width * |x-y|_1)
///   polynomial  (x.y + offset)^degree
///   sigmoid     tanh(width * x.y + offset)
///   linear      x.y
struct KernelDescriptor {
  KernelFamily family = KernelFamily::linear;
  DataView view = DataView::raw;
  double width = 1.0;
  int degree = 0;
  double offset = 0.0;
  /// Grid multiplier that produced `width` (informational).
  double factor = 1.0;

  void validate() const;
  std::string name() const;
  /// Families whose Gram matrices are not guaranteed PSD.
  bool may_be_indefinite() const;

  friend bool operator==(const KernelDescriptor&, const KernelDescriptor&) = default;
};

/// Kernel values between the rows of `a` and the rows of `b`.
Eigen::MatrixXd kernel_matrix(const KernelDescriptor& desc, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct MedianHeuristics {
  double euclidean = 0.0;
  double manhattan = 0.0;
  double inner_product = 0.0;
};

/// Medians over row pairs i < j. Exact when n(n-1)/2 <= max_pairs, otherwise
/// estimated from max_pairs uniformly drawn pairs.
MedianHeuristics median_heuristics(const Eigen::MatrixXd& x, std::size_t max_pairs = 1'000'000,
                                   std::uint64_t seed = 0);
MedianHeuristics median_heuristics(const DataMatrix& data, std::size_t max_pairs = 1'000'000,
                                   std::uint64_t seed = 0);

/// Features seen by kernels of the given view. Standardized drops
/// zero-variance columns (reported through `dropped`).
Eigen::MatrixXd view_matrix(const DataMatrix& data, DataView view, std::vector<Index>* dropped = nullptr);

/// Symmetric PSD kernel matrix with the scale applied at normalization.
class GramMatrix {
 public:
  explicit GramMatrix(Eigen::MatrixXd values, std::optional<KernelDescriptor> descriptor = std::nullopt,
                      double scale = 1.0, double shift = 0.0);

  /// Symmetrizes, shifts by delta*I when the smallest eigenvalue is negative,
  /// then rescales so that trace == n.
  static GramMatrix normalized(Eigen::MatrixXd raw, std::optional<KernelDescriptor> descriptor);

  Index size() const { return values_.rows(); }
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(Index i, Index j) const { return values_(i, j); }
  const std::optional<KernelDescriptor>& descriptor() const { return descriptor_; }
  double scale() const { return scale_; }
  /// Diagonal shift applied by normalized(), before scaling.
  double shift() const { return shift_; }

 private:
  Eigen::MatrixXd values_;
  std::optional<KernelDescriptor> descriptor_;
  double scale_ = 1.0;
  double shift_ = 0.0;
};

/// Explicit rank-q feature map Z with Z Z^T approximating a Gram matrix.
struct FeatureMap {
  Eigen::MatrixXd values;
  std::optional<KernelDescriptor> descriptor;
  double scale = 1.0;
  double shift = 0.0;
  std::vector<Index> landmarks;

  Index rows() const { return values.rows(); }
  Index rank() const { return values.cols(); }
};

/// Combination weights in [0,1]^p with at least one nonzero entry.
class BetaVector {
 public:
  explicit BetaVector(std::vector<double> weights);
  static BetaVector one_hot(std::size_t p, std::size_t index, double value = 1.0);

  std::size_t size() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::vector<std::size_t> support() const;
  std::size_t nonzeros() const;
  /// Throws InvalidArgument when more than `sparsity` entries are nonzero.
  void check_sparsity(std::size_t sparsity) const;

  friend bool operator==(const BetaVector&, const BetaVector&) = default;

 private:
  std::vector<double> weights_;
};

/// Factor grid and family selection for the base kernels.
struct BankGrid {
  std::vector<double> factors = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<KernelFamily> families = {KernelFamily::rbf, KernelFamily::laplace, KernelFamily::polynomial,
                                        KernelFamily::sigmoid, KernelFamily::linear};
  std::vector<DataView> views = {DataView::raw, DataView::standardized};
  std::vector<int> degrees = {2, 3};
  std::size_t median_max_pairs = 1'000'000;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const BankGrid&, const BankGrid&) = default;
};

struct ViewInfo {
  DataView view = DataView::raw;
  MedianHeuristics medians;
  std::vector<Index> dropped_features;
};

/// Descriptors for every base kernel implied by the grid, in bank order:
/// per view, rbf x factors, laplace x factors, polynomial x degrees,
/// sigmoid x factors, linear.
std::vector<KernelDescriptor> bank_descriptors(const DataMatrix& data, const BankGrid& grid,
                                               std::vector<ViewInfo>* views = nullptr);

struct KernelBank {
  std::vector<GramMatrix> grams;
  std::vector<ViewInfo> views;

  std::size_t size() const { return grams.size(); }
  Index rows() const { return grams.empty() ? 0 : grams.front().size(); }
};

struct MapBank {
  std::vector<FeatureMap> maps;
  std::vector<ViewInfo> views;

  std::size_t size() const { return maps.size(); }
  Index rows() const { return maps.empty() ? 0 : maps.front().rows(); }
};

KernelBank build_bank(const DataMatrix& data, const BankGrid& grid = {});

/// Bank of Nystrom maps (rank min(q, n) each), trace-normalized like build_bank.
/// Never forms an n x n matrix.
MapBank build_map_bank(const DataMatrix& data, const BankGrid& grid, Index rank, std::uint64_t seed);

/// K = sum_i beta_i G_i over the nonzero weights.
GramMatrix combine(const KernelBank& bank, const BetaVector& beta);

/// Nystrom feature map from q landmarks drawn without replacement. The
/// landmark Gram W is inverted through its eigendecomposition with
/// eigenvalues below 1e-10 * lambda_max discarded, so Z has one column per
/// retained eigenvalue.
FeatureMap nystrom_map(const Eigen::MatrixXd& x, const KernelDescriptor& desc, Index q, std::uint64_t seed);
FeatureMap nystrom_map(const DataMatrix& data, const KernelDescriptor& desc, Index q, std::uint64_t seed);

/// Horizontal concatenation of sqrt(beta_i) Z_i over the nonzero weights.
FeatureMap combined_feature_map(std::span<const FeatureMap> maps, const BetaVector& beta);

/// Smallest eigenvalue of a symmetric matrix. Exact up to `exact_limit`
/// rows, shifted power iteration beyond.
double min_eigenvalue(const Eigen::MatrixXd& sym, Index exact_limit = 2000);

}  // namespace kcsc
