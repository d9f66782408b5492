#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kcsc/dataio.hpp"
#include "kcsc/kernels.hpp"

namespace kcsc {

/// Cluster labels in {0..k-1} plus the achieved objective.
struct Partition {
  std::vector<int> labels;
  int k = 0;
  /// Kernel k-means objective tr(K) - sum_c sum_{i,j in S_c} K_ij / |S_c|.
  double objective = 0.0;
  /// Constraint penalty g(K, S); zero for unconstrained runs.
  double penalty = 0.0;
  int iterations = 0;
  /// objective (+ penalty) after every iteration or sweep.
  std::vector<double> trace;
};

/// Disjoint, nonempty index sets that act as initial pseudo-centroids.
struct SeedSet {
  std::vector<std::vector<Index>> centers;

  std::size_t size() const { return centers.size(); }
  /// Throws InvalidArgument on empty, overlapping or out-of-range sets.
  void validate(Index n) const;
};

/// Squared distances between implicit feature vectors given as a Gram matrix.
class GramSpace {
 public:
  explicit GramSpace(const Eigen::MatrixXd& k);
  explicit GramSpace(const GramMatrix& k) : GramSpace(k.values()) {}

  Index size() const { return k_.rows(); }
  double pair_distance(Index i, Index j) const;
  /// n x k matrix of squared distances from every point to the mean of each
  /// group (groups[i] == -1 leaves i unassigned). Empty groups get +inf.
  Eigen::MatrixXd centroid_distances(std::span<const int> groups, int k) const;
  double max_pair_distance(std::uint64_t seed) const;

 private:
  const Eigen::MatrixXd& k_;
};

/// Squared distances in an explicit space formed by weighted feature maps,
/// phi(x) = [sqrt(w_1) z_1(x), ..., sqrt(w_m) z_m(x)], without concatenating them.
class FeatureSpace {
 public:
  FeatureSpace(std::vector<const Eigen::MatrixXd*> blocks, std::vector<double> weights);
  explicit FeatureSpace(const Eigen::MatrixXd& z) : FeatureSpace({&z}, {1.0}) {}
  explicit FeatureSpace(const FeatureMap& z) : FeatureSpace(z.values) {}

  Index size() const { return n_; }
  double pair_distance(Index i, Index j) const;
  Eigen::MatrixXd centroid_distances(std::span<const int> groups, int k) const;
  /// Exact when n(n-1)/2 <= 10^6, otherwise the maximum over 10^6 sampled pairs.
  double max_pair_distance(std::uint64_t seed) const;

 private:
  std::vector<const Eigen::MatrixXd*> blocks_;
  std::vector<double> weights_;
  Eigen::VectorXd self_;
  Index n_ = 0;
};

/// K_ii - (2/|S|) sum_{j in S} K_ij + (1/|S|^2) sum_{j,l in S} K_jl, with
/// values in [-1e-8, 0) clamped to zero.
double kernel_distance(const GramMatrix& k, Index i, std::span<const Index> cluster);

/// Seeds from the up-to-k largest must-link components (size >= 2), topped up
/// with singletons by farthest-first traversal: each new seed maximizes its
/// minimum distance to the existing seed centroids. With no seeds yet, the
/// point farthest from the global mean is taken. Ties go to the lowest index.
SeedSet farthest_first_init(std::span<const std::vector<Index>> components, const GramMatrix& k, int clusters);
SeedSet farthest_first_init(std::span<const std::vector<Index>> components, const GramSpace& space, int clusters);
SeedSet farthest_first_init(std::span<const std::vector<Index>> components, const FeatureSpace& space,
                            int clusters);

/// Lloyd iterations in kernel space until no label changes or max_iter.
Partition kernel_kmeans(const GramMatrix& k, const SeedSet& seeds, int clusters, int max_iter = 100);
Partition kernel_kmeans(const GramSpace& space, const SeedSet& seeds, int clusters, int max_iter = 100);
/// Same iteration with explicit centroids in the map space.
Partition feature_map_kmeans(const FeatureMap& z, const SeedSet& seeds, int clusters, int max_iter = 100);
Partition feature_map_kmeans(const FeatureSpace& space, const SeedSet& seeds, int clusters, int max_iter = 100);

/// Sum over violated cannot-links of w * d(i,j) plus over violated must-links
/// of w * (d_max - d(i,j)), where d is the feature-space squared distance.
double constraint_penalty(const GramSpace& space, const ConstraintSet& cs, std::span<const int> labels,
                          double d_max);
double constraint_penalty(const FeatureSpace& space, const ConstraintSet& cs, std::span<const int> labels,
                          double d_max);

/// Kernel k-means with the constraint penalty added to the objective.
/// Each sweep visits points in a seeded random order and moves each to the
/// cluster minimizing distance + penalty against its partners' current labels;
/// centroids are refreshed after each sweep. A move that would empty a
/// cluster is not taken.
Partition constrained_kernel_kmeans(const GramMatrix& k, const ConstraintSet& cs, const SeedSet& seeds, int clusters,
                                    int max_iter = 100, std::uint64_t seed = 0);
Partition constrained_kmeans(const GramSpace& space, const ConstraintSet& cs, const SeedSet& seeds, int clusters,
                             int max_iter = 100, std::uint64_t seed = 0);
Partition constrained_kmeans(const FeatureSpace& space, const ConstraintSet& cs, const SeedSet& seeds, int clusters,
                             int max_iter = 100, std::uint64_t seed = 0);

/// Standardized features with column j scaled by w_j.
Eigen::MatrixXd mahalanobis_features(const DataMatrix& data, std::span<const double> w);

/// Lloyd k-means on standardized data scaled column-wise by w.
Partition diagonal_mahalanobis_kmeans(const DataMatrix& data, std::span<const double> w, const SeedSet& seeds,
                                      int clusters, int max_iter = 100);

/// Plain k-means on standardized data with k-means++ seeding; the restart with
/// the lowest objective wins.
Partition kmeans_baseline(const DataMatrix& data, int clusters, int restarts, std::uint64_t seed,
                          int max_iter = 100);

}  // namespace kcsc
