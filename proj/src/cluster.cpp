#include "kcsc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "kcsc/error.hpp"

namespace kcsc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kMaxPairSample = 1'000'000;

std::vector<int> seed_groups(const SeedSet& seeds, Index n) {
  std::vector<int> groups(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < seeds.centers.size(); ++c)
    for (Index i : seeds.centers[c]) groups[i] = static_cast<int>(c);
  return groups;
}

std::vector<int> nearest(const Eigen::MatrixXd& d) {
  std::vector<int> labels(static_cast<std::size_t>(d.rows()));
  for (Index i = 0; i < d.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < d.cols(); ++c)
      if (d(i, c) < d(i, best)) best = c;
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

std::vector<Index> cluster_sizes(std::span<const int> labels, int k) {
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[l];
  return sizes;
}

double assigned_cost(const Eigen::MatrixXd& d, std::span<const int> labels) {
  double total = 0.0;
  for (Index i = 0; i < d.rows(); ++i) total += d(i, labels[i]);
  return total;
}

// Moves the point farthest from its centroid into each empty cluster, never
// taking the last member of a cluster. Returns distances for the final labels.
template <class Space>
Eigen::MatrixXd repair_empty(const Space& space, std::vector<int>& labels, int k) {
  Eigen::MatrixXd d = space.centroid_distances(labels, k);
  for (;;) {
    auto sizes = cluster_sizes(labels, k);
    const auto empty = std::find(sizes.begin(), sizes.end(), Index{0});
    if (empty == sizes.end()) return d;
    Index pick = -1;
    double far = -1.0;
    for (Index i = 0; i < d.rows(); ++i) {
      if (sizes[labels[i]] < 2) continue;
      if (d(i, labels[i]) > far) {
        far = d(i, labels[i]);
        pick = i;
      }
    }
    if (pick < 0) throw InvalidArgument("cannot fill empty cluster: too few points");
    labels[pick] = static_cast<int>(empty - sizes.begin());
    d = space.centroid_distances(labels, k);
  }
}

void check_run(Index n, const SeedSet& seeds, int clusters, int max_iter) {
  if (clusters < 1) throw InvalidArgument("k must be at least 1");
  if (clusters > n) throw InvalidArgument(fmt::format("k = {} exceeds n = {}", clusters, n));
  if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  if (static_cast<int>(seeds.size()) != clusters) {
    throw InvalidArgument(fmt::format("{} seed sets given for k = {}", seeds.size(), clusters));
  }
  seeds.validate(n);
}

template <class Space>
Partition lloyd(const Space& space, const SeedSet& seeds, int clusters, int max_iter) {
  const Index n = space.size();
  check_run(n, seeds, clusters, max_iter);
  Eigen::MatrixXd d = space.centroid_distances(seed_groups(seeds, n), clusters);
  Partition part;
  part.k = clusters;
  std::vector<int> previous;
  for (int it = 1; it <= max_iter; ++it) {
    auto labels = nearest(d);
    d = repair_empty(space, labels, clusters);
    part.objective = assigned_cost(d, labels);
    part.trace.push_back(part.objective);
    part.iterations = it;
    const bool converged = labels == previous;
    previous = std::move(labels);
    if (converged) break;
  }
  part.labels = std::move(previous);
  return part;
}

template <class Space>
SeedSet farthest_first(std::span<const std::vector<Index>> components, const Space& space, int clusters) {
  const Index n = space.size();
  if (clusters < 1) throw InvalidArgument("k must be at least 1");
  if (clusters > n) throw InvalidArgument(fmt::format("k = {} exceeds n = {}", clusters, n));
  SeedSet seeds;
  std::vector<int> groups(static_cast<std::size_t>(n), -1);
  for (const auto& comp : components) {
    if (static_cast<int>(seeds.size()) == clusters) break;
    if (comp.size() < 2) continue;
    for (Index i : comp) {
      if (i < 0 || i >= n) throw InvalidArgument("component index out of range");
      groups[i] = static_cast<int>(seeds.size());
    }
    seeds.centers.push_back(comp);
  }
  while (static_cast<int>(seeds.size()) < clusters) {
    Eigen::VectorXd score;
    if (seeds.size() == 0) {
      std::vector<int> everyone(static_cast<std::size_t>(n), 0);
      score = space.centroid_distances(everyone, 1).col(0);
    } else {
      score = space.centroid_distances(groups, static_cast<int>(seeds.size())).rowwise().minCoeff();
    }
    Index pick = -1;
    double best = -kInf;
    for (Index i = 0; i < n; ++i) {
      if (groups[i] >= 0) continue;
      if (score(i) > best) {
        best = score(i);
        pick = i;
      }
    }
    if (pick < 0 || (seeds.size() > 0 && !(best > 1e-12))) {
      throw InvalidArgument(fmt::format("k = {} exceeds the number of distinct points", clusters));
    }
    groups[pick] = static_cast<int>(seeds.size());
    seeds.centers.push_back({pick});
  }
  return seeds;
}

struct Partner {
  Index other;
  bool must_link;
  double weight;
  double distance;
};

template <class Space>
std::vector<std::vector<Partner>> partners(const Space& space, const ConstraintSet& cs) {
  std::vector<std::vector<Partner>> adj(static_cast<std::size_t>(space.size()));
  auto add = [&](const Constraint& c, bool ml) {
    const double d = space.pair_distance(c.i, c.j);
    adj[c.i].push_back({c.j, ml, c.weight, d});
    adj[c.j].push_back({c.i, ml, c.weight, d});
  };
  for (const auto& c : cs.must_link()) add(c, true);
  for (const auto& c : cs.cannot_link()) add(c, false);
  return adj;
}

template <class Space>
double penalty(const Space& space, const ConstraintSet& cs, std::span<const int> labels, double d_max) {
  cs.check_bounds(space.size());
  double g = 0.0;
  for (const auto& c : cs.cannot_link())
    if (labels[c.i] == labels[c.j]) g += c.weight * space.pair_distance(c.i, c.j);
  for (const auto& c : cs.must_link())
    if (labels[c.i] != labels[c.j]) g += c.weight * (d_max - space.pair_distance(c.i, c.j));
  return g;
}

template <class Space>
Partition constrained(const Space& space, const ConstraintSet& cs, const SeedSet& seeds, int clusters, int max_iter,
                      std::uint64_t seed) {
  if (cs.empty()) return lloyd(space, seeds, clusters, max_iter);
  const Index n = space.size();
  check_run(n, seeds, clusters, max_iter);
  cs.check_bounds(n);
  const double d_max = space.max_pair_distance(seed);
  const auto adj = partners(space, cs);

  auto labels = nearest(space.centroid_distances(seed_groups(seeds, n), clusters));
  Eigen::MatrixXd d = repair_empty(space, labels, clusters);
  Partition part;
  part.k = clusters;
  part.objective = assigned_cost(d, labels);
  part.penalty = penalty(space, cs, labels, d_max);
  part.trace.push_back(part.objective + part.penalty);
  part.iterations = 1;

  std::mt19937_64 rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<double> cost(static_cast<std::size_t>(clusters));
  for (int sweep = 1; sweep < max_iter; ++sweep) {
    std::shuffle(order.begin(), order.end(), rng);
    auto sizes = cluster_sizes(labels, clusters);
    Index changed = 0;
    for (Index i : order) {
      const int current = labels[i];
      if (sizes[current] < 2) continue;
      for (int c = 0; c < clusters; ++c) cost[c] = d(i, c);
      for (const auto& p : adj[i]) {
        const int other = labels[p.other];
        for (int c = 0; c < clusters; ++c) {
          if (p.must_link && c != other) cost[c] += p.weight * (d_max - p.distance);
          if (!p.must_link && c == other) cost[c] += p.weight * p.distance;
        }
      }
      const int best = static_cast<int>(std::min_element(cost.begin(), cost.end()) - cost.begin());
      if (best != current && cost[best] < cost[current]) {
        --sizes[current];
        ++sizes[best];
        labels[i] = best;
        ++changed;
      }
    }
    d = space.centroid_distances(labels, clusters);
    part.objective = assigned_cost(d, labels);
    part.penalty = penalty(space, cs, labels, d_max);
    part.trace.push_back(part.objective + part.penalty);
    part.iterations = sweep + 1;
    if (changed == 0) break;
  }
  part.labels = std::move(labels);
  return part;
}

Eigen::MatrixXd standardized_keep_columns(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd out = x.rowwise() - mean;
  for (Index c = 0; c < x.cols(); ++c) {
    const double sd = std::sqrt(out.col(c).squaredNorm() / static_cast<double>(x.rows()));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean(c)))) out.col(c) /= sd;
    else out.col(c).setZero();
  }
  return out;
}

}  // namespace

void SeedSet::validate(Index n) const {
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const auto& set : centers) {
    if (set.empty()) throw InvalidArgument("seed set is empty");
    for (Index i : set) {
      if (i < 0 || i >= n) throw InvalidArgument(fmt::format("seed index {} out of range", i));
      if (seen[i]) throw InvalidArgument(fmt::format("seed index {} appears in two seed sets", i));
      seen[i] = true;
    }
  }
}

GramSpace::GramSpace(const Eigen::MatrixXd& k) : k_(k) {
  if (k.rows() != k.cols()) throw InvalidArgument("Gram matrix must be square");
}

double GramSpace::pair_distance(Index i, Index j) const { return k_(i, i) - 2.0 * k_(i, j) + k_(j, j); }

Eigen::MatrixXd GramSpace::centroid_distances(std::span<const int> groups, int k) const {
  const Index n = size();
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(n, k);
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (Index j = 0; j < n; ++j) {
    if (groups[j] < 0) continue;
    cross.col(groups[j]) += k_.col(j);
    counts[groups[j]] += 1.0;
  }
  std::vector<double> within(static_cast<std::size_t>(k), 0.0);
  for (Index j = 0; j < n; ++j)
    if (groups[j] >= 0) within[groups[j]] += cross(j, groups[j]);
  Eigen::MatrixXd d(n, k);
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0.0) {
      d.col(c).setConstant(kInf);
      continue;
    }
    const double s = counts[c];
    d.col(c) = (k_.diagonal() - (2.0 / s) * cross.col(c)).array() + within[c] / (s * s);
  }
  return d.cwiseMax(0.0);
}

double GramSpace::max_pair_distance(std::uint64_t) const {
  double best = 0.0;
  for (Index j = 0; j < size(); ++j)
    for (Index i = 0; i < j; ++i) best = std::max(best, pair_distance(i, j));
  return best;
}

FeatureSpace::FeatureSpace(std::vector<const Eigen::MatrixXd*> blocks, std::vector<double> weights)
    : blocks_(std::move(blocks)), weights_(std::move(weights)) {
  if (blocks_.empty() || blocks_.size() != weights_.size()) throw InvalidArgument("feature space needs weighted blocks");
  n_ = blocks_.front()->rows();
  self_ = Eigen::VectorXd::Zero(n_);
  for (std::size_t m = 0; m < blocks_.size(); ++m) {
    if (blocks_[m]->rows() != n_) throw InvalidArgument("feature map row counts differ");
    if (!(weights_[m] >= 0.0)) throw InvalidArgument("feature map weights must be nonnegative");
    self_ += weights_[m] * blocks_[m]->rowwise().squaredNorm();
  }
}

double FeatureSpace::pair_distance(Index i, Index j) const {
  double d = 0.0;
  for (std::size_t m = 0; m < blocks_.size(); ++m)
    d += weights_[m] * (blocks_[m]->row(i) - blocks_[m]->row(j)).squaredNorm();
  return d;
}

Eigen::MatrixXd FeatureSpace::centroid_distances(std::span<const int> groups, int k) const {
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (Index i = 0; i < n_; ++i)
    if (groups[i] >= 0) counts[groups[i]] += 1.0;
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(n_, k);
  Eigen::RowVectorXd centroid_norm = Eigen::RowVectorXd::Zero(k);
  for (std::size_t m = 0; m < blocks_.size(); ++m) {
    const auto& z = *blocks_[m];
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, z.cols());
    for (Index i = 0; i < n_; ++i)
      if (groups[i] >= 0) centroids.row(groups[i]) += z.row(i);
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0.0) centroids.row(c) /= counts[c];
    cross.noalias() += weights_[m] * (z * centroids.transpose());
    centroid_norm += weights_[m] * centroids.rowwise().squaredNorm().transpose();
  }
  Eigen::MatrixXd d = (-2.0 * cross).rowwise() + centroid_norm;
  d.colwise() += self_;
  d = d.cwiseMax(0.0);
  for (int c = 0; c < k; ++c)
    if (counts[c] == 0.0) d.col(c).setConstant(kInf);
  return d;
}

double FeatureSpace::max_pair_distance(std::uint64_t seed) const {
  const auto n = static_cast<std::uint64_t>(n_);
  double best = 0.0;
  if (n * (n - 1) / 2 <= kMaxPairSample) {
    for (Index j = 0; j < n_; ++j)
      for (Index i = 0; i < j; ++i) best = std::max(best, pair_distance(i, j));
    return best;
  }
  std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ULL);
  std::uniform_int_distribution<Index> first(0, n_ - 1);
  std::uniform_int_distribution<Index> second(0, n_ - 2);
  for (std::uint64_t t = 0; t < kMaxPairSample; ++t) {
    const Index i = first(rng);
    Index j = second(rng);
    if (j >= i) ++j;
    best = std::max(best, pair_distance(i, j));
  }
  return best;
}

double kernel_distance(const GramMatrix& k, Index i, std::span<const Index> cluster) {
  if (cluster.empty()) throw InvalidArgument("kernel_distance: empty cluster");
  const double s = static_cast<double>(cluster.size());
  double cross = 0.0;
  double within = 0.0;
  for (Index j : cluster) {
    cross += k(i, j);
    for (Index l : cluster) within += k(j, l);
  }
  const double d = k(i, i) - 2.0 * cross / s + within / (s * s);
  return (d < 0.0 && d >= -1e-8) ? 0.0 : d;
}

SeedSet farthest_first_init(std::span<const std::vector<Index>> components, const GramMatrix& k, int clusters) {
  return farthest_first(components, GramSpace(k), clusters);
}
SeedSet farthest_first_init(std::span<const std::vector<Index>> components, const GramSpace& space, int clusters) {
  return farthest_first(components, space, clusters);
}
SeedSet farthest_first_init(std::span<const std::vector<Index>> components, const FeatureSpace& space, int clusters) {
  return farthest_first(components, space, clusters);
}

Partition kernel_kmeans(const GramMatrix& k, const SeedSet& seeds, int clusters, int max_iter) {
  return lloyd(GramSpace(k), seeds, clusters, max_iter);
}
Partition kernel_kmeans(const GramSpace& space, const SeedSet& seeds, int clusters, int max_iter) {
  return lloyd(space, seeds, clusters, max_iter);
}
Partition feature_map_kmeans(const FeatureMap& z, const SeedSet& seeds, int clusters, int max_iter) {
  return lloyd(FeatureSpace(z), seeds, clusters, max_iter);
}
Partition feature_map_kmeans(const FeatureSpace& space, const SeedSet& seeds, int clusters, int max_iter) {
  return lloyd(space, seeds, clusters, max_iter);
}

double constraint_penalty(const GramSpace& space, const ConstraintSet& cs, std::span<const int> labels, double d_max) {
  return penalty(space, cs, labels, d_max);
}
double constraint_penalty(const FeatureSpace& space, const ConstraintSet& cs, std::span<const int> labels,
                          double d_max) {
  return penalty(space, cs, labels, d_max);
}

Partition constrained_kernel_kmeans(const GramMatrix& k, const ConstraintSet& cs, const SeedSet& seeds, int clusters,
                                    int max_iter, std::uint64_t seed) {
  return constrained(GramSpace(k), cs, seeds, clusters, max_iter, seed);
}
Partition constrained_kmeans(const GramSpace& space, const ConstraintSet& cs, const SeedSet& seeds, int clusters,
                             int max_iter, std::uint64_t seed) {
  return constrained(space, cs, seeds, clusters, max_iter, seed);
}
Partition constrained_kmeans(const FeatureSpace& space, const ConstraintSet& cs, const SeedSet& seeds, int clusters,
                             int max_iter, std::uint64_t seed) {
  return constrained(space, cs, seeds, clusters, max_iter, seed);
}

Eigen::MatrixXd mahalanobis_features(const DataMatrix& data, std::span<const double> w) {
  if (static_cast<Index>(w.size()) != data.cols()) {
    throw InvalidArgument(fmt::format("weight vector has {} entries for {} features", w.size(), data.cols()));
  }
  bool any = false;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("Mahalanobis weights must be finite and nonnegative");
    any = any || v > 0.0;
  }
  if (!any) throw InvalidArgument("Mahalanobis weights are all zero");
  Eigen::MatrixXd z = standardized_keep_columns(data.values());
  for (Index c = 0; c < z.cols(); ++c) z.col(c) *= w[c];
  return z;
}

Partition diagonal_mahalanobis_kmeans(const DataMatrix& data, std::span<const double> w, const SeedSet& seeds,
                                      int clusters, int max_iter) {
  const Eigen::MatrixXd z = mahalanobis_features(data, w);
  return lloyd(FeatureSpace(z), seeds, clusters, max_iter);
}

Partition kmeans_baseline(const DataMatrix& data, int clusters, int restarts, std::uint64_t seed, int max_iter) {
  if (restarts < 1) throw InvalidArgument("restarts must be at least 1");
  const Eigen::MatrixXd z = standardized_keep_columns(data.values());
  const FeatureSpace space(z);
  const Index n = space.size();
  if (clusters < 1 || clusters > n) throw InvalidArgument("k outside [1, n]");
  std::mt19937_64 rng(seed);
  Partition best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding.
    SeedSet seeds;
    std::vector<int> groups(static_cast<std::size_t>(n), -1);
    std::uniform_int_distribution<Index> uniform(0, n - 1);
    Index first = uniform(rng);
    seeds.centers.push_back({first});
    groups[first] = 0;
    while (static_cast<int>(seeds.size()) < clusters) {
      Eigen::VectorXd dmin = space.centroid_distances(groups, static_cast<int>(seeds.size())).rowwise().minCoeff();
      for (Index i = 0; i < n; ++i)
        if (groups[i] >= 0) dmin(i) = 0.0;
      const double total = dmin.sum();
      Index pick = -1;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (Index i = 0; i < n; ++i) {
          if (dmin(i) <= 0.0) continue;
          pick = i;
          target -= dmin(i);
          if (target <= 0.0) break;
        }
      }
      if (pick < 0) throw InvalidArgument("k exceeds the number of distinct points");
      groups[pick] = static_cast<int>(seeds.size());
      seeds.centers.push_back({pick});
    }
    auto part = lloyd(space, seeds, clusters, max_iter);
    if (!have || part.objective < best.objective) {
      best = std::move(part);
      have = true;
    }
  }
  return best;
}

}  // namespace kcsc
