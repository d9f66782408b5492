#pragma once

// Reference implementations written directly from the definitions, used to
// cross-check the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kcsc/dataio.hpp"

namespace oracle {

using kcsc::Index;

struct PairCounts {
  double a = 0;  // same in both
  double b = 0;  // same in pred only
  double c = 0;  // same in truth only
  double d = 0;  // different in both
};

inline PairCounts pair_counts(const std::vector<int>& pred, const std::vector<int>& truth) {
  PairCounts p;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      const bool sp = pred[i] == pred[j];
      const bool st = truth[i] == truth[j];
      if (sp && st) p.a += 1;
      else if (sp) p.b += 1;
      else if (st) p.c += 1;
      else p.d += 1;
    }
  return p;
}

/// Hubert-Arabie adjusted Rand index from the four pair counts.
inline double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  const auto p = pair_counts(pred, truth);
  const double denom = (p.a + p.b) * (p.b + p.d) + (p.a + p.c) * (p.c + p.d);
  if (denom == 0.0) return 1.0;
  return 2.0 * (p.a * p.d - p.b * p.c) / denom;
}

inline double pairwise_f(const std::vector<int>& pred, const std::vector<int>& truth) {
  const auto p = pair_counts(pred, truth);
  if (p.a + p.b == 0.0 && p.a + p.c == 0.0) return 1.0;
  if (p.a == 0.0) return 0.0;
  const double precision = p.a / (p.a + p.b);
  const double recall = p.a / (p.a + p.c);
  return 2.0 * precision * recall / (precision + recall);
}

/// Walks every unordered pair of points and looks it up in the constraint lists.
inline double reward(const std::vector<int>& labels, const kcsc::ConstraintSet& cs) {
  std::map<std::pair<Index, Index>, std::pair<bool, double>> lookup;
  for (const auto& c : cs.must_link()) lookup[{c.i, c.j}] = {true, c.weight};
  for (const auto& c : cs.cannot_link()) lookup[{c.i, c.j}] = {false, c.weight};
  double satisfied = 0.0;
  double pairs = 0.0;
  const auto n = static_cast<Index>(labels.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      auto it = lookup.find({i, j});
      if (it == lookup.end()) continue;
      pairs += 1.0;
      const bool same = labels[i] == labels[j];
      if (it->second.first == same) satisfied += it->second.second;
    }
  return satisfied / pairs;
}

/// tr(K) - sum_c sum_{i,j in S_c} K_ij / |S_c|.
inline double kernel_objective(const Eigen::MatrixXd& k, const std::vector<int>& labels, int clusters) {
  double total = k.trace();
  for (int c = 0; c < clusters; ++c) {
    std::vector<Index> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(static_cast<Index>(i));
    if (members.empty()) continue;
    double s = 0.0;
    for (Index i : members)
      for (Index j : members) s += k(i, j);
    total -= s / static_cast<double>(members.size());
  }
  return total;
}

/// Violated cannot-links add w d_ij, violated must-links add w (d_max - d_ij).
inline double penalty(const Eigen::MatrixXd& k, const kcsc::ConstraintSet& cs, const std::vector<int>& labels,
                      double d_max) {
  auto dist = [&](Index i, Index j) { return k(i, i) - 2.0 * k(i, j) + k(j, j); };
  double g = 0.0;
  for (const auto& c : cs.cannot_link())
    if (labels[c.i] == labels[c.j]) g += c.weight * dist(c.i, c.j);
  for (const auto& c : cs.must_link())
    if (labels[c.i] != labels[c.j]) g += c.weight * (d_max - dist(c.i, c.j));
  return g;
}

struct LloydResult {
  std::vector<int> labels;
  double objective = 0.0;
};

/// Plain Lloyd k-means on explicit coordinates. Centroids start at the seed
/// means; ties go to the lowest cluster; an empty cluster receives the point
/// farthest from its own centroid among clusters with at least two members.
inline LloydResult lloyd(const Eigen::MatrixXd& x, const std::vector<std::vector<Index>>& seeds, int max_iter) {
  const Index n = x.rows();
  const int k = static_cast<int>(seeds.size());
  Eigen::MatrixXd centroids(k, x.cols());
  for (int c = 0; c < k; ++c) {
    centroids.row(c).setZero();
    for (Index i : seeds[c]) centroids.row(c) += x.row(i);
    centroids.row(c) /= static_cast<double>(seeds[c].size());
  }
  auto recompute = [&](const std::vector<int>& labels) {
    Eigen::MatrixXd cen = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<double> count(k, 0.0);
    for (Index i = 0; i < n; ++i) {
      cen.row(labels[i]) += x.row(i);
      count[labels[i]] += 1;
    }
    for (int c = 0; c < k; ++c)
      if (count[c] > 0) cen.row(c) /= count[c];
    return cen;
  };
  std::vector<int> labels;
  std::vector<int> previous;
  for (int it = 0; it < max_iter; ++it) {
    labels.assign(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centroids.row(c)).squaredNorm();
        if (d < best) {
          best = d;
          labels[i] = c;
        }
      }
    }
    for (;;) {
      std::vector<int> size(k, 0);
      for (int l : labels) ++size[l];
      int empty = -1;
      for (int c = 0; c < k && empty < 0; ++c)
        if (size[c] == 0) empty = c;
      if (empty < 0) break;
      const auto cen = recompute(labels);
      Index pick = -1;
      double far = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (size[labels[i]] < 2) continue;
        const double d = (x.row(i) - cen.row(labels[i])).squaredNorm();
        if (d > far) {
          far = d;
          pick = i;
        }
      }
      labels[pick] = empty;
    }
    centroids = recompute(labels);
    if (labels == previous) break;
    previous = labels;
  }
  LloydResult r;
  r.labels = labels;
  for (Index i = 0; i < n; ++i) r.objective += (x.row(i) - centroids.row(labels[i])).squaredNorm();
  return r;
}

inline Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x;
  for (Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    double var = 0.0;
    for (Index i = 0; i < x.rows(); ++i) var += (x(i, c) - mean) * (x(i, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) z(i, c) = sd > 0 ? (x(i, c) - mean) / sd : 0.0;
  }
  return z;
}

/// Cluster labels drawn uniformly, then patched so that every cluster is used.
inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> u(0, k - 1);
  std::vector<int> labels(n);
  for (auto& l : labels) l = u(rng);
  for (int c = 0; c < k && static_cast<std::size_t>(c) < n; ++c) labels[c] = c;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

/// Random symmetric PSD matrix of the given size and rank.
inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, Index n, Index rank) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, rank);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rank; ++j) a(i, j) = g(rng);
  return a * a.transpose();
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Index n, Index d) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = g(rng);
  return a;
}

}  // namespace oracle
