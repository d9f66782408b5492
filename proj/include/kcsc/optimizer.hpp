#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kcsc/cluster.hpp"
#include "kcsc/dataio.hpp"
#include "kcsc/forest.hpp"
#include "kcsc/kernels.hpp"

namespace kcsc {

/// Fraction of constraints a labeling satisfies:
/// (sum_ML w [l_i == l_j] + sum_CL w [l_i != l_j]) / (|ML| + |CL|).
/// The denominator is the pair count even with non-unit weights.
double reward(std::span<const int> labels, const ConstraintSet& cs);
inline double reward(const Partition& p, const ConstraintSet& cs) { return reward(p.labels, cs); }

/// Evaluated candidates in order, with the earliest maximal reward tracked.
class History {
 public:
  struct Entry {
    BetaVector beta;
    double reward;
  };

  void append(BetaVector beta, double reward);
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// Index of the earliest entry with maximal reward; requires !empty().
  std::size_t best_index() const { return best_; }
  const Entry& best() const { return entries_.at(best_); }

 private:
  std::vector<Entry> entries_;
  std::size_t best_ = 0;
};

enum class Strategy { smbo, random };
std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct OptimizerConfig {
  int max_iters = 100;
  std::size_t sparsity = 5;
  double kappa = 1.0;
  /// Random proposals before the first surrogate fit.
  int warmup = 10;
  std::size_t candidate_pool = 512;
  /// Stop after this many iterations without improvement.
  std::optional<int> patience;
  std::uint64_t seed = 0;
  /// Kernel k-means runs per candidate; restarts beyond the first draw the
  /// non-component seeds at random.
  int restarts = 1;
  int kmeans_max_iter = 100;
  ForestOptions forest;

  void validate() const;
  friend bool operator==(const OptimizerConfig& a, const OptimizerConfig& b);
};

using SurrogateModel = RandomForest;
using Prediction = RandomForest::Prediction;

/// Draws from {beta in [0,1]^p : |beta|_0 <= c}: support size uniform on
/// {1..c}, support uniform without replacement, values uniform on (0,1].
std::vector<BetaVector> sample_sparse(std::size_t p, std::size_t c, std::size_t count, std::uint64_t seed);
/// Dense vectors uniform on (0,1]^d.
std::vector<BetaVector> sample_dense(std::size_t d, std::size_t count, std::uint64_t seed);

/// Index of argmax mu + kappa * sigma; ties go to the earliest candidate.
std::size_t ucb_argmax(std::span<const Prediction> predictions, double kappa);
const BetaVector& ucb_select(const SurrogateModel& g, const std::vector<BetaVector>& candidates, double kappa);

SurrogateModel fit_surrogate(const History& history, std::uint64_t seed, ForestOptions options = {});

struct CscResult {
  Partition partition;
  BetaVector beta = BetaVector({1.0});
  double reward = 0.0;
  History history;
  SeedSet seeds;
};

/// Clusters under a candidate weight vector; returns the partition and the seeds used.
using CandidateEvaluator = std::function<std::pair<Partition, SeedSet>(const BetaVector&, int restart)>;
/// Proposes `count` candidates from the search domain.
using CandidateSampler = std::function<std::vector<BetaVector>(std::size_t count, std::uint64_t seed)>;

/// Search loop shared by every variant: propose, cluster, score, record.
CscResult optimize(const CandidateSampler& sampler, const CandidateEvaluator& evaluate, const ConstraintSet& cs,
                   const OptimizerConfig& cfg, Strategy strategy);

/// Kernel learning over exact Gram matrices.
CscResult run_csc(const KernelBank& bank, const ConstraintSet& cs, int k, const OptimizerConfig& cfg,
                  Strategy strategy);
/// Kernel learning over Nystrom feature maps; memory stays O(p q n).
CscResult run_csc(const MapBank& bank, const ConstraintSet& cs, int k, const OptimizerConfig& cfg,
                  Strategy strategy);
/// Diagonal Mahalanobis variant: dense w in [0,1]^d, Lloyd k-means on the
/// standardized data scaled by w.
CscResult run_mahalanobis_csc(const DataMatrix& data, const ConstraintSet& cs, int k, const OptimizerConfig& cfg,
                              Strategy strategy);

struct SingleKernelResult {
  std::size_t index = 0;
  Partition partition;
  double reward = 0.0;
  std::vector<double> rewards;
};

/// Picks the one base kernel whose clustering maximizes the reward.
SingleKernelResult select_single_kernel(const KernelBank& bank, const ConstraintSet& cs, int k,
                                        const OptimizerConfig& cfg);
SingleKernelResult select_single_kernel(const MapBank& bank, const ConstraintSet& cs, int k,
                                        const OptimizerConfig& cfg);

}  // namespace kcsc
