#include "kcsc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "kcsc/error.hpp"
#include "kcsc/seeding.hpp"

namespace kcsc {

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t { kProposal = 1, kPool = 2, kForest = 3, kRestart = 4 };

SeedSet random_seeds(std::span<const std::vector<Index>> components, Index n, int k, std::uint64_t seed) {
  SeedSet seeds;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (const auto& comp : components) {
    if (static_cast<int>(seeds.size()) == k) break;
    if (comp.size() < 2) continue;
    for (Index i : comp) used[i] = true;
    seeds.centers.push_back(comp);
  }
  std::vector<Index> free;
  for (Index i = 0; i < n; ++i)
    if (!used[i]) free.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(free.begin(), free.end(), rng);
  for (std::size_t t = 0; static_cast<int>(seeds.size()) < k; ++t) {
    if (t >= free.size()) throw InvalidArgument("not enough points for random seeding");
    seeds.centers.push_back({free[t]});
  }
  return seeds;
}

std::uint64_t beta_tag(const BetaVector& beta) {
  std::uint64_t h = 0;
  for (double w : beta.weights()) h = mix64(h ^ static_cast<std::uint64_t>(std::llround(w * 1e15)));
  return h;
}

Partition lloyd_in(const GramSpace& s, const SeedSet& seeds, int k, int max_iter) {
  return kernel_kmeans(s, seeds, k, max_iter);
}
Partition lloyd_in(const FeatureSpace& s, const SeedSet& seeds, int k, int max_iter) {
  return feature_map_kmeans(s, seeds, k, max_iter);
}

template <class Space>
std::pair<Partition, SeedSet> cluster_in(const Space& space, std::span<const std::vector<Index>> components, int k,
                                         int restart, const OptimizerConfig& cfg, const BetaVector& beta) {
  SeedSet seeds = restart == 0
                      ? farthest_first_init(components, space, k)
                      : random_seeds(components, space.size(), k,
                                     derive_seed(cfg.seed, kRestart ^ (beta_tag(beta) + static_cast<std::uint64_t>(restart))));
  auto part = lloyd_in(space, seeds, k, cfg.kmeans_max_iter);
  return {std::move(part), std::move(seeds)};
}

}  // namespace

double reward(std::span<const int> labels, const ConstraintSet& cs) {
  if (cs.empty()) throw InvalidArgument("reward needs at least one constraint");
  if (cs.max_index() >= static_cast<Index>(labels.size())) {
    throw InvalidArgument("labels do not cover every constrained index");
  }
  double satisfied = 0.0;
  for (const auto& c : cs.must_link())
    if (labels[c.i] == labels[c.j]) satisfied += c.weight;
  for (const auto& c : cs.cannot_link())
    if (labels[c.i] != labels[c.j]) satisfied += c.weight;
  return satisfied / static_cast<double>(cs.size());
}

void History::append(BetaVector beta, double reward) {
  entries_.push_back({std::move(beta), reward});
  if (entries_.size() == 1 || reward > entries_[best_].reward) best_ = entries_.size() - 1;
}

std::string to_string(Strategy s) { return s == Strategy::smbo ? "smbo" : "random"; }

Strategy parse_strategy(const std::string& s) {
  if (s == "smbo") return Strategy::smbo;
  if (s == "random") return Strategy::random;
  throw ConfigError(fmt::format("unknown strategy '{}' (expected smbo or random)", s));
}

void OptimizerConfig::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (sparsity < 1) throw ConfigError("sparsity must be at least 1");
  if (!(kappa >= 0.0)) throw ConfigError("kappa must be nonnegative");
  if (warmup < 0) throw ConfigError("warmup must be nonnegative");
  if (candidate_pool < 1) throw ConfigError("candidate_pool must be at least 1");
  if (patience && *patience < 1) throw ConfigError("patience must be at least 1");
  if (restarts < 1) throw ConfigError("restarts must be at least 1");
  if (kmeans_max_iter < 1) throw ConfigError("kmeans_max_iter must be at least 1");
  if (forest.trees < 1) throw ConfigError("forest needs at least one tree");
}

bool operator==(const OptimizerConfig& a, const OptimizerConfig& b) {
  return a.max_iters == b.max_iters && a.sparsity == b.sparsity && a.kappa == b.kappa && a.warmup == b.warmup &&
         a.candidate_pool == b.candidate_pool && a.patience == b.patience && a.seed == b.seed &&
         a.restarts == b.restarts && a.kmeans_max_iter == b.kmeans_max_iter && a.forest.trees == b.forest.trees &&
         a.forest.max_depth == b.forest.max_depth && a.forest.min_samples_leaf == b.forest.min_samples_leaf &&
         a.forest.bootstrap == b.forest.bootstrap;
}

std::vector<BetaVector> sample_sparse(std::size_t p, std::size_t c, std::size_t count, std::uint64_t seed) {
  if (c < 1 || c > p) throw InvalidArgument(fmt::format("sparsity {} outside [1, {}]", c, p));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> support_size(1, c);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> indices(p);
  std::vector<BetaVector> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t m = support_size(rng);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    for (std::size_t t = 0; t < m; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, p - 1);
      std::swap(indices[t], indices[pick(rng)]);
    }
    std::vector<double> w(p, 0.0);
    for (std::size_t t = 0; t < m; ++t) w[indices[t]] = 1.0 - unit(rng);
    out.emplace_back(std::move(w));
  }
  return out;
}

std::vector<BetaVector> sample_dense(std::size_t d, std::size_t count, std::uint64_t seed) {
  if (d < 1) throw InvalidArgument("dense samples need at least one dimension");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BetaVector> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> w(d);
    for (auto& v : w) v = 1.0 - unit(rng);
    out.emplace_back(std::move(w));
  }
  return out;
}

std::size_t ucb_argmax(std::span<const Prediction> predictions, double kappa) {
  if (predictions.empty()) throw InvalidArgument("ucb_select needs at least one candidate");
  std::size_t best = 0;
  double best_value = predictions[0].mean + kappa * predictions[0].sd;
  for (std::size_t i = 1; i < predictions.size(); ++i) {
    const double v = predictions[i].mean + kappa * predictions[i].sd;
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

const BetaVector& ucb_select(const SurrogateModel& g, const std::vector<BetaVector>& candidates, double kappa) {
  std::vector<Prediction> predictions;
  predictions.reserve(candidates.size());
  for (const auto& c : candidates) predictions.push_back(g.predict(c.weights()));
  return candidates[ucb_argmax(predictions, kappa)];
}

SurrogateModel fit_surrogate(const History& history, std::uint64_t seed, ForestOptions options) {
  if (history.empty()) throw InvalidArgument("cannot fit a surrogate to an empty history");
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  x.reserve(history.size());
  y.reserve(history.size());
  for (const auto& e : history.entries()) {
    x.push_back(e.beta.weights());
    y.push_back(e.reward);
  }
  SurrogateModel g(options);
  g.fit(x, y, seed);
  return g;
}

CscResult optimize(const CandidateSampler& sampler, const CandidateEvaluator& evaluate, const ConstraintSet& cs,
                   const OptimizerConfig& cfg, Strategy strategy) {
  cfg.validate();
  if (cs.empty()) throw InvalidArgument("kernel learning needs at least one constraint");
  std::optional<CscResult> best;
  History history;
  int since_improvement = 0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const auto tag = static_cast<std::uint64_t>(iter);
    std::optional<BetaVector> candidate;
    if (strategy == Strategy::random || iter < cfg.warmup) {
      candidate = sampler(1, derive_seed(cfg.seed, (kProposal << 32) + tag)).front();
    } else {
      const auto g = fit_surrogate(history, derive_seed(cfg.seed, (kForest << 32) + tag), cfg.forest);
      const auto pool = sampler(cfg.candidate_pool, derive_seed(cfg.seed, (kPool << 32) + tag));
      candidate = ucb_select(g, pool, cfg.kappa);
    }

    std::optional<std::pair<Partition, SeedSet>> chosen;
    double chosen_reward = 0.0;
    for (int r = 0; r < cfg.restarts; ++r) {
      auto result = evaluate(*candidate, r);
      const double rw = reward(result.first, cs);
      if (!chosen || rw > chosen_reward) {
        chosen = std::move(result);
        chosen_reward = rw;
      }
    }
    history.append(*candidate, chosen_reward);
    if (history.best_index() == history.size() - 1) {
      best = CscResult{std::move(chosen->first), *candidate, chosen_reward, {}, std::move(chosen->second)};
      since_improvement = 0;
    } else if (cfg.patience && ++since_improvement >= *cfg.patience) {
      break;
    }
  }
  best->history = std::move(history);
  return std::move(*best);
}

CscResult run_csc(const KernelBank& bank, const ConstraintSet& cs, int k, const OptimizerConfig& cfg,
                  Strategy strategy) {
  if (bank.size() == 0) throw InvalidArgument("kernel bank is empty");
  const Index n = bank.rows();
  cs.check_bounds(n);
  const auto components = connected_components(cs, n);
  const std::size_t sparsity = std::min(cfg.sparsity, bank.size());
  auto sampler = [&](std::size_t count, std::uint64_t seed) { return sample_sparse(bank.size(), sparsity, count, seed); };
  auto evaluate = [&](const BetaVector& beta, int restart) {
    beta.check_sparsity(sparsity);
    const auto kernel = combine(bank, beta);
    return cluster_in(GramSpace(kernel), components, k, restart, cfg, beta);
  };
  return optimize(sampler, evaluate, cs, cfg, strategy);
}

CscResult run_csc(const MapBank& bank, const ConstraintSet& cs, int k, const OptimizerConfig& cfg, Strategy strategy) {
  if (bank.size() == 0) throw InvalidArgument("feature map bank is empty");
  const Index n = bank.rows();
  cs.check_bounds(n);
  const auto components = connected_components(cs, n);
  const std::size_t sparsity = std::min(cfg.sparsity, bank.size());
  auto sampler = [&](std::size_t count, std::uint64_t seed) { return sample_sparse(bank.size(), sparsity, count, seed); };
  auto evaluate = [&](const BetaVector& beta, int restart) {
    beta.check_sparsity(sparsity);
    std::vector<const Eigen::MatrixXd*> blocks;
    std::vector<double> weights;
    for (std::size_t i : beta.support()) {
      blocks.push_back(&bank.maps[i].values);
      weights.push_back(beta[i]);
    }
    return cluster_in(FeatureSpace(std::move(blocks), std::move(weights)), components, k, restart, cfg, beta);
  };
  return optimize(sampler, evaluate, cs, cfg, strategy);
}

CscResult run_mahalanobis_csc(const DataMatrix& data, const ConstraintSet& cs, int k, const OptimizerConfig& cfg,
                              Strategy strategy) {
  const Index n = data.rows();
  const auto d = static_cast<std::size_t>(data.cols());
  cs.check_bounds(n);
  if (d > 64) std::cerr << "warning: gradient-free search over " << d << " feature weights may be slow to converge\n";
  const auto components = connected_components(cs, n);
  auto sampler = [&](std::size_t count, std::uint64_t seed) { return sample_dense(d, count, seed); };
  auto evaluate = [&](const BetaVector& w, int restart) {
    const Eigen::MatrixXd z = mahalanobis_features(data, w.weights());
    return cluster_in(FeatureSpace(z), components, k, restart, cfg, w);
  };
  return optimize(sampler, evaluate, cs, cfg, strategy);
}

namespace {

template <class Bank, class SpaceFor>
SingleKernelResult single_kernel(const Bank& bank, const ConstraintSet& cs, int k, const OptimizerConfig& cfg,
                                 SpaceFor&& space_for) {
  if (bank.size() == 0) throw InvalidArgument("bank is empty");
  if (cs.empty()) throw InvalidArgument("single-kernel selection needs constraints");
  const auto components = connected_components(cs, bank.rows());
  SingleKernelResult out;
  bool have = false;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto beta = BetaVector::one_hot(bank.size(), i);
    auto [part, seeds] = space_for(i, [&](const auto& space) {
      return cluster_in(space, components, k, 0, cfg, beta);
    });
    const double r = reward(part, cs);
    out.rewards.push_back(r);
    if (!have || r > out.reward) {
      out.index = i;
      out.reward = r;
      out.partition = std::move(part);
      have = true;
    }
  }
  return out;
}

}  // namespace

SingleKernelResult select_single_kernel(const KernelBank& bank, const ConstraintSet& cs, int k,
                                        const OptimizerConfig& cfg) {
  return single_kernel(bank, cs, k, cfg, [&](std::size_t i, auto&& run) { return run(GramSpace(bank.grams[i])); });
}

SingleKernelResult select_single_kernel(const MapBank& bank, const ConstraintSet& cs, int k,
                                        const OptimizerConfig& cfg) {
  return single_kernel(bank, cs, k, cfg, [&](std::size_t i, auto&& run) { return run(FeatureSpace(bank.maps[i])); });
}

}  // namespace kcsc
