#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "kcsc/error.hpp"
#include "kcsc/optimizer.hpp"
#include "kcsc/synthetic.hpp"
#include "oracles.hpp"

using namespace kcsc;

namespace {

ConstraintSet pairs_from_labels(const std::vector<int>& labels, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> u(0, static_cast<Index>(labels.size()) - 1);
  std::set<std::pair<Index, Index>> seen;
  std::vector<Constraint> ml;
  std::vector<Constraint> cl;
  while (seen.size() < count) {
    Index i = u(rng);
    Index j = u(rng);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    if (!seen.insert({i, j}).second) continue;
    (labels[i] == labels[j] ? ml : cl).push_back({i, j, 1.0});
  }
  return ConstraintSet(ml, cl);
}

GramMatrix rbf_gram(const Eigen::MatrixXd& x, double width) {
  KernelDescriptor d;
  d.family = KernelFamily::rbf;
  d.width = width;
  return GramMatrix::normalized(kernel_matrix(d, x, x), d);
}

OptimizerConfig small_config(int iters, std::uint64_t seed) {
  OptimizerConfig cfg;
  cfg.max_iters = iters;
  cfg.warmup = 5;
  cfg.candidate_pool = 64;
  cfg.forest.trees = 20;
  cfg.seed = seed;
  return cfg;
}

void check_in_domain(const History& h, std::size_t p, std::size_t c) {
  for (const auto& e : h.entries()) {
    REQUIRE(e.beta.size() == p);
    CHECK(e.beta.nonzeros() >= 1);
    CHECK(e.beta.nonzeros() <= c);
    for (double w : e.beta.weights()) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
    }
  }
}

}  // namespace

TEST_CASE("reward examples") {
  const ConstraintSet cs({{0, 1, 1.0}}, {{0, 2, 1.0}});
  CHECK(reward(std::vector<int>{0, 0, 1}, cs) == 1.0);
  // The must-link is broken but the cannot-link still holds.
  CHECK(reward(std::vector<int>{0, 1, 1}, cs) == 0.5);
  CHECK(reward(std::vector<int>{0, 1, 0}, cs) == 0.0);
  const ConstraintSet cs2({{0, 1, 1.0}, {1, 2, 1.0}}, {{0, 3, 1.0}});
  CHECK(reward(std::vector<int>{0, 0, 1, 1}, cs2) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("reward errors and weights") {
  CHECK_THROWS_AS(reward(std::vector<int>{0, 1}, ConstraintSet{}), InvalidArgument);
  const ConstraintSet cs({{0, 5, 1.0}}, {});
  CHECK_THROWS_AS(reward(std::vector<int>{0, 1}, cs), InvalidArgument);
  // Weighted satisfaction is divided by the pair count.
  const ConstraintSet weighted({{0, 1, 3.0}}, {{0, 2, 1.0}});
  CHECK(reward(std::vector<int>{0, 0, 1}, weighted) == doctest::Approx(2.0));
}

TEST_CASE("reward agrees with an all-pairs oracle") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 3 + rng() % 40;
    const auto labels = oracle::random_labels(rng, n, 1 + static_cast<int>(rng() % 4));
    const auto truth = oracle::random_labels(rng, n, 1 + static_cast<int>(rng() % 4));
    const std::size_t pairs = 1 + rng() % std::min<std::size_t>(20, n * (n - 1) / 2);
    const auto cs = pairs_from_labels(truth, pairs, rng());
    const double r = reward(labels, cs);
    CHECK(r == doctest::Approx(oracle::reward(labels, cs)));
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    CHECK(reward(truth, cs) == 1.0);
  }
}

TEST_CASE("sparse sampling") {
  SUBCASE("sparsity one gives single-support vectors") {
    for (const auto& b : sample_sparse(7, 1, 200, 3)) CHECK(b.nonzeros() == 1);
  }
  SUBCASE("every draw lies in the sparse box") {
    const auto draws = sample_sparse(10, 5, 1000, 4);
    CHECK(draws.size() == 1000);
    for (const auto& b : draws) {
      CHECK(b.size() == 10);
      CHECK(b.nonzeros() >= 1);
      CHECK(b.nonzeros() <= 5);
      for (double w : b.weights()) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
      }
    }
  }
  SUBCASE("all supports appear") {
    std::map<std::vector<std::size_t>, int> freq;
    for (const auto& b : sample_sparse(3, 3, 10000, 5)) ++freq[b.support()];
    CHECK(freq.size() == 7);
    // Support size is uniform on {1,2,3}: singles and pairs each get 1/9, the full set 1/3.
    double chi2 = 0.0;
    for (const auto& [support, count] : freq) {
      const double expected = support.size() == 3 ? 10000.0 / 3 : 10000.0 / 9;
      chi2 += (count - expected) * (count - expected) / expected;
    }
    // 99.9th percentile of chi-square with 6 degrees of freedom.
    CHECK(chi2 < 22.46);
  }
  SUBCASE("seeded") {
    CHECK(sample_sparse(6, 3, 20, 9) == sample_sparse(6, 3, 20, 9));
    CHECK_FALSE(sample_sparse(6, 3, 20, 9) == sample_sparse(6, 3, 20, 10));
  }
  SUBCASE("dense draws") {
    for (const auto& b : sample_dense(4, 100, 2)) {
      CHECK(b.nonzeros() == 4);
      for (double w : b.weights()) CHECK(w <= 1.0);
    }
  }
}

TEST_CASE("UCB selection") {
  SUBCASE("kappa zero is pure exploitation") {
    const std::vector<Prediction> p{{0.2, 0.9}, {0.7, 0.0}, {0.5, 0.5}};
    CHECK(ucb_argmax(p, 0.0) == 1);
  }
  SUBCASE("constant spread does not change the choice") {
    const std::vector<Prediction> p{{0.2, 0.3}, {0.7, 0.3}, {0.5, 0.3}};
    CHECK(ucb_argmax(p, 1.0) == ucb_argmax(p, 0.0));
  }
  SUBCASE("hand-computed example") {
    const std::vector<Prediction> p{{0.5, 0.0}, {0.4, 0.2}};
    CHECK(ucb_argmax(p, 1.0) == 1);
  }
  SUBCASE("ties go to the earliest candidate") {
    const std::vector<Prediction> p{{0.1, 0.0}, {0.3, 0.1}, {0.4, 0.0}};
    CHECK(ucb_argmax(p, 1.0) == 1);
  }
  SUBCASE("invariant under shift and joint positive scaling") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
      std::vector<Prediction> p(20);
      for (auto& x : p) x = {u(rng), u(rng)};
      const double shift = 10.0 * u(rng) - 5.0;
      const double scale = 0.1 + 5.0 * u(rng);
      std::vector<Prediction> q;
      for (const auto& x : p) q.push_back({(x.mean + shift) * scale, x.sd * scale});
      CHECK(ucb_argmax(p, 1.0) == ucb_argmax(q, 1.0));
    }
  }
}

TEST_CASE("surrogate fitting") {
  SUBCASE("single entry") {
    History h;
    h.append(BetaVector({0.3, 0.0, 0.5}), 0.42);
    const auto g = fit_surrogate(h, 1);
    for (const auto& b : sample_sparse(3, 3, 50, 2)) {
      const auto pr = g.predict(b.weights());
      CHECK(pr.mean == doctest::Approx(0.42));
      CHECK(pr.sd == 0.0);
    }
  }
  SUBCASE("constant history") {
    History h;
    for (const auto& b : sample_sparse(4, 2, 30, 3)) h.append(b, 0.8);
    const auto g = fit_surrogate(h, 1);
    for (const auto& b : sample_sparse(4, 4, 50, 4)) {
      const auto pr = g.predict(b.weights());
      CHECK(pr.mean == doctest::Approx(0.8));
      CHECK(pr.sd == 0.0);
    }
  }
  SUBCASE("learns a monotone response") {
    History h;
    for (const auto& b : sample_dense(3, 200, 5)) h.append(b, b[0]);
    const auto g = fit_surrogate(h, 7);
    std::vector<double> truth;
    std::vector<double> mu;
    for (int i = 0; i < 50; ++i) {
      const double x = (i + 0.5) / 50.0;
      truth.push_back(x);
      const auto pr = g.predict(std::vector<double>{x, 0.5, 0.5});
      CHECK(pr.sd >= 0.0);
      mu.push_back(pr.mean);
    }
    // Spearman correlation; the grid is already sorted by truth.
    std::vector<std::size_t> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mu[a] < mu[b]; });
    std::vector<double> rank(mu.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<double>(r);
    double num = 0.0;
    double da = 0.0;
    double db = 0.0;
    const double mean = (mu.size() - 1) / 2.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      num += (rank[i] - mean) * (i - mean);
      da += (rank[i] - mean) * (rank[i] - mean);
      db += (i - mean) * (i - mean);
    }
    CHECK(num / std::sqrt(da * db) > 0.8);
  }
  SUBCASE("deterministic under a seed") {
    History h;
    for (const auto& b : sample_dense(2, 40, 6)) h.append(b, b[0] * b[1]);
    const auto g1 = fit_surrogate(h, 8);
    const auto g2 = fit_surrogate(h, 8);
    for (const auto& b : sample_dense(2, 20, 9)) {
      CHECK(g1.predict(b.weights()).mean == g2.predict(b.weights()).mean);
      CHECK(g1.predict(b.weights()).sd == g2.predict(b.weights()).sd);
    }
  }
  SUBCASE("empty history") { CHECK_THROWS_AS(fit_surrogate(History{}, 1), InvalidArgument); }
}

TEST_CASE("history tracks the earliest best") {
  History h;
  h.append(BetaVector({1.0}), 0.5);
  h.append(BetaVector({0.5}), 0.7);
  h.append(BetaVector({0.2}), 0.7);
  h.append(BetaVector({0.1}), 0.6);
  CHECK(h.best_index() == 1);
  CHECK(h.best().reward == 0.7);
}

TEST_CASE("optimizer configuration validation") {
  OptimizerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.sparsity = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.kappa = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.candidate_pool = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_strategy("random") == Strategy::random);
  CHECK(parse_strategy("smbo") == Strategy::smbo);
  CHECK_THROWS(parse_strategy("grid"));
}

TEST_CASE("search loop on a toy objective") {
  // Reward is 1 only when coordinate 2 carries more weight than coordinate 0.
  const ConstraintSet cs({{0, 1, 1.0}}, {});
  auto sampler = [](std::size_t count, std::uint64_t seed) { return sample_sparse(4, 2, count, seed); };
  auto evaluate = [](const BetaVector& beta, int) {
    Partition p;
    p.k = 2;
    p.labels = beta[2] > beta[0] ? std::vector<int>{0, 0} : std::vector<int>{0, 1};
    return std::pair{p, SeedSet{}};
  };
  for (auto strategy : {Strategy::smbo, Strategy::random}) {
    auto cfg = small_config(40, 21);
    const auto res = optimize(sampler, evaluate, cs, cfg, strategy);
    CHECK(res.reward == 1.0);
    CHECK(res.beta[2] > res.beta[0]);
    CHECK(res.history.size() == 40);
    CHECK(res.beta == res.history.best().beta);
    check_in_domain(res.history, 4, 2);

    cfg.patience = 3;
    const auto stopped = optimize(sampler, evaluate, cs, cfg, strategy);
    CHECK(stopped.history.size() <= stopped.history.best_index() + 4);
  }
}

TEST_CASE("single-kernel bank") {
  const auto data = synthetic::blobs(60, 3, 2, 5.0, 0.6, 4);
  const auto& truth = *data.labels();
  const auto cs = augment_constraints(pairs_from_labels(truth, 40, 1));
  KernelBank bank;
  bank.grams.push_back(rbf_gram(data.values(), 2.0));
  for (auto strategy : {Strategy::smbo, Strategy::random}) {
    const auto res = run_csc(bank, cs, 3, small_config(15, 2), strategy);
    CHECK(res.beta.size() == 1);
    CHECK(res.beta[0] > 0.0);
    const auto comps = connected_components(cs, 60);
    const auto seeds = farthest_first_init(comps, bank.grams[0], 3);
    const auto part = kernel_kmeans(bank.grams[0], seeds, 3);
    CHECK(res.reward == doctest::Approx(reward(part, cs)));
    for (const auto& e : res.history.entries()) CHECK(e.reward == doctest::Approx(res.reward));
  }
}

TEST_CASE("two blobs with one useful and one degenerate kernel") {
  const auto data = synthetic::blobs(80, 2, 2, 6.0, 0.5, 8);
  const auto& truth = *data.labels();
  const auto cs = augment_constraints(pairs_from_labels(truth, 30, 3));
  KernelBank bank;
  bank.grams.push_back(GramMatrix(Eigen::MatrixXd::Identity(80, 80)));
  bank.grams.push_back(rbf_gram(data.values(), 3.0));
  for (auto strategy : {Strategy::smbo, Strategy::random}) {
    const auto res = run_csc(bank, cs, 2, small_config(50, 5), strategy);
    CHECK(res.reward == 1.0);
    const auto support = res.beta.support();
    CHECK(std::find(support.begin(), support.end(), std::size_t{1}) != support.end());
  }
}

TEST_CASE("kernel learning properties") {
  const auto data = synthetic::suite("rings", 90, 12);
  const auto bank = build_bank(data);
  const auto& truth = *data.labels();
  const auto cs = augment_constraints(pairs_from_labels(truth, 60, 4));
  for (auto strategy : {Strategy::smbo, Strategy::random}) {
    const auto cfg = small_config(25, 31);
    const auto a = run_csc(bank, cs, 2, cfg, strategy);
    const auto b = run_csc(bank, cs, 2, cfg, strategy);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history.entries()[i].beta == b.history.entries()[i].beta);
      CHECK(a.history.entries()[i].reward == b.history.entries()[i].reward);
    }
    CHECK(a.partition.labels == b.partition.labels);
    check_in_domain(a.history, bank.size(), 5);

    double best = -1.0;
    for (const auto& e : a.history.entries()) {
      CHECK(e.reward >= 0.0);
      CHECK(e.reward <= 1.0);
      const double next = std::max(best, e.reward);
      CHECK(next >= best);
      best = next;
    }
    CHECK(a.reward == best);
    CHECK(a.reward == doctest::Approx(reward(a.partition, cs)));
    CHECK(a.history.best().reward == a.reward);
  }
}

TEST_CASE("feature-map bank runs the same loop") {
  const auto data = synthetic::blobs(70, 2, 3, 5.0, 0.5, 2);
  BankGrid grid;
  grid.families = {KernelFamily::rbf, KernelFamily::linear};
  const auto maps = build_map_bank(data, grid, 20, 4);
  const auto cs = augment_constraints(pairs_from_labels(*data.labels(), 30, 6));
  const auto res = run_csc(maps, cs, 2, small_config(15, 7), Strategy::smbo);
  check_in_domain(res.history, maps.size(), 5);
  CHECK(res.reward == doctest::Approx(reward(res.partition, cs)));
  const auto single = select_single_kernel(maps, cs, 2, small_config(1, 7));
  CHECK(single.rewards.size() == maps.size());
  CHECK(single.reward == *std::max_element(single.rewards.begin(), single.rewards.end()));
}

TEST_CASE("single-kernel selection takes the first maximal reward") {
  const auto data = synthetic::blobs(50, 2, 2, 6.0, 0.5, 3);
  const auto cs = augment_constraints(pairs_from_labels(*data.labels(), 25, 8));
  const auto bank = build_bank(data);
  const auto res = select_single_kernel(bank, cs, 2, OptimizerConfig{});
  REQUIRE(res.rewards.size() == bank.size());
  const auto it = std::max_element(res.rewards.begin(), res.rewards.end());
  CHECK(res.index == static_cast<std::size_t>(it - res.rewards.begin()));
  CHECK(res.reward == *it);
}

TEST_CASE("diagonal Mahalanobis search") {
  SUBCASE("one feature makes the reward constant") {
    Eigen::MatrixXd x(30, 1);
    std::vector<int> labels(30);
    for (int i = 0; i < 30; ++i) {
      x(i, 0) = (i % 3) * 4.0 + 0.1 * i;
      labels[i] = i % 3;
    }
    const DataMatrix data(x, labels);
    const auto cs = augment_constraints(pairs_from_labels(labels, 20, 2));
    const auto res = run_mahalanobis_csc(data, cs, 3, small_config(15, 3), Strategy::random);
    for (const auto& e : res.history.entries()) CHECK(e.reward == res.history.entries().front().reward);
  }
  SUBCASE("signal in one dimension, noise in another") {
    const auto data = synthetic::noisy_blobs(80, 2, 1, 1, 9);
    const auto cs = augment_constraints(pairs_from_labels(*data.labels(), 40, 5));
    const auto cfg = small_config(30, 4);
    const auto res = run_mahalanobis_csc(data, cs, 2, cfg, Strategy::smbo);
    double top = 0.0;
    for (const auto& e : res.history.entries()) {
      CHECK(e.beta.size() == 2);
      top = std::max(top, e.reward);
    }
    CHECK(res.reward >= top);
    const auto again = run_mahalanobis_csc(data, cs, 2, cfg, Strategy::smbo);
    CHECK(again.beta == res.beta);
    CHECK(again.partition.labels == res.partition.labels);
  }
}

TEST_CASE("restarts never lower the reward of a candidate") {
  const auto data = synthetic::suite("anisotropic", 60, 5);
  const auto bank = build_bank(data);
  const auto cs = augment_constraints(pairs_from_labels(*data.labels(), 30, 2));
  auto cfg = small_config(8, 9);
  const auto one = run_csc(bank, cs, 3, cfg, Strategy::random);
  cfg.restarts = 4;
  const auto many = run_csc(bank, cs, 3, cfg, Strategy::random);
  REQUIRE(one.history.size() == many.history.size());
  for (std::size_t i = 0; i < one.history.size(); ++i) {
    CHECK(one.history.entries()[i].beta == many.history.entries()[i].beta);
    CHECK(many.history.entries()[i].reward >= one.history.entries()[i].reward);
  }
}

TEST_CASE("errors") {
  const ConstraintSet cs({{0, 1, 1.0}}, {});
  CHECK_THROWS_AS(run_csc(KernelBank{}, cs, 2, OptimizerConfig{}, Strategy::smbo), InvalidArgument);
  KernelBank bank;
  bank.grams.push_back(GramMatrix(Eigen::MatrixXd::Identity(4, 4)));
  CHECK_THROWS_AS(run_csc(bank, ConstraintSet{}, 2, OptimizerConfig{}, Strategy::smbo), InvalidArgument);
  CHECK_THROWS_AS(run_csc(bank, ConstraintSet({{0, 9, 1.0}}, {}), 2, OptimizerConfig{}, Strategy::smbo),
                  InvalidArgument);
}
