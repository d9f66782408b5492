#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>

#include "kcsc/bank_cache.hpp"
#include "kcsc/error.hpp"
#include "kcsc/experiment.hpp"
#include "kcsc/kernels.hpp"
#include "kcsc/synthetic.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace kcsc;

namespace {

double smallest_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

KernelDescriptor rbf(double width, DataView view = DataView::raw) {
  KernelDescriptor d;
  d.family = KernelFamily::rbf;
  d.view = view;
  d.width = width;
  return d;
}

}  // namespace

TEST_CASE("median heuristics on small inputs") {
  Eigen::MatrixXd a(3, 1);
  a << 0, 1, 2;
  CHECK(median_heuristics(a).euclidean == doctest::Approx(1.0));

  Eigen::MatrixXd b(2, 2);
  b << 0, 0, 3, 4;
  const auto m = median_heuristics(b);
  CHECK(m.euclidean == doctest::Approx(5.0));
  CHECK(m.manhattan == doctest::Approx(7.0));
  CHECK(m.inner_product == doctest::Approx(0.0));

  Eigen::MatrixXd c(3, 2);
  c << 1, 2, 1, 2, 1, 2;
  const auto mc = median_heuristics(c);
  CHECK(mc.euclidean == 0.0);
  CHECK(mc.manhattan == 0.0);
  CHECK(mc.inner_product == doctest::Approx(5.0));
}

TEST_CASE("sampled medians stay close to the exact ones") {
  std::mt19937_64 rng(3);
  const auto x = oracle::random_matrix(rng, 600, 3);
  const auto exact = median_heuristics(x);
  const auto sampled = median_heuristics(x, 20000, 9);
  CHECK(sampled.euclidean == doctest::Approx(exact.euclidean).epsilon(0.03));
  CHECK(sampled.manhattan == doctest::Approx(exact.manhattan).epsilon(0.03));
  CHECK(median_heuristics(x, 20000, 9).euclidean == sampled.euclidean);
}

TEST_CASE("kernel formulas") {
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 3, 4;
  KernelDescriptor d = rbf(2.0);
  CHECK(kernel_matrix(d, x, x)(0, 1) == doctest::Approx(std::exp(-25.0 / 8.0)));
  d.family = KernelFamily::laplace;
  d.width = 0.5;
  CHECK(kernel_matrix(d, x, x)(0, 1) == doctest::Approx(std::exp(-3.5)));
  d.family = KernelFamily::polynomial;
  d.degree = 3;
  d.offset = 1.0;
  CHECK(kernel_matrix(d, x, x)(1, 1) == doctest::Approx(std::pow(26.0, 3)));
  d.family = KernelFamily::sigmoid;
  d.width = 0.1;
  d.offset = 0.0;
  CHECK(kernel_matrix(d, x, x)(1, 1) == doctest::Approx(std::tanh(2.5)));
  d.family = KernelFamily::linear;
  CHECK(kernel_matrix(d, x, x)(1, 1) == doctest::Approx(25.0));

  KernelDescriptor bad = rbf(0.0);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  KernelDescriptor poly;
  poly.family = KernelFamily::polynomial;
  poly.degree = 4;
  CHECK_THROWS_AS(poly.validate(), InvalidArgument);
}

TEST_CASE("RBF diagonal is one before normalization") {
  std::mt19937_64 rng(1);
  const auto x = oracle::random_matrix(rng, 20, 4);
  const auto k = kernel_matrix(rbf(0.7), x, x);
  for (Index i = 0; i < 20; ++i) CHECK(k(i, i) == 1.0);
}

TEST_CASE("linear kernel on one point normalizes to one") {
  Eigen::MatrixXd x(1, 2);
  x << 3, 4;
  KernelDescriptor d;
  const auto raw = kernel_matrix(d, x, x);
  CHECK(raw(0, 0) == doctest::Approx(25.0));
  const auto g = GramMatrix::normalized(raw, d);
  CHECK(g(0, 0) == doctest::Approx(1.0));
  CHECK(g.scale() == doctest::Approx(1.0 / 25.0));
}

TEST_CASE("default grid gives 36 valid Gram matrices") {
  const auto data = synthetic::suite("noisy-blobs", 60, 2);
  const auto bank = build_bank(data);
  REQUIRE(bank.size() == 36);
  CHECK(bank.views.size() == 2);
  for (const auto& g : bank.grams) {
    const auto& k = g.values();
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * k.cwiseAbs().maxCoeff());
    CHECK(k.trace() == doctest::Approx(60.0).epsilon(1e-10));
    CHECK(smallest_eigenvalue(k) >= -1e-8);
  }
  // Order: per view rbf x5, laplace x5, poly x2, sigmoid x5, linear.
  CHECK(bank.grams[0].descriptor()->family == KernelFamily::rbf);
  CHECK(bank.grams[5].descriptor()->family == KernelFamily::laplace);
  CHECK(bank.grams[10].descriptor()->degree == 2);
  CHECK(bank.grams[11].descriptor()->degree == 3);
  CHECK(bank.grams[12].descriptor()->family == KernelFamily::sigmoid);
  CHECK(bank.grams[17].descriptor()->family == KernelFamily::linear);
  CHECK(bank.grams[18].descriptor()->view == DataView::standardized);
}

TEST_CASE("bank widths follow the median heuristics") {
  const auto data = synthetic::suite("anisotropic", 40, 1);
  std::vector<ViewInfo> views;
  const auto desc = bank_descriptors(data, BankGrid{}, &views);
  const auto m = median_heuristics(data.values());
  CHECK(desc[2].width == doctest::Approx(m.euclidean));
  CHECK(desc[0].width == doctest::Approx(m.euclidean * 0.25));
  CHECK(desc[7].width == doctest::Approx(1.0 / m.manhattan));
  CHECK(desc[10].offset == doctest::Approx(m.inner_product));
  CHECK(desc[14].width == doctest::Approx(1.0 / std::abs(m.inner_product)));
}

TEST_CASE("zero-variance columns are dropped for the standardized view") {
  Eigen::MatrixXd x(6, 2);
  x << 0, 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1;
  std::vector<ViewInfo> views;
  bank_descriptors(DataMatrix(x), BankGrid{}, &views);
  REQUIRE(views.size() == 2);
  CHECK(views[0].dropped_features.empty());
  CHECK(views[1].dropped_features == std::vector<Index>{1});
}

TEST_CASE("indefinite kernels are repaired") {
  std::mt19937_64 rng(8);
  const auto x = oracle::random_matrix(rng, 30, 3);
  KernelDescriptor d;
  d.family = KernelFamily::sigmoid;
  d.width = 2.0;
  d.offset = -1.0;
  const auto raw = kernel_matrix(d, x, x);
  REQUIRE(smallest_eigenvalue(raw) < 0.0);
  const auto g = GramMatrix::normalized(raw, d);
  CHECK(g.shift() > 0.0);
  CHECK(smallest_eigenvalue(g.values()) >= -1e-8);
  CHECK(g.values().trace() == doctest::Approx(30.0));
}

TEST_CASE("min_eigenvalue power iteration agrees with the exact solver") {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd a = oracle::random_matrix(rng, 60, 60);
  a = 0.5 * (a + a.transpose()).eval();
  const double exact = smallest_eigenvalue(a);
  CHECK(min_eigenvalue(a, 0) <= exact + 1e-6 * a.norm());
  CHECK(min_eigenvalue(a, 0) == doctest::Approx(exact).epsilon(1e-3));
}

TEST_CASE("GramMatrix rejects bad input") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 0, 1;
  CHECK_THROWS_AS(GramMatrix{a}, InvalidArgument);
  CHECK_THROWS_AS(GramMatrix(Eigen::MatrixXd::Zero(2, 3)), InvalidArgument);
  CHECK_THROWS_AS(GramMatrix::normalized(Eigen::MatrixXd::Zero(3, 3), std::nullopt), InvalidArgument);
}

TEST_CASE("BetaVector invariants") {
  CHECK_THROWS_AS(BetaVector({0.0, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(BetaVector({1.5}), InvalidArgument);
  CHECK_THROWS_AS(BetaVector({-0.1, 1.0}), InvalidArgument);
  const BetaVector b({0.0, 0.3, 0.0, 1.0});
  CHECK(b.support() == std::vector<std::size_t>{1, 3});
  CHECK(b.nonzeros() == 2);
  CHECK_NOTHROW(b.check_sparsity(2));
  CHECK_THROWS_AS(b.check_sparsity(1), InvalidArgument);
  CHECK(BetaVector::one_hot(3, 2).weights() == std::vector<double>{0, 0, 1});
}

TEST_CASE("combine") {
  std::mt19937_64 rng(4);
  KernelBank bank;
  bank.grams.emplace_back(oracle::random_psd(rng, 4, 4));
  bank.grams.emplace_back(oracle::random_psd(rng, 4, 2));

  SUBCASE("one-hot returns the base kernel") { CHECK(combine(bank, BetaVector({1.0, 0.0})).values() == bank.grams[0].values()); }
  SUBCASE("direct summation oracle") {
    const auto k = combine(bank, BetaVector({0.3, 0.7}));
    const Eigen::MatrixXd direct = 0.3 * bank.grams[0].values() + 0.7 * bank.grams[1].values();
    CHECK((k.values() - direct).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("identity blend") {
    KernelBank eye;
    eye.grams.emplace_back(Eigen::MatrixXd::Identity(3, 3));
    eye.grams.emplace_back(Eigen::MatrixXd::Identity(3, 3));
    CHECK(combine(eye, BetaVector({0.5, 0.5})).values() == Eigen::MatrixXd::Identity(3, 3));
  }
  SUBCASE("linear in beta") {
    const auto a = combine(bank, BetaVector({0.2, 0.1})).values();
    const auto b = combine(bank, BetaVector({0.3, 0.6})).values();
    const auto ab = combine(bank, BetaVector({0.5, 0.7})).values();
    CHECK((ab - a - b).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("size mismatch") { CHECK_THROWS_AS(combine(bank, BetaVector({1.0})), InvalidArgument); }
}

TEST_CASE("kernel-space distances are nonnegative for combined kernels") {
  const auto data = synthetic::suite("rings", 40, 3);
  const auto bank = build_bank(data);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> w(bank.size(), 0.0);
    for (int s = 0; s < 5; ++s) w[rng() % bank.size()] = u(rng) + 1e-3;
    const auto k = combine(bank, BetaVector(w)).values();
    double worst = 0.0;
    for (Index i = 0; i < k.rows(); ++i)
      for (Index j = 0; j < k.rows(); ++j) worst = std::min(worst, k(i, i) - 2 * k(i, j) + k(j, j));
    CHECK(worst >= -1e-8);
  }
}

TEST_CASE("Nystrom maps") {
  SUBCASE("full rank reproduces the Gram matrix") {
    Eigen::MatrixXd x(5, 2);
    x << 0, 0, 1, 0, 0, 1, 2, 2, -1, 3;
    const auto z = nystrom_map(x, rbf(1.0), 5, 1);
    const auto g = kernel_matrix(rbf(1.0), x, x);
    const Eigen::MatrixXd zz = z.values * z.values.transpose();
    CHECK((zz - g).norm() / g.norm() <= 1e-6);
    CHECK(z.landmarks.size() == 5);
  }
  SUBCASE("rank one") {
    std::mt19937_64 rng(2);
    const auto x = oracle::random_matrix(rng, 12, 2);
    const auto z = nystrom_map(x, rbf(1.0), 1, 3);
    CHECK(z.rank() == 1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(z.values * z.values.transpose());
    CHECK(svd.singularValues()(1) < 1e-10 * svd.singularValues()(0));
  }
  SUBCASE("half rank beats rank one on blobs") {
    const auto data = synthetic::blobs(50, 3, 2, 5.0, 1.0, 4);
    const auto g = kernel_matrix(rbf(1.5), data.values(), data.values());
    auto err = [&](Index q) {
      const auto z = nystrom_map(data.values(), rbf(1.5), q, 7);
      return (z.values * z.values.transpose() - g).norm();
    };
    CHECK(err(25) < err(1));
  }
  SUBCASE("q above n") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
    CHECK_THROWS_AS(nystrom_map(x, rbf(1.0), 5, 0), InvalidArgument);
    CHECK_THROWS_AS(nystrom_map(x, rbf(1.0), 0, 0), InvalidArgument);
  }
  SUBCASE("duplicate points are truncated, not fatal") {
    Eigen::MatrixXd x(6, 1);
    x << 1, 1, 1, 2, 2, 2;
    const auto z = nystrom_map(x, rbf(1.0), 6, 0);
    CHECK(z.rank() == 2);
    const auto g = kernel_matrix(rbf(1.0), x, x);
    CHECK((z.values * z.values.transpose() - g).norm() < 1e-8);
  }
}

TEST_CASE("combined feature maps") {
  std::mt19937_64 rng(9);
  std::vector<FeatureMap> maps(2);
  maps[0].values = oracle::random_matrix(rng, 8, 3);
  maps[1].values = oracle::random_matrix(rng, 8, 4);
  CHECK(combined_feature_map(maps, BetaVector({1.0, 0.0})).values == maps[0].values);
  const BetaVector beta({0.4, 0.9});
  const auto z = combined_feature_map(maps, beta);
  CHECK(z.rank() == 7);
  const Eigen::MatrixXd implied = z.values * z.values.transpose();
  const Eigen::MatrixXd direct = 0.4 * maps[0].values * maps[0].values.transpose() +
                                 0.9 * maps[1].values * maps[1].values.transpose();
  CHECK((implied - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("map bank mirrors the exact bank at full rank") {
  const auto data = synthetic::suite("anisotropic", 30, 5);
  BankGrid grid;
  grid.families = {KernelFamily::rbf, KernelFamily::laplace};
  const auto exact = build_bank(data, grid);
  const auto maps = build_map_bank(data, grid, 30, 1);
  REQUIRE(maps.size() == exact.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Eigen::MatrixXd zz = maps.maps[i].values * maps.maps[i].values.transpose();
    CHECK((zz - exact.grams[i].values()).norm() / exact.grams[i].values().norm() < 1e-6);
    CHECK(maps.maps[i].values.squaredNorm() == doctest::Approx(30.0));
  }
}

TEST_CASE("indefinite kernels get the same repair on both paths at full rank") {
  const auto data = synthetic::suite("rings", 40, 2);
  BankGrid grid;
  grid.families = {KernelFamily::polynomial, KernelFamily::sigmoid};
  const auto exact = build_bank(data, grid);
  const auto maps = build_map_bank(data, grid, 40, 3);
  REQUIRE(maps.size() == exact.size());
  bool any_shift = false;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Eigen::MatrixXd zz = maps.maps[i].values * maps.maps[i].values.transpose();
    CHECK((zz - exact.grams[i].values()).norm() / exact.grams[i].values().norm() < 1e-6);
    CHECK(maps.maps[i].shift == doctest::Approx(exact.grams[i].shift()).epsilon(1e-6));
    any_shift = any_shift || exact.grams[i].shift() > 0.0;
  }
  CHECK(any_shift);
}

TEST_CASE("bank cache round-trips and detects corruption") {
  testing::TempDir dir;
  const auto data = synthetic::suite("rings", 24, 1);
  BankGrid grid;
  grid.factors = {1.0};
  const auto bank = build_bank(data, grid);
  const auto key = bank_key(data, grid);
  save_bank(bank, dir.path(), key);
  const auto loaded = load_bank(dir.path(), key);
  REQUIRE(loaded);
  REQUIRE(loaded->size() == bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    CHECK(loaded->grams[i].values() == bank.grams[i].values());
    CHECK(loaded->grams[i].descriptor() == bank.grams[i].descriptor());
    CHECK(loaded->grams[i].scale() == bank.grams[i].scale());
    CHECK(loaded->grams[i].shift() == bank.grams[i].shift());
  }
  CHECK_FALSE(load_bank(dir.path(), "other-key"));
  CHECK_FALSE(load_bank(dir / "missing", key));

  {
    std::fstream f(dir / "k000.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    const char junk = 0x5a;
    f.write(&junk, 1);
  }
  CHECK_THROWS_AS(load_bank(dir.path(), key), ParseError);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a(std::string()) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a(std::string("a")) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a(std::string("foobar")) == 0x85944171f73967e8ULL);
}
