#include "kcsc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "kcsc/error.hpp"

namespace kcsc::synthetic {

namespace {

std::vector<int> balanced_labels(Index n, int k, std::mt19937_64& rng) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace

DataMatrix blobs(Index n, int k, Index d, double spread, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center(-spread, spread);
  std::normal_distribution<double> noise(0.0, sd);
  Eigen::MatrixXd centers(k, d);
  for (Index c = 0; c < k; ++c)
    for (Index j = 0; j < d; ++j) centers(c, j) = center(rng);
  auto labels = balanced_labels(n, k, rng);
  Eigen::MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = centers(labels[i], j) + noise(rng);
  return DataMatrix(std::move(x), std::move(labels));
}

DataMatrix noisy_blobs(Index n, int k, Index signal_dims, Index noise_dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  // Cluster centers on a circle so every pair is equally separated.
  constexpr double kSignalScale = 10.0;
  constexpr double kRadius = 3.0;
  auto labels = balanced_labels(n, k, rng);
  Eigen::MatrixXd x(n, signal_dims + noise_dims);
  for (Index i = 0; i < n; ++i) {
    const double angle = 2.0 * std::numbers::pi * labels[i] / k;
    for (Index j = 0; j < signal_dims; ++j) {
      const double c = j == 0 ? std::cos(angle) : (j == 1 ? std::sin(angle) : 0.0);
      x(i, j) = kSignalScale * (kRadius * c + unit(rng));
    }
    for (Index j = 0; j < noise_dims; ++j) x(i, signal_dims + j) = unit(rng);
  }
  return DataMatrix(std::move(x), std::move(labels));
}

DataMatrix rings(Index n, double jitter, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> radial(0.0, jitter);
  auto labels = balanced_labels(n, 2, rng);
  Eigen::MatrixXd x(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double r = (labels[i] == 0 ? 1.0 : 3.0) + radial(rng);
    const double a = angle(rng);
    x(i, 0) = r * std::cos(a);
    x(i, 1) = r * std::sin(a);
  }
  return DataMatrix(std::move(x), std::move(labels));
}

DataMatrix anisotropic_blobs(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const Eigen::Matrix<double, 3, 2> centers{{-4.0, 0.0}, {0.0, 0.0}, {4.0, 0.0}};
  // Stretch along y, then shear; clusters become long parallel bands.
  const Eigen::Matrix2d transform{{1.0, 0.0}, {2.0, 6.0}};
  auto labels = balanced_labels(n, 3, rng);
  Eigen::MatrixXd x(n, 2);
  for (Index i = 0; i < n; ++i) {
    Eigen::Vector2d p(centers(labels[i], 0) + 0.6 * unit(rng), centers(labels[i], 1) + 0.6 * unit(rng));
    x.row(i) = (transform * p).transpose();
  }
  return DataMatrix(std::move(x), std::move(labels));
}

DataMatrix suite(const std::string& name, Index n, std::uint64_t seed) {
  if (name == "noisy-blobs") return noisy_blobs(n, 4, 2, 5, seed);
  if (name == "rings") return rings(n, 0.15, seed);
  if (name == "anisotropic") return anisotropic_blobs(n, seed);
  if (name == "blobs") return blobs(n, 5, 10, 10.0, 1.0, seed);
  throw ConfigError(fmt::format("unknown synthetic suite '{}'", name));
}

std::vector<std::string> suite_names() { return {"noisy-blobs", "rings", "anisotropic"}; }

}  // namespace kcsc::synthetic
