#include "kcsc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "kcsc/error.hpp"

namespace kcsc {

namespace {

double median_of(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * a * b.transpose();
  d.colwise() += an;
  d.rowwise() += bn.transpose();
  return d.cwiseMax(0.0);
}

Eigen::MatrixXd manhattan_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j) {
    d.col(j) = (a.rowwise() - b.row(j)).cwiseAbs().rowwise().sum();
  }
  return d;
}

constexpr double kDegenerate = 1e-12;

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::laplace: return "laplace";
    case KernelFamily::polynomial: return "polynomial";
    case KernelFamily::sigmoid: return "sigmoid";
    case KernelFamily::linear: return "linear";
  }
  return "unknown";
}

std::string to_string(DataView view) { return view == DataView::raw ? "raw" : "standardized"; }

KernelFamily parse_family(const std::string& name) {
  for (auto f : {KernelFamily::rbf, KernelFamily::laplace, KernelFamily::polynomial, KernelFamily::sigmoid,
                 KernelFamily::linear}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError(fmt::format("unknown kernel family '{}'", name));
}

DataView parse_view(const std::string& name) {
  if (name == "raw") return DataView::raw;
  if (name == "standardized") return DataView::standardized;
  throw ConfigError(fmt::format("unknown data view '{}'", name));
}

void KernelDescriptor::validate() const {
  if ((family == KernelFamily::rbf || family == KernelFamily::laplace) && !(width > 0.0)) {
    throw InvalidArgument(fmt::format("{} kernel requires a positive width", to_string(family)));
  }
  if (family == KernelFamily::polynomial && degree != 2 && degree != 3) {
    throw InvalidArgument("polynomial kernel degree must be 2 or 3");
  }
  if (!std::isfinite(width) || !std::isfinite(offset)) throw InvalidArgument("kernel parameters must be finite");
}

std::string KernelDescriptor::name() const {
  switch (family) {
    case KernelFamily::rbf:
    case KernelFamily::laplace:
    case KernelFamily::sigmoid:
      return fmt::format("{}[{},w={:.6g}]", to_string(family), to_string(view), width);
    case KernelFamily::polynomial:
      return fmt::format("polynomial[{},deg={},c={:.6g}]", to_string(view), degree, offset);
    case KernelFamily::linear:
      return fmt::format("linear[{}]", to_string(view));
  }
  return "unknown";
}

bool KernelDescriptor::may_be_indefinite() const {
  return family == KernelFamily::sigmoid || (family == KernelFamily::polynomial && offset < 0.0);
}

Eigen::MatrixXd kernel_matrix(const KernelDescriptor& desc, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  desc.validate();
  if (a.cols() != b.cols()) throw InvalidArgument("kernel_matrix: column count mismatch");
  switch (desc.family) {
    case KernelFamily::rbf:
      return (-squared_distances(a, b) / (2.0 * desc.width * desc.width)).array().exp().matrix();
    case KernelFamily::laplace:
      return (-desc.width * manhattan_distances(a, b)).array().exp().matrix();
    case KernelFamily::polynomial:
      return ((a * b.transpose()).array() + desc.offset).pow(desc.degree).matrix();
    case KernelFamily::sigmoid:
      return (desc.width * (a * b.transpose()).array() + desc.offset).tanh().matrix();
    case KernelFamily::linear:
      return a * b.transpose();
  }
  throw InvalidArgument("unknown kernel family");
}

MedianHeuristics median_heuristics(const Eigen::MatrixXd& x, std::size_t max_pairs, std::uint64_t seed) {
  const Index n = x.rows();
  if (n < 2) throw InvalidArgument("median heuristics need at least 2 rows");
  const auto total = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
  std::vector<double> euclid;
  std::vector<double> manhattan;
  std::vector<double> inner;
  auto add = [&](Index i, Index j) {
    const auto diff = x.row(i) - x.row(j);
    euclid.push_back(diff.norm());
    manhattan.push_back(diff.cwiseAbs().sum());
    inner.push_back(x.row(i).dot(x.row(j)));
  };
  if (total <= max_pairs) {
    euclid.reserve(total);
    manhattan.reserve(total);
    inner.reserve(total);
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) add(i, j);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> first(0, n - 1);
    std::uniform_int_distribution<Index> second(0, n - 2);
    euclid.reserve(max_pairs);
    manhattan.reserve(max_pairs);
    inner.reserve(max_pairs);
    for (std::size_t t = 0; t < max_pairs; ++t) {
      const Index i = first(rng);
      Index j = second(rng);
      if (j >= i) ++j;
      add(i, j);
    }
  }
  return {median_of(euclid), median_of(manhattan), median_of(inner)};
}

MedianHeuristics median_heuristics(const DataMatrix& data, std::size_t max_pairs, std::uint64_t seed) {
  return median_heuristics(data.values(), max_pairs, seed);
}

Eigen::MatrixXd view_matrix(const DataMatrix& data, DataView view, std::vector<Index>* dropped) {
  if (view == DataView::raw) return data.values();
  auto z = standardize(data.values(), dropped);
  if (z.cols() == 0) throw InvalidArgument("standardized view has no features with nonzero variance");
  return z;
}

GramMatrix::GramMatrix(Eigen::MatrixXd values, std::optional<KernelDescriptor> descriptor, double scale, double shift)
    : values_(std::move(values)), descriptor_(std::move(descriptor)), scale_(scale), shift_(shift) {
  if (values_.rows() != values_.cols()) throw InvalidArgument("Gram matrix must be square");
  if (values_.rows() < 1) throw InvalidArgument("Gram matrix must be non-empty");
  if (!values_.allFinite()) throw InvalidArgument("Gram matrix contains non-finite values");
  const double tol = 1e-10 * std::max(1.0, values_.cwiseAbs().maxCoeff());
  if ((values_ - values_.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw InvalidArgument("Gram matrix is not symmetric");
  }
  if (!(scale_ > 0.0)) throw InvalidArgument("Gram matrix scale must be positive");
}

GramMatrix GramMatrix::normalized(Eigen::MatrixXd raw, std::optional<KernelDescriptor> descriptor) {
  if (raw.rows() != raw.cols()) throw InvalidArgument("Gram matrix must be square");
  const Index n = raw.rows();
  Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
  double shift = 0.0;
  if (!descriptor || descriptor->may_be_indefinite()) {
    const double lambda_min = min_eigenvalue(sym);
    if (lambda_min < 0.0) {
      shift = -lambda_min + 1e-10;
      sym.diagonal().array() += shift;
    }
  }
  const double trace = sym.trace();
  if (!(trace > kDegenerate * static_cast<double>(n))) {
    throw InvalidArgument("Gram matrix has zero trace and cannot be normalized");
  }
  const double scale = static_cast<double>(n) / trace;
  sym *= scale;
  return GramMatrix(std::move(sym), std::move(descriptor), scale, shift);
}

BetaVector::BetaVector(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw InvalidArgument("beta vector is empty");
  bool any = false;
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument(fmt::format("beta entry {} outside [0,1]", w));
    any = any || w > 0.0;
  }
  if (!any) throw InvalidArgument("beta vector is all zero");
}

BetaVector BetaVector::one_hot(std::size_t p, std::size_t index, double value) {
  std::vector<double> w(p, 0.0);
  w.at(index) = value;
  return BetaVector(std::move(w));
}

std::vector<std::size_t> BetaVector::support() const {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    if (weights_[i] > 0.0) s.push_back(i);
  return s;
}

std::size_t BetaVector::nonzeros() const {
  return static_cast<std::size_t>(std::count_if(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; }));
}

void BetaVector::check_sparsity(std::size_t sparsity) const {
  if (nonzeros() > sparsity) {
    throw InvalidArgument(fmt::format("beta has {} nonzeros, sparsity limit is {}", nonzeros(), sparsity));
  }
}

void BankGrid::validate() const {
  if (views.empty()) throw ConfigError("bank grid needs at least one view");
  if (families.empty()) throw ConfigError("bank grid needs at least one kernel family");
  for (double f : factors)
    if (!(f > 0.0)) throw ConfigError("bank grid factors must be positive");
  for (int d : degrees)
    if (d != 2 && d != 3) throw ConfigError("polynomial degrees must be 2 or 3");
}

std::vector<KernelDescriptor> bank_descriptors(const DataMatrix& data, const BankGrid& grid,
                                               std::vector<ViewInfo>* views) {
  grid.validate();
  auto has = [&](KernelFamily f) { return std::find(grid.families.begin(), grid.families.end(), f) != grid.families.end(); };
  std::vector<KernelDescriptor> out;
  for (DataView view : grid.views) {
    ViewInfo info;
    info.view = view;
    const auto x = view_matrix(data, view, &info.dropped_features);
    info.medians = median_heuristics(x, grid.median_max_pairs, grid.seed);
    // Degenerate medians fall back to a unit width.
    const double euclid = info.medians.euclidean > kDegenerate ? info.medians.euclidean : 1.0;
    const double manhattan = info.medians.manhattan > kDegenerate ? info.medians.manhattan : 1.0;
    const double inner = std::abs(info.medians.inner_product) > kDegenerate ? std::abs(info.medians.inner_product) : 1.0;

    if (has(KernelFamily::rbf))
      for (double f : grid.factors) out.push_back({KernelFamily::rbf, view, euclid * f, 0, 0.0, f});
    if (has(KernelFamily::laplace))
      for (double f : grid.factors) out.push_back({KernelFamily::laplace, view, f / manhattan, 0, 0.0, f});
    if (has(KernelFamily::polynomial))
      for (int deg : grid.degrees)
        out.push_back({KernelFamily::polynomial, view, 1.0, deg, info.medians.inner_product, 1.0});
    if (has(KernelFamily::sigmoid))
      for (double f : grid.factors) out.push_back({KernelFamily::sigmoid, view, f / inner, 0, 0.0, f});
    if (has(KernelFamily::linear)) out.push_back({KernelFamily::linear, view, 1.0, 0, 0.0, 1.0});
    if (views) views->push_back(std::move(info));
  }
  return out;
}

KernelBank build_bank(const DataMatrix& data, const BankGrid& grid) {
  KernelBank bank;
  const auto descriptors = bank_descriptors(data, grid, &bank.views);
  std::vector<Eigen::MatrixXd> features;
  for (DataView view : grid.views) features.push_back(view_matrix(data, view));
  for (const auto& desc : descriptors) {
    const auto v = static_cast<std::size_t>(std::find(grid.views.begin(), grid.views.end(), desc.view) - grid.views.begin());
    const auto& x = features[v];
    bank.grams.push_back(GramMatrix::normalized(kernel_matrix(desc, x, x), desc));
  }
  return bank;
}

MapBank build_map_bank(const DataMatrix& data, const BankGrid& grid, Index rank, std::uint64_t seed) {
  MapBank bank;
  const auto descriptors = bank_descriptors(data, grid, &bank.views);
  std::vector<Eigen::MatrixXd> features;
  for (DataView view : grid.views) features.push_back(view_matrix(data, view));
  const Index q = std::min(rank, data.rows());
  std::uint64_t map_seed = seed;
  for (const auto& desc : descriptors) {
    const auto v = static_cast<std::size_t>(std::find(grid.views.begin(), grid.views.end(), desc.view) - grid.views.begin());
    auto map = nystrom_map(features[v], desc, q, map_seed++);
    const double trace = map.values.squaredNorm();
    if (!(trace > kDegenerate * static_cast<double>(data.rows()))) {
      throw InvalidArgument(fmt::format("feature map for {} is degenerate", desc.name()));
    }
    map.scale = static_cast<double>(data.rows()) / trace;
    map.values *= std::sqrt(map.scale);
    bank.maps.push_back(std::move(map));
  }
  return bank;
}

GramMatrix combine(const KernelBank& bank, const BetaVector& beta) {
  if (beta.size() != bank.size()) {
    throw InvalidArgument(fmt::format("beta has {} entries, bank has {} kernels", beta.size(), bank.size()));
  }
  const Index n = bank.rows();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i : beta.support()) k.noalias() += beta[i] * bank.grams[i].values();
  return GramMatrix(std::move(k));
}

FeatureMap nystrom_map(const Eigen::MatrixXd& x, const KernelDescriptor& desc, Index q, std::uint64_t seed) {
  const Index n = x.rows();
  if (q < 1 || q > n) throw InvalidArgument(fmt::format("Nystrom rank {} outside [1, {}]", q, n));
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first q entries are a uniform sample.
  for (Index t = 0; t < q; ++t) {
    std::uniform_int_distribution<Index> pick(t, n - 1);
    std::swap(all[t], all[pick(rng)]);
  }
  std::vector<Index> landmarks(all.begin(), all.begin() + q);
  std::sort(landmarks.begin(), landmarks.end());

  Eigen::MatrixXd lx(q, x.cols());
  for (Index t = 0; t < q; ++t) lx.row(t) = x.row(landmarks[t]);
  Eigen::MatrixXd w = kernel_matrix(desc, lx, lx);
  w = 0.5 * (w + w.transpose());
  Eigen::MatrixXd c = kernel_matrix(desc, x, lx);
  double shift = 0.0;
  if (desc.may_be_indefinite()) {
    const double lambda_min = min_eigenvalue(w);
    if (lambda_min < 0.0) {
      shift = -lambda_min + 1e-10;
      w.diagonal().array() += shift;
      for (Index t = 0; t < q; ++t) c(landmarks[t], t) += shift;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lambda_max = lambda.maxCoeff();
  std::vector<Index> keep;
  for (Index t = 0; t < q; ++t)
    if (lambda_max > 0.0 && lambda(t) > 1e-10 * lambda_max) keep.push_back(t);
  if (keep.empty()) throw InvalidArgument(fmt::format("landmark Gram for {} has no positive spectrum", desc.name()));

  Eigen::MatrixXd projection(q, static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    projection.col(static_cast<Index>(c)) = eig.eigenvectors().col(keep[c]) / std::sqrt(lambda(keep[c]));
  }
  FeatureMap map;
  map.values = c * projection;
  map.descriptor = desc;
  map.shift = shift;
  map.landmarks = std::move(landmarks);
  return map;
}

FeatureMap nystrom_map(const DataMatrix& data, const KernelDescriptor& desc, Index q, std::uint64_t seed) {
  return nystrom_map(view_matrix(data, desc.view), desc, q, seed);
}

FeatureMap combined_feature_map(std::span<const FeatureMap> maps, const BetaVector& beta) {
  if (beta.size() != maps.size()) {
    throw InvalidArgument(fmt::format("beta has {} entries, {} maps given", beta.size(), maps.size()));
  }
  const auto support = beta.support();
  Index cols = 0;
  const Index n = maps[support.front()].rows();
  for (std::size_t i : support) {
    if (maps[i].rows() != n) throw InvalidArgument("feature maps have different row counts");
    cols += maps[i].rank();
  }
  FeatureMap out;
  out.values.resize(n, cols);
  Index at = 0;
  for (std::size_t i : support) {
    out.values.middleCols(at, maps[i].rank()) = std::sqrt(beta[i]) * maps[i].values;
    at += maps[i].rank();
  }
  if (support.size() == 1 && beta[support.front()] == 1.0) out.descriptor = maps[support.front()].descriptor;
  return out;
}

double min_eigenvalue(const Eigen::MatrixXd& sym, Index exact_limit) {
  const Index n = sym.rows();
  if (n <= exact_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
  }
  // Shifted power iteration: the top eigenvalue of (s I - A) is s - lambda_min.
  auto power = [&](auto&& apply) {
    std::mt19937_64 rng(n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = gauss(rng);
    v.normalize();
    double rayleigh = 0.0;
    for (int it = 0; it < 500; ++it) {
      Eigen::VectorXd w = apply(v);
      const double norm = w.norm();
      if (norm == 0.0) return 0.0;
      rayleigh = v.dot(w);
      v = w / norm;
    }
    return rayleigh;
  };
  const double bound = sym.cwiseAbs().rowwise().sum().maxCoeff();
  const double top = power([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return bound * v - sym * v; });
  // Power iteration underestimates the top eigenvalue; leave a margin.
  return bound - top - 1e-6 * bound;
}

}  // namespace kcsc
