#include "kcsc/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "kcsc/error.hpp"

namespace kcsc {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    out.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end) return std::nullopt;
  return v;
}

struct UnionFind {
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
  std::vector<Index> parent;
};

std::uint64_t pair_key(Index i, Index j) {
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
}

void canonicalize(std::vector<Constraint>& pairs, const char* kind) {
  for (auto& c : pairs) {
    if (c.i == c.j) throw InvalidArgument(fmt::format("{} constraint pairs a row with itself ({})", kind, c.i));
    if (c.i < 0 || c.j < 0) throw InvalidArgument(fmt::format("{} constraint has a negative index", kind));
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw InvalidArgument(fmt::format("{} constraint ({}, {}) has non-positive weight", kind, c.i, c.j));
    }
    if (c.i > c.j) std::swap(c.i, c.j);
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Constraint& a, const Constraint& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  for (std::size_t t = 1; t < pairs.size(); ++t) {
    if (pairs[t].i == pairs[t - 1].i && pairs[t].j == pairs[t - 1].j) {
      throw InvalidArgument(fmt::format("duplicate {} pair ({}, {})", kind, pairs[t].i, pairs[t].j));
    }
  }
}

}  // namespace

DataMatrix::DataMatrix(Eigen::MatrixXd values, std::optional<std::vector<int>> labels,
                       std::optional<std::vector<bool>> train_mask)
    : values_(std::move(values)), labels_(std::move(labels)), train_mask_(std::move(train_mask)) {
  if (values_.rows() < 2) throw InvalidArgument("dataset needs at least 2 rows");
  if (values_.cols() < 1) throw InvalidArgument("dataset needs at least 1 feature column");
  if (!values_.allFinite()) throw InvalidArgument("dataset contains non-finite values");
  if (labels_ && static_cast<Index>(labels_->size()) != values_.rows()) {
    throw InvalidArgument("label count does not match row count");
  }
  if (train_mask_ && static_cast<Index>(train_mask_->size()) != values_.rows()) {
    throw InvalidArgument("train mask length does not match row count");
  }
}

int DataMatrix::num_classes() const {
  if (!labels_) return 0;
  std::vector<int> sorted = *labels_;
  std::sort(sorted.begin(), sorted.end());
  return static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

std::vector<Index> DataMatrix::train_indices() const {
  std::vector<Index> out;
  if (!train_mask_) return out;
  for (Index i = 0; i < rows(); ++i)
    if ((*train_mask_)[i]) out.push_back(i);
  return out;
}

std::vector<Index> DataMatrix::test_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < rows(); ++i)
    if (!train_mask_ || !(*train_mask_)[i]) out.push_back(i);
  return out;
}

DataMatrix DataMatrix::with_train_mask(std::vector<bool> mask) const {
  return DataMatrix(values_, labels_, std::move(mask));
}

ConstraintSet::ConstraintSet(std::vector<Constraint> must_link, std::vector<Constraint> cannot_link)
    : must_link_(std::move(must_link)), cannot_link_(std::move(cannot_link)) {
  canonicalize(must_link_, "must-link");
  canonicalize(cannot_link_, "cannot-link");
  std::unordered_set<std::uint64_t> ml;
  ml.reserve(must_link_.size());
  for (const auto& c : must_link_) ml.insert(pair_key(c.i, c.j));
  for (const auto& c : cannot_link_) {
    if (ml.count(pair_key(c.i, c.j))) {
      throw InvalidArgument(fmt::format("pair ({}, {}) is both must-link and cannot-link", c.i, c.j));
    }
  }
}

Index ConstraintSet::max_index() const {
  Index m = -1;
  for (const auto& c : must_link_) m = std::max(m, c.j);
  for (const auto& c : cannot_link_) m = std::max(m, c.j);
  return m;
}

void ConstraintSet::check_bounds(Index n) const {
  if (max_index() >= n) {
    throw InvalidArgument(fmt::format("constraint index {} out of range for {} rows", max_index(), n));
  }
}

void SplitSpec::validate(Index n, int k) const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
  if (!(pair_fraction > 0.0 && pair_fraction <= 1.0)) throw ConfigError("pair_fraction must lie in (0,1]");
  if (max_pairs < 1) throw ConfigError("max_pairs must be positive");
  if (train_fraction * static_cast<double>(n) < static_cast<double>(k)) {
    throw ConfigError(fmt::format("train_fraction * n = {} is smaller than k = {}",
                                  train_fraction * static_cast<double>(n), k));
  }
}

DataMatrix load_dataset(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open dataset '{}'", path.string()));
  std::string header;
  if (!std::getline(in, header)) throw ParseError(fmt::format("dataset '{}' is empty", path.string()));
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto names = split_line(header, delim);
  const auto label_it = std::find(names.begin(), names.end(), label_column);
  if (label_it == names.end()) {
    throw ConfigError(fmt::format("label column '{}' not found in '{}'", label_column, path.string()));
  }
  const auto label_col = static_cast<std::size_t>(label_it - names.begin());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line, delim);
    if (cells.size() != names.size()) {
      throw ParseError(fmt::format("{}: row {} has {} cells, header has {}", path.string(), line_no, cells.size(),
                                   names.size()));
    }
    std::vector<double> row;
    row.reserve(names.size() - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) {
        raw_labels.push_back(cells[c]);
        continue;
      }
      auto v = parse_double(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(fmt::format("{}: non-numeric value '{}' at row {}, column '{}'", path.string(), cells[c],
                                     line_no, names[c]));
      }
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(fmt::format("dataset '{}' has no data rows", path.string()));

  Eigen::MatrixXd values(static_cast<Index>(rows.size()), static_cast<Index>(names.size() - 1));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];

  // Integer labels are kept verbatim; anything else is coded by first appearance.
  std::vector<int> labels(raw_labels.size());
  bool all_int = true;
  for (std::size_t r = 0; r < raw_labels.size() && all_int; ++r) {
    auto v = parse_double(raw_labels[r]);
    if (!v || *v != std::floor(*v) || std::abs(*v) > 1e9) all_int = false;
    else labels[r] = static_cast<int>(*v);
  }
  if (!all_int) {
    std::map<std::string, int> codes;
    for (std::size_t r = 0; r < raw_labels.size(); ++r) {
      auto [it, inserted] = codes.emplace(raw_labels[r], static_cast<int>(codes.size()));
      labels[r] = it->second;
    }
  }
  return DataMatrix(std::move(values), std::move(labels));
}

void save_dataset(const DataMatrix& data, const std::filesystem::path& path, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  for (Index c = 0; c < data.cols(); ++c) out << "x" << c << ',';
  out << label_column << '\n';
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) out << fmt::format("{:.17g},", data.values()(r, c));
    out << (data.labels() ? (*data.labels())[r] : 0) << '\n';
  }
}

DataMatrix stratified_split(const DataMatrix& data, const SplitSpec& spec) {
  if (!data.labels()) throw InvalidArgument("stratified split requires labels");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0,1)");
  }
  const auto& labels = *data.labels();
  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < data.rows(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [cls, members] : by_class) {
    if (members.size() < 2) {
      throw InvalidArgument(fmt::format("class {} has a single member; cannot stratify", cls));
    }
  }

  std::mt19937_64 rng(spec.seed);
  const double n = static_cast<double>(data.rows());
  const auto target = static_cast<Index>(std::floor(spec.train_fraction * n + 0.5));

  struct Quota {
    int cls;
    Index take;
    double remainder;
    double tiebreak;
  };
  std::vector<Quota> quotas;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Index assigned = 0;
  for (const auto& [cls, members] : by_class) {
    const double exact = spec.train_fraction * static_cast<double>(members.size());
    const auto base = static_cast<Index>(std::floor(exact + 1e-9));
    quotas.push_back({cls, base, exact - static_cast<double>(base), unit(rng)});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (quotas[a].remainder != quotas[b].remainder) return quotas[a].remainder > quotas[b].remainder;
    return quotas[a].tiebreak < quotas[b].tiebreak;
  });
  for (std::size_t t = 0; assigned < target && t < order.size(); ++t, ++assigned) quotas[order[t]].take += 1;
  // Every class keeps at least one train and one test row.
  for (auto& q : quotas) {
    const auto size = static_cast<Index>(by_class[q.cls].size());
    q.take = std::clamp<Index>(q.take, 1, size - 1);
  }

  std::vector<bool> mask(static_cast<std::size_t>(data.rows()), false);
  for (const auto& q : quotas) {
    auto members = by_class[q.cls];
    std::shuffle(members.begin(), members.end(), rng);
    for (Index t = 0; t < q.take; ++t) mask[members[t]] = true;
  }
  return data.with_train_mask(std::move(mask));
}

ConstraintSet sample_constraints(const DataMatrix& data, const SplitSpec& spec) {
  if (!data.labels() || !data.train_mask()) throw InvalidArgument("sample_constraints requires labels and a train mask");
  const auto train = data.train_indices();
  const auto t = static_cast<std::uint64_t>(train.size());
  if (t < 2) throw InvalidArgument("need at least 2 train rows to sample constraints");
  const std::uint64_t total = t * (t - 1) / 2;
  const auto wanted = static_cast<std::uint64_t>(std::ceil(spec.pair_fraction * static_cast<double>(total) - 1e-9));
  const std::uint64_t count = std::min<std::uint64_t>({wanted, spec.max_pairs, total});

  // Floyd's algorithm: uniform subset of `count` pair ids out of `total`.
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t j = total - count; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const auto r = pick(rng);
    if (!chosen.insert(r).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> ids(chosen.begin(), chosen.end());
  std::sort(ids.begin(), ids.end());

  // Pair id -> (a, b) with a < b in row-major order over the upper triangle.
  auto row_offset = [t](std::uint64_t a) { return a * t - a * (a + 1) / 2; };
  const auto& labels = *data.labels();
  std::vector<Constraint> ml;
  std::vector<Constraint> cl;
  for (auto id : ids) {
    std::uint64_t lo = 0;
    std::uint64_t hi = t - 2;
    while (lo < hi) {
      const std::uint64_t mid = (lo + hi + 1) / 2;
      if (row_offset(mid) <= id) lo = mid;
      else hi = mid - 1;
    }
    const std::uint64_t a = lo;
    const std::uint64_t b = a + 1 + (id - row_offset(a));
    const Index i = train[a];
    const Index j = train[b];
    (labels[i] == labels[j] ? ml : cl).push_back({i, j, 1.0});
  }
  return ConstraintSet(std::move(ml), std::move(cl));
}

std::vector<std::vector<Index>> connected_components(const ConstraintSet& cs, Index n) {
  cs.check_bounds(n);
  UnionFind uf(n);
  for (const auto& c : cs.must_link()) uf.unite(c.i, c.j);
  std::map<Index, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);
  std::vector<std::vector<Index>> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return out;
}

ConstraintSet augment_constraints(const ConstraintSet& cs) {
  const Index n = cs.max_index() + 1;
  if (n <= 0) return cs;
  UnionFind uf(n);
  for (const auto& c : cs.must_link()) uf.unite(c.i, c.j);
  for (const auto& c : cs.cannot_link()) {
    if (uf.find(c.i) == uf.find(c.j)) throw InconsistentConstraints(c.i, c.j);
  }

  std::map<Index, std::vector<Index>> members;
  for (const auto& c : cs.must_link()) {
    members[uf.find(c.i)];
  }
  for (Index i = 0; i < n; ++i) {
    auto it = members.find(uf.find(i));
    if (it != members.end()) it->second.push_back(i);
  }
  auto component_of = [&](Index i) -> std::vector<Index> {
    auto it = members.find(uf.find(i));
    if (it == members.end()) return {i};
    return it->second;
  };

  std::map<std::pair<Index, Index>, double> ml;
  for (const auto& [root, group] : members)
    for (std::size_t a = 0; a < group.size(); ++a)
      for (std::size_t b = a + 1; b < group.size(); ++b) ml[{group[a], group[b]}] = 1.0;
  for (const auto& c : cs.must_link()) ml[{c.i, c.j}] = c.weight;

  std::map<std::pair<Index, Index>, double> cl;
  std::set<std::pair<Index, Index>> bridged;
  for (const auto& c : cs.cannot_link()) {
    auto ra = uf.find(c.i);
    auto rb = uf.find(c.j);
    if (!bridged.insert({std::min(ra, rb), std::max(ra, rb)}).second) continue;
    const auto pa = component_of(c.i);
    const auto pb = component_of(c.j);
    for (Index x : pa)
      for (Index y : pb) cl.emplace(std::make_pair(std::min(x, y), std::max(x, y)), 1.0);
  }
  for (const auto& c : cs.cannot_link()) cl[{c.i, c.j}] = c.weight;

  std::vector<Constraint> ml_out;
  ml_out.reserve(ml.size());
  for (const auto& [p, w] : ml) ml_out.push_back({p.first, p.second, w});
  std::vector<Constraint> cl_out;
  cl_out.reserve(cl.size());
  for (const auto& [p, w] : cl) cl_out.push_back({p.first, p.second, w});
  return ConstraintSet(std::move(ml_out), std::move(cl_out));
}

ConstraintSet read_constraints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open constraint file '{}'", path.string()));
  std::vector<Constraint> ml;
  std::vector<Constraint> cl;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_line(line, '\t');
    if (cells.size() != 4) throw ParseError(fmt::format("{}:{}: expected 4 tab-separated fields", path.string(), line_no));
    auto i = parse_double(cells[0]);
    auto j = parse_double(cells[1]);
    auto w = parse_double(cells[3]);
    if (!i || !j || !w || *i != std::floor(*i) || *j != std::floor(*j)) {
      throw ParseError(fmt::format("{}:{}: malformed constraint", path.string(), line_no));
    }
    Constraint c{static_cast<Index>(*i), static_cast<Index>(*j), *w};
    if (cells[2] == "ML") ml.push_back(c);
    else if (cells[2] == "CL") cl.push_back(c);
    else throw ParseError(fmt::format("{}:{}: constraint kind must be ML or CL", path.string(), line_no));
  }
  return ConstraintSet(std::move(ml), std::move(cl));
}

void write_constraints(const ConstraintSet& cs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  for (const auto& c : cs.must_link()) out << fmt::format("{}\t{}\tML\t{:.17g}\n", c.i, c.j, c.weight);
  for (const auto& c : cs.cannot_link()) out << fmt::format("{}\t{}\tCL\t{:.17g}\n", c.i, c.j, c.weight);
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, std::vector<Index>* dropped) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  std::vector<Index> kept;
  std::vector<double> scale;
  for (Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - mean(c)).square().mean();
    const double sd = std::sqrt(var);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean(c)))) {
      if (dropped) dropped->push_back(c);
      continue;
    }
    kept.push_back(c);
    scale.push_back(sd);
  }
  Eigen::MatrixXd out(x.rows(), static_cast<Index>(kept.size()));
  for (std::size_t t = 0; t < kept.size(); ++t) {
    out.col(static_cast<Index>(t)) = (x.col(kept[t]).array() - mean(kept[t])) / scale[t];
  }
  return out;
}

}  // namespace kcsc
