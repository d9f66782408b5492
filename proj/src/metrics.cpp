#include "kcsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "kcsc/error.hpp"

namespace kcsc {

namespace {

double choose2(double x) { return 0.5 * x * (x - 1.0); }

double entropy(const std::vector<double>& totals, double n) {
  double h = 0.0;
  for (double t : totals)
    if (t > 0.0) h -= (t / n) * std::log(t / n);
  return h;
}

double mutual_information(const Contingency& c) {
  double mi = 0.0;
  for (std::size_t i = 0; i < c.counts.size(); ++i)
    for (std::size_t j = 0; j < c.counts[i].size(); ++j) {
      const double nij = c.counts[i][j];
      if (nij > 0.0) mi += (nij / c.n) * std::log(c.n * nij / (c.pred_totals[i] * c.truth_totals[j]));
    }
  return std::max(0.0, mi);
}

// Expected mutual information under the hypergeometric permutation model.
double expected_mutual_information(const Contingency& c) {
  const double n = c.n;
  double emi = 0.0;
  for (double a : c.pred_totals) {
    for (double b : c.truth_totals) {
      const double lo = std::max(1.0, a + b - n);
      const double hi = std::min(a, b);
      for (double nij = lo; nij <= hi; nij += 1.0) {
        const double term = (nij / n) * std::log(n * nij / (a * b));
        const double log_p = std::lgamma(a + 1) + std::lgamma(b + 1) + std::lgamma(n - a + 1) + std::lgamma(n - b + 1) -
                             std::lgamma(n + 1) - std::lgamma(nij + 1) - std::lgamma(a - nij + 1) -
                             std::lgamma(b - nij + 1) - std::lgamma(n - a - b + nij + 1);
        emi += term * std::exp(log_p);
      }
    }
  }
  return emi;
}

struct PairCounts {
  double same_both = 0.0;  // true positives
  double same_pred = 0.0;  // pairs together in pred
  double same_truth = 0.0;
};

PairCounts pair_counts(const Contingency& c) {
  PairCounts p;
  for (const auto& row : c.counts)
    for (double v : row) p.same_both += choose2(v);
  for (double a : c.pred_totals) p.same_pred += choose2(a);
  for (double b : c.truth_totals) p.same_truth += choose2(b);
  return p;
}

}  // namespace

Contingency Contingency::build(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw InvalidArgument("prediction and truth lengths differ");
  std::map<int, std::size_t> pred_ids;
  std::map<int, std::size_t> truth_ids;
  for (int p : pred) pred_ids.emplace(p, 0);
  for (int t : truth) truth_ids.emplace(t, 0);
  std::size_t next = 0;
  for (auto& [label, id] : pred_ids) id = next++;
  next = 0;
  for (auto& [label, id] : truth_ids) id = next++;

  Contingency c;
  c.counts.assign(pred_ids.size(), std::vector<double>(truth_ids.size(), 0.0));
  c.pred_totals.assign(pred_ids.size(), 0.0);
  c.truth_totals.assign(truth_ids.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto a = pred_ids[pred[i]];
    const auto b = truth_ids[truth[i]];
    c.counts[a][b] += 1.0;
    c.pred_totals[a] += 1.0;
    c.truth_totals[b] += 1.0;
  }
  c.n = static_cast<double>(pred.size());
  return c;
}

double adjusted_rand_index(const Contingency& c) {
  const auto p = pair_counts(c);
  const double total = choose2(c.n);
  const double expected = p.same_pred * p.same_truth / total;
  const double max_index = 0.5 * (p.same_pred + p.same_truth);
  if (max_index == expected) return 1.0;
  return (p.same_both - expected) / (max_index - expected);
}

double normalized_mutual_information(const Contingency& c) {
  const double hu = entropy(c.pred_totals, c.n);
  const double hv = entropy(c.truth_totals, c.n);
  if (hu == 0.0 && hv == 0.0) return 1.0;
  const double denom = 0.5 * (hu + hv);
  return std::clamp(mutual_information(c) / denom, 0.0, 1.0);
}

double adjusted_mutual_information(const Contingency& c) {
  const auto k_pred = c.pred_totals.size();
  const auto k_truth = c.truth_totals.size();
  const auto n = static_cast<std::size_t>(c.n);
  if ((k_pred == 1 && k_truth == 1) || (k_pred == n && k_truth == n)) return 1.0;
  const double mi = mutual_information(c);
  const double emi = expected_mutual_information(c);
  const double normalizer = std::max(entropy(c.pred_totals, c.n), entropy(c.truth_totals, c.n));
  double denom = normalizer - emi;
  // Guard the sign as well as the magnitude of a vanishing denominator.
  const double eps = std::numeric_limits<double>::epsilon();
  if (std::abs(denom) < eps) denom = denom < 0.0 ? -eps : eps;
  return (mi - emi) / denom;
}

double fowlkes_mallows(const Contingency& c) {
  const auto p = pair_counts(c);
  if (p.same_pred == 0.0 && p.same_truth == 0.0) return 1.0;
  if (p.same_pred == 0.0 || p.same_truth == 0.0) return 0.0;
  return p.same_both / std::sqrt(p.same_pred * p.same_truth);
}

double pairwise_f_score(const Contingency& c) {
  const auto p = pair_counts(c);
  if (p.same_pred == 0.0 && p.same_truth == 0.0) return 1.0;
  if (p.same_both == 0.0) return 0.0;
  const double precision = p.same_both / p.same_pred;
  const double recall = p.same_both / p.same_truth;
  return 2.0 * precision * recall / (precision + recall);
}

MetricReport score(std::span<const int> pred, std::span<const int> truth, std::span<const bool> eval_mask) {
  if (pred.size() != truth.size()) throw InvalidArgument("prediction and truth lengths differ");
  if (!eval_mask.empty() && eval_mask.size() != pred.size()) throw InvalidArgument("eval mask length differs");
  std::vector<int> p;
  std::vector<int> t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!eval_mask.empty() && !eval_mask[i]) continue;
    p.push_back(pred[i]);
    t.push_back(truth[i]);
  }
  if (p.size() < 2) throw InvalidArgument("scoring needs at least 2 evaluated points");
  const auto c = Contingency::build(p, t);
  MetricReport r;
  r.ari = adjusted_rand_index(c);
  r.nmi = normalized_mutual_information(c);
  r.ami = adjusted_mutual_information(c);
  r.fowlkes_mallows = fowlkes_mallows(c);
  r.pairwise_f = pairwise_f_score(c);
  r.n_eval = static_cast<Index>(p.size());
  return r;
}

MetricReport score(std::span<const int> pred, std::span<const int> truth, const std::vector<bool>& eval_mask) {
  auto flat = std::make_unique<bool[]>(eval_mask.size());
  std::copy(eval_mask.begin(), eval_mask.end(), flat.get());
  return score(pred, truth, std::span<const bool>(flat.get(), eval_mask.size()));
}

RankTable rank_algorithms(const ScoreTable& table, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
  if (table.scores.size() != table.datasets.size()) throw InvalidArgument("score table shape mismatch");
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  RankTable out;
  out.datasets = table.datasets;
  out.algorithms = table.algorithms;
  out.alpha = alpha;
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    const auto& row = table.scores[d];
    if (row.size() != table.algorithms.size()) throw InvalidArgument("score table shape mismatch");
    std::vector<RankCell> cells(row.size());
    const std::size_t trials = row.empty() ? 0 : row.front().size();
    for (std::size_t a = 0; a < row.size(); ++a) {
      if (row[a].size() != trials) {
        throw InvalidArgument(fmt::format("dataset '{}' has unequal trial counts", table.datasets[d]));
      }
      if (trials < 2) throw InvalidArgument("ranking needs at least 2 trials per cell");
      const double m = static_cast<double>(trials);
      const double mean = std::accumulate(row[a].begin(), row[a].end(), 0.0) / m;
      double ss = 0.0;
      for (double v : row[a]) ss += (v - mean) * (v - mean);
      cells[a].mean = mean;
      cells[a].sd = std::sqrt(ss / (m - 1.0));
      cells[a].half_width = z * cells[a].sd / std::sqrt(m);
    }
    for (auto& cell : cells) {
      cell.rank = 1 + static_cast<int>(std::count_if(cells.begin(), cells.end(),
                                                     [&](const RankCell& o) { return o.mean > cell.mean; }));
    }
    for (auto& cell : cells) {
      int next_rank = 0;
      for (const auto& o : cells)
        if (o.rank > cell.rank && (next_rank == 0 || o.rank < next_rank)) next_rank = o.rank;
      if (next_rank == 0) continue;
      const double lower = cell.mean - cell.half_width;
      bool vs_next = true;
      bool vs_all = true;
      for (const auto& o : cells) {
        if (o.rank <= cell.rank) continue;
        const bool above = lower > o.mean + o.half_width;
        vs_all = vs_all && above;
        if (o.rank == next_rank) vs_next = vs_next && above;
      }
      cell.significant_vs_next = vs_next;
      cell.significant_vs_all_lower = vs_all;
    }
    out.cells.push_back(std::move(cells));
  }
  return out;
}

}  // namespace kcsc
