#pragma once

#include <span>
#include <string>
#include <vector>

#include "kcsc/dataio.hpp"

namespace kcsc {

struct MetricReport {
  double ari = 0.0;
  double nmi = 0.0;
  double ami = 0.0;
  double fowlkes_mallows = 0.0;
  double pairwise_f = 0.0;
  Index n_eval = 0;
};

/// Contingency counts between two labelings of the same points.
struct Contingency {
  std::vector<std::vector<double>> counts;  // [pred cluster][true class]
  std::vector<double> pred_totals;
  std::vector<double> truth_totals;
  double n = 0.0;

  static Contingency build(std::span<const int> pred, std::span<const int> truth);
};

double adjusted_rand_index(const Contingency& c);
/// Mutual information normalized by the arithmetic mean of the entropies.
double normalized_mutual_information(const Contingency& c);
/// Chance-adjusted mutual information normalized by the larger entropy.
double adjusted_mutual_information(const Contingency& c);
double fowlkes_mallows(const Contingency& c);
/// F1 of same-cluster pair precision and recall.
double pairwise_f_score(const Contingency& c);

/// Metrics over the rows where eval_mask is true (all rows when empty).
MetricReport score(std::span<const int> pred, std::span<const int> truth, std::span<const bool> eval_mask = {});
MetricReport score(std::span<const int> pred, std::span<const int> truth, const std::vector<bool>& eval_mask);

/// Per-trial scores indexed [dataset][algorithm][trial].
struct ScoreTable {
  std::vector<std::string> datasets;
  std::vector<std::string> algorithms;
  std::vector<std::vector<std::vector<double>>> scores;
};

struct RankCell {
  double mean = 0.0;
  double sd = 0.0;
  double half_width = 0.0;
  int rank = 0;
  /// Interval lies strictly above those of every algorithm at the next rank.
  bool significant_vs_next = false;
  /// Interval lies strictly above those of every lower-ranked algorithm.
  bool significant_vs_all_lower = false;
};

struct RankTable {
  std::vector<std::string> datasets;
  std::vector<std::string> algorithms;
  std::vector<std::vector<RankCell>> cells;  // [dataset][algorithm]
  double alpha = 0.05;
};

/// Ranks algorithms per dataset by mean score (higher is better, ties share
/// the minimum rank) with normal intervals mean +- z_{1-alpha/2} sd / sqrt(trials).
RankTable rank_algorithms(const ScoreTable& table, double alpha = 0.05);

}  // namespace kcsc
