#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kcsc/cluster.hpp"
#include "kcsc/dataio.hpp"
#include "kcsc/kernels.hpp"
#include "kcsc/metrics.hpp"
#include "kcsc/optimizer.hpp"
#include "kcsc/serialize.hpp"

namespace kcsc {

enum class FinalStep { none, constrained };
std::string to_string(FinalStep f);
FinalStep parse_final_step(const std::string& s);

enum class Method { kernelcsc, mahalanobis_csc, kmeans, single_kernel };
std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Everything needed to reproduce a run. `dataset` is a file path or
/// `synthetic:<suite>:<n>[:<seed>]`.
struct ExperimentConfig {
  std::string dataset;
  std::string label_column = "target";
  /// Number of clusters; defaults to the number of label classes.
  std::optional<int> k;
  SplitSpec split;
  BankGrid grid;
  OptimizerConfig optimizer;
  Strategy strategy = Strategy::smbo;
  /// Nystrom rank; exact Gram matrices when unset.
  std::optional<Index> approx_rank;
  FinalStep final_step = FinalStep::none;
  int trials = 10;
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out = "kcsc-out";
  std::optional<std::filesystem::path> bank_cache;

  /// Throws ConfigError.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

void to_json(Json& j, const ExperimentConfig& c);
void from_json(const Json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);
/// Hash of the settings that determine results (output locations excluded).
std::uint64_t config_hash(const ExperimentConfig& c);

DataMatrix load_experiment_data(const std::string& dataset, const std::string& label_column = "target");

/// Seed of trial t on a dataset: base ^ hash(dataset, t). Shared by all methods.
std::uint64_t trial_seed(std::uint64_t base, const std::string& dataset, int trial);

struct TrialData {
  DataMatrix data;
  ConstraintSet constraints;
  ConstraintSet augmented;
  int k = 0;
  std::uint64_t seed = 0;
};

/// Stratified split, constraint sampling among train rows and augmentation.
TrialData prepare_trial(const DataMatrix& data, const ExperimentConfig& cfg, std::uint64_t seed);

struct Banks {
  std::optional<KernelBank> exact;
  std::optional<MapBank> approx;
};

/// Exact bank (through the cache when configured) or Nystrom maps.
Banks prepare_banks(const DataMatrix& data, const ExperimentConfig& cfg);
std::string bank_key(const DataMatrix& data, const BankGrid& grid);

struct MethodOutcome {
  Partition partition;
  MetricReport metrics;
  double reward = 0.0;
  std::optional<CscResult> csc;
  std::optional<std::size_t> kernel_index;
};

/// Runs one method on one trial and scores it on the test rows.
MethodOutcome run_method(Method method, const TrialData& trial, const Banks& banks, const ExperimentConfig& cfg);

/// Trials of KernelCSC with per-trial partition/metrics/history/model files
/// and an aggregate CSV under cfg.out.
void cmd_run(const ExperimentConfig& cfg);

struct BenchConfig {
  ExperimentConfig base;
  std::vector<std::string> datasets;
  std::vector<Method> methods = {Method::kernelcsc, Method::mahalanobis_csc, Method::kmeans, Method::single_kernel};
  double alpha = 0.05;

  void validate() const;
};

void to_json(Json& j, const BenchConfig& c);
void from_json(const Json& j, BenchConfig& c);
BenchConfig load_bench_config(const std::filesystem::path& path);

struct BenchResult {
  ScoreTable ari;
  RankTable ranks;
};

/// Every (dataset, method, trial) run; writes runs.csv and rank_table.csv.
BenchResult cmd_bench(const BenchConfig& cfg);

/// Builds the exact bank and stores it in cfg.bank_cache (or out/bank).
std::filesystem::path cmd_build_bank(const ExperimentConfig& cfg);

struct PartitionFile {
  std::vector<int> labels;
  std::vector<bool> test;
};

PartitionFile read_partition(const std::filesystem::path& path);

/// Scores a partition file against the dataset labels, on test rows only
/// when `test_only` is set.
MetricReport cmd_score(const std::filesystem::path& partition, const std::string& dataset,
                       const std::string& label_column, bool test_only);

}  // namespace kcsc
