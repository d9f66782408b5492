#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kcsc/error.hpp"
#include "kcsc/experiment.hpp"
#include "kcsc/synthetic.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long long> approx_rank;
  std::optional<std::string> strategy;
  std::optional<std::string> final_step;
  std::optional<int> trials;
  std::optional<std::string> dataset;
  std::optional<int> k;
  std::optional<std::string> bank_cache;

  void add_to(CLI::App* app, bool with_dataset) {
    app->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Base seed");
    app->add_option("--out", out, "Output directory");
    app->add_option("--approx-rank", approx_rank, "Nystrom rank (0 = exact kernels)");
    app->add_option("--strategy", strategy, "Search strategy")->check(CLI::IsMember({"smbo", "random"}));
    app->add_option("--final", final_step, "Final clustering step")->check(CLI::IsMember({"none", "constrained"}));
    app->add_option("--trials", trials, "Number of trials");
    app->add_option("--bank-cache", bank_cache, "Directory for cached Gram matrices");
    if (with_dataset) {
      app->add_option("--dataset", dataset, "Dataset path or synthetic:<suite>:<n>[:<seed>]");
      app->add_option("--k", k, "Number of clusters");
    }
  }

  void apply(kcsc::ExperimentConfig& c) const {
    if (seed) c.seed = *seed;
    if (out) c.out = *out;
    if (approx_rank) {
      if (*approx_rank == 0) {
        c.approx_rank.reset();
      } else {
        c.approx_rank = *approx_rank;
      }
    }
    if (strategy) c.strategy = kcsc::parse_strategy(*strategy);
    if (final_step) c.final_step = kcsc::parse_final_step(*final_step);
    if (trials) c.trials = *trials;
    if (dataset) c.dataset = *dataset;
    if (k) c.k = *k;
    if (bank_cache) c.bank_cache = *bank_cache;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained clustering with learned sparse kernel combinations"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "Run KernelCSC trials on one dataset");
  run_opts.add_to(run, true);

  Overrides bench_opts;
  auto* bench = app.add_subcommand("bench", "Compare methods across datasets and write a rank table");
  bench_opts.add_to(bench, false);

  Overrides bank_opts;
  auto* build_bank = app.add_subcommand("build-bank", "Build and cache the exact kernel bank");
  bank_opts.add_to(build_bank, true);

  std::string partition;
  std::string score_dataset;
  std::string label_column = "target";
  bool test_only = false;
  auto* score = app.add_subcommand("score", "Score a partition CSV against dataset labels");
  score->add_option("--partition", partition, "Partition CSV")->required()->check(CLI::ExistingFile);
  score->add_option("--dataset", score_dataset, "Dataset path or synthetic:<suite>:<n>[:<seed>]")->required();
  score->add_option("--label", label_column, "Label column name");
  score->add_flag("--test-only", test_only, "Score only rows marked test");

  std::string suite;
  long long n = 300;
  std::uint64_t data_seed = 0;
  std::string data_out;
  auto* make_data = app.add_subcommand("make-data", "Write a synthetic dataset as CSV");
  make_data->add_option("--suite", suite, "noisy-blobs, rings, anisotropic or blobs")->required();
  make_data->add_option("--n", n, "Number of points");
  make_data->add_option("--seed", data_seed, "Generator seed");
  make_data->add_option("--out", data_out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = kcsc::load_config(run_opts.config);
      run_opts.apply(cfg);
      kcsc::cmd_run(cfg);
      std::cout << cfg.out.string() << '\n';
    } else if (*bench) {
      auto cfg = kcsc::load_bench_config(bench_opts.config);
      bench_opts.apply(cfg.base);
      kcsc::cmd_bench(cfg);
      std::cout << (cfg.base.out / "rank_table.csv").string() << '\n';
    } else if (*build_bank) {
      auto cfg = kcsc::load_config(bank_opts.config);
      bank_opts.apply(cfg);
      std::cout << kcsc::cmd_build_bank(cfg).string() << '\n';
    } else if (*score) {
      const auto report = kcsc::cmd_score(partition, score_dataset, label_column, test_only);
      std::cout << kcsc::Json(report).dump(2) << '\n';
    } else if (*make_data) {
      kcsc::save_dataset(kcsc::synthetic::suite(suite, n, data_seed), data_out);
    }
  } catch (const kcsc::ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
