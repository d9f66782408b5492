#include "kcsc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "kcsc/bank_cache.hpp"
#include "kcsc/error.hpp"
#include "kcsc/seeding.hpp"
#include "kcsc/synthetic.hpp"

namespace kcsc {

namespace {

enum : std::uint64_t { kSplitTag = 1, kOptimizerTag = 2, kFinalTag = 3, kBaselineTag = 4, kLandmarkTag = 5 };

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(fmt::format("{} failed: {}", name, e.what()));
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::string stamp(std::uint64_t hash, std::uint64_t seed) {
  return fmt::format("# config_hash={:016x} seed={}\n", hash, seed);
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

std::vector<bool> test_mask(const DataMatrix& data) {
  std::vector<bool> mask(static_cast<std::size_t>(data.rows()), true);
  if (data.train_mask())
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = !(*data.train_mask())[i];
  return mask;
}

void log_line(const std::string& msg) { fmt::print(stderr, "[kcsc] {}\n", msg); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(FinalStep f) { return f == FinalStep::none ? "none" : "constrained"; }

FinalStep parse_final_step(const std::string& s) {
  if (s == "none") return FinalStep::none;
  if (s == "constrained") return FinalStep::constrained;
  throw ConfigError(fmt::format("unknown final step '{}' (expected none or constrained)", s));
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kernelcsc: return "kernelcsc";
    case Method::mahalanobis_csc: return "mahalanobis-csc";
    case Method::kmeans: return "kmeans";
    case Method::single_kernel: return "single-kernel";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::kernelcsc, Method::mahalanobis_csc, Method::kmeans, Method::single_kernel})
    if (to_string(m) == s) return m;
  throw ConfigError(fmt::format("unknown method '{}'", s));
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw ConfigError("config: dataset is required");
  if (k && *k < 1) throw ConfigError(fmt::format("config: k must be >= 1, got {}", *k));
  if (approx_rank && *approx_rank < 1) throw ConfigError("config: approx_rank must be >= 1");
  if (trials < 1) throw ConfigError("config: trials must be >= 1");
  if (kmeans_restarts < 1) throw ConfigError("config: kmeans_restarts must be >= 1");
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw ConfigError("config: split.train_fraction must lie in (0,1)");
  }
  if (!(split.pair_fraction > 0.0 && split.pair_fraction <= 1.0)) {
    throw ConfigError("config: split.pair_fraction must lie in (0,1]");
  }
  if (split.max_pairs < 1) throw ConfigError("config: split.max_pairs must be >= 1");
  try {
    grid.validate();
    optimizer.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return Json(a) == Json(b); }

void to_json(Json& j, const ExperimentConfig& c) {
  j = Json{{"dataset", c.dataset},
           {"label_column", c.label_column},
           {"k", c.k ? Json(*c.k) : Json(nullptr)},
           {"split", c.split},
           {"grid", c.grid},
           {"optimizer", c.optimizer},
           {"strategy", to_string(c.strategy)},
           {"approx_rank", c.approx_rank ? Json(*c.approx_rank) : Json(nullptr)},
           {"final", to_string(c.final_step)},
           {"trials", c.trials},
           {"kmeans_restarts", c.kmeans_restarts},
           {"seed", c.seed},
           {"out", c.out.string()},
           {"bank_cache", c.bank_cache ? Json(c.bank_cache->string()) : Json(nullptr)}};
}

void from_json(const Json& j, ExperimentConfig& c) {
  check_keys(j,
             {"dataset", "label_column", "k", "split", "grid", "optimizer", "strategy", "approx_rank", "final",
              "trials", "kmeans_restarts", "seed", "out", "bank_cache"},
             "config");
  c = ExperimentConfig{};
  try {
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    if (j.contains("label_column")) c.label_column = j.at("label_column").get<std::string>();
    if (j.contains("k") && !j.at("k").is_null()) c.k = j.at("k").get<int>();
    if (j.contains("split")) c.split = j.at("split").get<SplitSpec>();
    if (j.contains("grid")) c.grid = j.at("grid").get<BankGrid>();
    if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerConfig>();
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("approx_rank") && !j.at("approx_rank").is_null()) c.approx_rank = j.at("approx_rank").get<Index>();
    if (j.contains("final")) c.final_step = parse_final_step(j.at("final").get<std::string>());
    if (j.contains("trials")) c.trials = j.at("trials").get<int>();
    if (j.contains("kmeans_restarts")) c.kmeans_restarts = j.at("kmeans_restarts").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("bank_cache") && !j.at("bank_cache").is_null()) c.bank_cache = j.at("bank_cache").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
}

namespace {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return read_json_file(path).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
  }
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  Json j = c;
  j.erase("out");
  j.erase("bank_cache");
  return fnv1a(j.dump());
}

DataMatrix load_experiment_data(const std::string& dataset, const std::string& label_column) {
  constexpr std::string_view prefix = "synthetic:";
  if (!dataset.starts_with(prefix)) return load_dataset(dataset, label_column);
  std::vector<std::string> parts;
  std::stringstream ss(dataset.substr(prefix.size()));
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 3) {
    throw ConfigError(fmt::format("bad synthetic dataset '{}' (expected synthetic:<suite>:<n>[:<seed>])", dataset));
  }
  try {
    const Index n = std::stoll(parts[1]);
    const std::uint64_t seed = parts.size() == 3 ? std::stoull(parts[2]) : 0;
    return synthetic::suite(parts[0], n, seed);
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("bad synthetic dataset '{}'", dataset));
  }
}

std::uint64_t trial_seed(std::uint64_t base, const std::string& dataset, int trial) {
  return base ^ fnv1a(fmt::format("{}#{}", dataset, trial));
}

TrialData prepare_trial(const DataMatrix& data, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!data.labels()) throw ConfigError("dataset has no labels; constraints cannot be sampled");
  const int k = cfg.k.value_or(data.num_classes());
  SplitSpec spec = cfg.split;
  spec.seed = derive_seed(seed, kSplitTag);
  spec.validate(data.rows(), k);
  auto split = stage("split", [&] { return stratified_split(data, spec); });
  auto cs = stage("constraints", [&] { return sample_constraints(split, spec); });
  auto augmented = stage("constraints", [&] { return augment_constraints(cs); });
  return TrialData{std::move(split), std::move(cs), std::move(augmented), k, seed};
}

std::string bank_key(const DataMatrix& data, const BankGrid& grid) {
  return fmt::format("{:016x}-{:016x}", dataset_hash(data), fnv1a(Json(grid).dump()));
}

Banks prepare_banks(const DataMatrix& data, const ExperimentConfig& cfg) {
  Banks banks;
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.approx_rank) {
    banks.approx =
        stage("kernel maps", [&] { return build_map_bank(data, cfg.grid, *cfg.approx_rank, derive_seed(cfg.seed, kLandmarkTag)); });
    log_line(fmt::format("built {} feature maps of rank <= {} in {:.1f}s", banks.approx->size(), *cfg.approx_rank,
                         seconds_since(t0)));
    return banks;
  }
  const auto key = bank_key(data, cfg.grid);
  if (cfg.bank_cache) {
    banks.exact = stage("bank cache", [&] { return load_bank(*cfg.bank_cache, key); });
    if (banks.exact) {
      log_line(fmt::format("loaded {} kernels from {}", banks.exact->size(), cfg.bank_cache->string()));
      return banks;
    }
  }
  banks.exact = stage("kernel bank", [&] { return build_bank(data, cfg.grid); });
  log_line(fmt::format("built {} kernels in {:.1f}s", banks.exact->size(), seconds_since(t0)));
  if (cfg.bank_cache) stage("bank cache", [&] { save_bank(*banks.exact, *cfg.bank_cache, key); });
  return banks;
}

namespace {

Partition final_constrained(const CscResult& r, const TrialData& trial, const Banks& banks, const ExperimentConfig& cfg) {
  const auto seed = derive_seed(trial.seed, kFinalTag);
  if (banks.exact) {
    const auto kernel = combine(*banks.exact, r.beta);
    return constrained_kernel_kmeans(kernel, trial.augmented, r.seeds, trial.k, cfg.optimizer.kmeans_max_iter, seed);
  }
  std::vector<const Eigen::MatrixXd*> blocks;
  std::vector<double> weights;
  for (auto i : r.beta.support()) {
    blocks.push_back(&banks.approx->maps[i].values);
    weights.push_back(r.beta[i]);
  }
  return constrained_kmeans(FeatureSpace(std::move(blocks), std::move(weights)), trial.augmented, r.seeds, trial.k,
                            cfg.optimizer.kmeans_max_iter, seed);
}

}  // namespace

MethodOutcome run_method(Method method, const TrialData& trial, const Banks& banks, const ExperimentConfig& cfg) {
  OptimizerConfig ocfg = cfg.optimizer;
  ocfg.seed = derive_seed(trial.seed, kOptimizerTag);
  MethodOutcome out;
  const auto need_bank = [&] {
    if (!banks.exact && !banks.approx) throw ConfigError(fmt::format("{} needs a kernel bank", to_string(method)));
  };
  switch (method) {
    case Method::kernelcsc: {
      need_bank();
      auto r = stage("optimizer", [&] {
        return banks.exact ? run_csc(*banks.exact, trial.augmented, trial.k, ocfg, cfg.strategy)
                           : run_csc(*banks.approx, trial.augmented, trial.k, ocfg, cfg.strategy);
      });
      out.partition = cfg.final_step == FinalStep::constrained
                          ? stage("final clustering", [&] { return final_constrained(r, trial, banks, cfg); })
                          : r.partition;
      out.csc = std::move(r);
      break;
    }
    case Method::mahalanobis_csc: {
      auto r = stage("optimizer", [&] { return run_mahalanobis_csc(trial.data, trial.augmented, trial.k, ocfg, cfg.strategy); });
      out.partition = r.partition;
      out.csc = std::move(r);
      break;
    }
    case Method::kmeans:
      out.partition = stage("kmeans", [&] {
        return kmeans_baseline(trial.data, trial.k, cfg.kmeans_restarts, derive_seed(trial.seed, kBaselineTag),
                               cfg.optimizer.kmeans_max_iter);
      });
      break;
    case Method::single_kernel: {
      need_bank();
      auto r = stage("single kernel", [&] {
        return banks.exact ? select_single_kernel(*banks.exact, trial.augmented, trial.k, ocfg)
                           : select_single_kernel(*banks.approx, trial.augmented, trial.k, ocfg);
      });
      out.partition = std::move(r.partition);
      out.kernel_index = r.index;
      break;
    }
  }
  out.reward = reward(out.partition, trial.augmented);
  out.metrics = stage("scoring", [&] { return score(out.partition.labels, *trial.data.labels(), test_mask(trial.data)); });
  return out;
}

namespace {

Json descriptor_json(const Banks& banks, std::size_t i) {
  std::optional<KernelDescriptor> d;
  if (banks.exact) d = banks.exact->grams[i].descriptor();
  if (banks.approx) d = banks.approx->maps[i].descriptor;
  return d ? Json{{"name", d->name()}, {"descriptor", *d}} : Json{{"name", fmt::format("kernel{}", i)}};
}

void write_partition(const std::filesystem::path& path, const std::string& header, const Partition& p,
                     const DataMatrix& data) {
  auto out = open_out(path);
  out << header << "row_index,cluster_label,split\n";
  const auto mask = test_mask(data);
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    out << i << ',' << p.labels[i] << ',' << (mask[i] ? "test" : "train") << '\n';
  }
}

void write_history(const std::filesystem::path& path, const std::string& header, const History& h) {
  auto out = open_out(path);
  out << header << "iter,reward,beta_support,beta_values\n";
  for (std::size_t t = 0; t < h.entries().size(); ++t) {
    const auto& e = h.entries()[t];
    std::vector<std::string> support;
    std::vector<std::string> values;
    for (auto i : e.beta.support()) {
      support.push_back(std::to_string(i));
      values.push_back(fmt::format("{}", e.beta[i]));
    }
    out << t << ',' << fmt::format("{}", e.reward) << ',' << join(support, ";") << ',' << join(values, ";") << '\n';
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string metrics_row(const MetricReport& m) {
  return fmt::format("{},{},{},{},{},{}", m.ari, m.nmi, m.ami, m.fowlkes_mallows, m.pairwise_f, m.n_eval);
}

}  // namespace

void cmd_run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto hash = config_hash(cfg);
  const auto header = stamp(hash, cfg.seed);
  const auto data = stage("loading data", [&] { return load_experiment_data(cfg.dataset, cfg.label_column); });
  if (cfg.k && *cfg.k > data.rows()) throw ConfigError(fmt::format("config: k={} exceeds n={}", *cfg.k, data.rows()));
  std::filesystem::create_directories(cfg.out);
  Json stored = cfg;
  stored.erase("out");
  stored.erase("bank_cache");
  stored["config_hash"] = fmt::format("{:016x}", hash);
  write_json(cfg.out / "config.json", stored);

  const auto banks = prepare_banks(data, cfg);
  auto aggregate = open_out(cfg.out / "aggregate.csv");
  aggregate << header << "trial,trial_seed,ari,nmi,ami,fowlkes_mallows,pairwise_f,n_eval,reward\n";
  std::vector<MetricReport> reports;
  for (int t = 0; t < cfg.trials; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto seed = trial_seed(cfg.seed, cfg.dataset, t);
    const auto trial = prepare_trial(data, cfg, seed);
    const auto outcome = run_method(Method::kernelcsc, trial, banks, cfg);
    const auto& csc = *outcome.csc;

    const auto dir = cfg.out / fmt::format("trial_{:03}", t);
    std::filesystem::create_directories(dir);
    const auto trial_header = fmt::format("# config_hash={:016x} seed={} trial_seed={}\n", hash, cfg.seed, seed);
    write_partition(dir / "partition.csv", trial_header, outcome.partition, trial.data);
    write_history(dir / "history.csv", trial_header, csc.history);

    Json metrics{{"config_hash", fmt::format("{:016x}", hash)},
                 {"seed", cfg.seed},
                 {"trial", t},
                 {"trial_seed", seed},
                 {"metrics", outcome.metrics},
                 {"reward", outcome.reward},
                 {"constraints",
                  {{"must_link", trial.constraints.must_link().size()},
                   {"cannot_link", trial.constraints.cannot_link().size()},
                   {"augmented_must_link", trial.augmented.must_link().size()},
                   {"augmented_cannot_link", trial.augmented.cannot_link().size()}}}};
    write_json(dir / "metrics.json", metrics);

    Json kernels = Json::array();
    for (auto i : csc.beta.support()) {
      Json entry{{"index", i}, {"weight", csc.beta[i]}};
      entry.update(descriptor_json(banks, i));
      kernels.push_back(std::move(entry));
    }
    Json seeds = Json::array();
    for (const auto& c : csc.seeds.centers) seeds.push_back(c);
    Json model{{"config_hash", fmt::format("{:016x}", hash)},
               {"seed", cfg.seed},
               {"trial_seed", seed},
               {"k", trial.k},
               {"beta", csc.beta.weights()},
               {"kernels", kernels},
               {"search_reward", csc.reward},
               {"final", to_string(cfg.final_step)},
               {"objective", outcome.partition.objective},
               {"penalty", outcome.partition.penalty},
               {"iterations", outcome.partition.iterations},
               {"seeds", seeds},
               {"labels", outcome.partition.labels}};
    write_json(dir / "model.json", model);

    aggregate << t << ',' << seed << ',' << metrics_row(outcome.metrics) << ',' << fmt::format("{}", outcome.reward)
              << '\n';
    reports.push_back(outcome.metrics);
    log_line(fmt::format("trial {}/{}: test ARI {:.4f}, reward {:.4f} ({:.1f}s)", t + 1, cfg.trials, outcome.metrics.ari,
                         outcome.reward, seconds_since(t0)));
  }
  MetricReport mean;
  for (const auto& r : reports) {
    mean.ari += r.ari / cfg.trials;
    mean.nmi += r.nmi / cfg.trials;
    mean.ami += r.ami / cfg.trials;
    mean.fowlkes_mallows += r.fowlkes_mallows / cfg.trials;
    mean.pairwise_f += r.pairwise_f / cfg.trials;
  }
  aggregate << fmt::format("mean,,{},{},{},{},{},,\n", mean.ari, mean.nmi, mean.ami, mean.fowlkes_mallows,
                           mean.pairwise_f);
}

void BenchConfig::validate() const {
  if (datasets.empty()) throw ConfigError("bench config: at least one dataset is required");
  if (methods.empty()) throw ConfigError("bench config: at least one method is required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("bench config: alpha must lie in (0,1)");
  if (base.trials < 2) throw ConfigError("bench config: ranking needs at least 2 trials");
  for (const auto& d : datasets) {
    ExperimentConfig c = base;
    c.dataset = d;
    c.validate();
  }
}

void to_json(Json& j, const BenchConfig& c) {
  j = c.base;
  j.erase("dataset");
  Json methods = Json::array();
  for (auto m : c.methods) methods.push_back(to_string(m));
  j["datasets"] = c.datasets;
  j["methods"] = methods;
  j["alpha"] = c.alpha;
}

void from_json(const Json& j, BenchConfig& c) {
  if (!j.is_object()) throw ConfigError("bench config: expected an object");
  c = BenchConfig{};
  Json base = j;
  try {
    if (j.contains("datasets")) c.datasets = j.at("datasets").get<std::vector<std::string>>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("bench config: {}", e.what()));
  }
  base.erase("datasets");
  base.erase("methods");
  base.erase("alpha");
  c.base = base.get<ExperimentConfig>();
}

BenchConfig load_bench_config(const std::filesystem::path& path) { return read_json_file(path).get<BenchConfig>(); }

BenchResult cmd_bench(const BenchConfig& cfg) {
  cfg.validate();
  Json hashed = cfg;
  hashed.erase("out");
  hashed.erase("bank_cache");
  const auto hash = fnv1a(hashed.dump());
  const auto header = stamp(hash, cfg.base.seed);
  const auto& out_dir = cfg.base.out;
  std::filesystem::create_directories(out_dir);
  Json stored = cfg;
  stored.erase("out");
  stored.erase("bank_cache");
  stored["config_hash"] = fmt::format("{:016x}", hash);
  write_json(out_dir / "config.json", stored);

  const bool needs_bank = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) {
    return m == Method::kernelcsc || m == Method::single_kernel;
  });
  BenchResult result;
  result.ari.datasets = cfg.datasets;
  for (auto m : cfg.methods) result.ari.algorithms.push_back(to_string(m));

  auto runs = open_out(out_dir / "runs.csv");
  runs << header << "dataset,method,trial,trial_seed,ari,nmi,ami,fowlkes_mallows,pairwise_f,n_eval,reward\n";
  for (const auto& name : cfg.datasets) {
    ExperimentConfig ecfg = cfg.base;
    ecfg.dataset = name;
    const auto data = stage("loading data", [&] { return load_experiment_data(name, ecfg.label_column); });
    const Banks banks = needs_bank ? prepare_banks(data, ecfg) : Banks{};
    std::vector<std::vector<double>> scores(cfg.methods.size());
    for (int t = 0; t < ecfg.trials; ++t) {
      const auto seed = trial_seed(ecfg.seed, name, t);
      const auto trial = prepare_trial(data, ecfg, seed);
      for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto outcome = run_method(cfg.methods[m], trial, banks, ecfg);
        scores[m].push_back(outcome.metrics.ari);
        runs << name << ',' << to_string(cfg.methods[m]) << ',' << t << ',' << seed << ','
             << metrics_row(outcome.metrics) << ',' << fmt::format("{}", outcome.reward) << '\n';
        log_line(fmt::format("{} {} trial {}: test ARI {:.4f} ({:.1f}s)", name, to_string(cfg.methods[m]), t,
                             outcome.metrics.ari, seconds_since(t0)));
      }
    }
    result.ari.scores.push_back(std::move(scores));
  }
  result.ranks = rank_algorithms(result.ari, cfg.alpha);

  auto table = open_out(out_dir / "rank_table.csv");
  table << header << "dataset,method,mean_ari,sd,half_width,rank,significant_vs_next,significant_vs_all_lower\n";
  for (std::size_t d = 0; d < result.ranks.datasets.size(); ++d) {
    for (std::size_t m = 0; m < result.ranks.algorithms.size(); ++m) {
      const auto& c = result.ranks.cells[d][m];
      table << result.ranks.datasets[d] << ',' << result.ranks.algorithms[m] << ','
            << fmt::format("{},{},{},{},{},{}", c.mean, c.sd, c.half_width, c.rank, c.significant_vs_next ? 1 : 0,
                           c.significant_vs_all_lower ? 1 : 0)
            << '\n';
    }
  }
  return result;
}

std::filesystem::path cmd_build_bank(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = stage("loading data", [&] { return load_experiment_data(cfg.dataset, cfg.label_column); });
  const auto dir = cfg.bank_cache.value_or(cfg.out / "bank");
  const auto bank = stage("kernel bank", [&] { return build_bank(data, cfg.grid); });
  stage("bank cache", [&] { save_bank(bank, dir, bank_key(data, cfg.grid)); });
  log_line(fmt::format("wrote {} kernels to {}", bank.size(), dir.string()));
  return dir;
}

PartitionFile read_partition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open partition '{}'", path.string()));
  PartitionFile p;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (!line.starts_with("row_index")) throw ParseError(fmt::format("{}: missing header row", path.string()));
      continue;
    }
    std::stringstream ss(line);
    std::string row;
    std::string label;
    std::string split;
    std::getline(ss, row, ',');
    std::getline(ss, label, ',');
    std::getline(ss, split, ',');
    try {
      if (std::stoull(row) != p.labels.size()) {
        throw ParseError(fmt::format("{}:{}: rows must be listed in order", path.string(), line_no));
      }
      p.labels.push_back(std::stoi(label));
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("{}:{}: malformed row '{}'", path.string(), line_no, line));
    }
    if (!split.empty() && split != "train" && split != "test") {
      throw ParseError(fmt::format("{}:{}: unknown split '{}'", path.string(), line_no, split));
    }
    p.test.push_back(split != "train");
  }
  if (p.labels.empty()) throw ParseError(fmt::format("{}: no rows", path.string()));
  return p;
}

MetricReport cmd_score(const std::filesystem::path& partition, const std::string& dataset,
                       const std::string& label_column, bool test_only) {
  const auto p = read_partition(partition);
  const auto data = load_experiment_data(dataset, label_column);
  if (!data.labels()) throw ConfigError("dataset has no labels to score against");
  if (static_cast<Index>(p.labels.size()) != data.rows()) {
    throw InvalidArgument(fmt::format("partition has {} rows but the dataset has {}", p.labels.size(), data.rows()));
  }
  return test_only ? score(p.labels, *data.labels(), p.test) : score(p.labels, *data.labels(), std::span<const bool>{});
}

}  // namespace kcsc
