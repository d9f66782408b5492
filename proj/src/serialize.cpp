#include "kcsc/serialize.hpp"

#include <fmt/format.h>

#include "kcsc/error.hpp"

namespace kcsc {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

namespace {

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(Json& j, const KernelDescriptor& d) {
  j = Json{{"family", to_string(d.family)}, {"view", to_string(d.view)}, {"width", d.width},
           {"degree", d.degree},            {"offset", d.offset},        {"factor", d.factor}};
}

void from_json(const Json& j, KernelDescriptor& d) {
  check_keys(j, {"family", "view", "width", "degree", "offset", "factor"}, "kernel");
  d = KernelDescriptor{};
  d.family = parse_family(j.at("family").get<std::string>());
  if (j.contains("view")) d.view = parse_view(j.at("view").get<std::string>());
  read_opt(j, "width", d.width);
  read_opt(j, "degree", d.degree);
  read_opt(j, "offset", d.offset);
  read_opt(j, "factor", d.factor);
}

void to_json(Json& j, const BankGrid& g) {
  Json families = Json::array();
  for (auto f : g.families) families.push_back(to_string(f));
  Json views = Json::array();
  for (auto v : g.views) views.push_back(to_string(v));
  j = Json{{"factors", g.factors},
           {"families", families},
           {"views", views},
           {"degrees", g.degrees},
           {"median_max_pairs", g.median_max_pairs},
           {"seed", g.seed}};
}

void from_json(const Json& j, BankGrid& g) {
  check_keys(j, {"factors", "families", "views", "degrees", "median_max_pairs", "seed"}, "grid");
  g = BankGrid{};
  read_opt(j, "factors", g.factors);
  if (j.contains("families")) {
    g.families.clear();
    for (const auto& f : j.at("families")) g.families.push_back(parse_family(f.get<std::string>()));
  }
  if (j.contains("views")) {
    g.views.clear();
    for (const auto& v : j.at("views")) g.views.push_back(parse_view(v.get<std::string>()));
  }
  read_opt(j, "degrees", g.degrees);
  read_opt(j, "median_max_pairs", g.median_max_pairs);
  read_opt(j, "seed", g.seed);
}

void to_json(Json& j, const SplitSpec& s) {
  j = Json{{"train_fraction", s.train_fraction}, {"pair_fraction", s.pair_fraction}, {"max_pairs", s.max_pairs}};
}

void from_json(const Json& j, SplitSpec& s) {
  check_keys(j, {"train_fraction", "pair_fraction", "max_pairs"}, "split");
  s = SplitSpec{};
  read_opt(j, "train_fraction", s.train_fraction);
  read_opt(j, "pair_fraction", s.pair_fraction);
  read_opt(j, "max_pairs", s.max_pairs);
}

void to_json(Json& j, const ForestOptions& f) {
  j = Json{{"trees", f.trees},
           {"max_depth", f.max_depth},
           {"min_samples_leaf", f.min_samples_leaf},
           {"bootstrap", f.bootstrap}};
}

void from_json(const Json& j, ForestOptions& f) {
  check_keys(j, {"trees", "max_depth", "min_samples_leaf", "bootstrap"}, "forest");
  f = ForestOptions{};
  read_opt(j, "trees", f.trees);
  read_opt(j, "max_depth", f.max_depth);
  read_opt(j, "min_samples_leaf", f.min_samples_leaf);
  read_opt(j, "bootstrap", f.bootstrap);
}

void to_json(Json& j, const OptimizerConfig& c) {
  j = Json{{"max_iters", c.max_iters},
           {"sparsity", c.sparsity},
           {"kappa", c.kappa},
           {"warmup", c.warmup},
           {"candidate_pool", c.candidate_pool},
           {"patience", c.patience ? Json(*c.patience) : Json(nullptr)},
           {"restarts", c.restarts},
           {"kmeans_max_iter", c.kmeans_max_iter},
           {"forest", c.forest}};
}

void from_json(const Json& j, OptimizerConfig& c) {
  check_keys(j,
             {"max_iters", "sparsity", "kappa", "warmup", "candidate_pool", "patience", "restarts",
              "kmeans_max_iter", "forest"},
             "optimizer");
  c = OptimizerConfig{};
  read_opt(j, "max_iters", c.max_iters);
  read_opt(j, "sparsity", c.sparsity);
  read_opt(j, "kappa", c.kappa);
  read_opt(j, "warmup", c.warmup);
  read_opt(j, "candidate_pool", c.candidate_pool);
  if (j.contains("patience") && !j.at("patience").is_null()) c.patience = j.at("patience").get<int>();
  read_opt(j, "restarts", c.restarts);
  read_opt(j, "kmeans_max_iter", c.kmeans_max_iter);
  read_opt(j, "forest", c.forest);
}

void to_json(Json& j, const MedianHeuristics& m) {
  j = Json{{"euclidean", m.euclidean}, {"manhattan", m.manhattan}, {"inner_product", m.inner_product}};
}

void to_json(Json& j, const MetricReport& r) {
  j = Json{{"ari", r.ari},
           {"nmi", r.nmi},
           {"ami", r.ami},
           {"fowlkes_mallows", r.fowlkes_mallows},
           {"pairwise_f", r.pairwise_f},
           {"n_eval", r.n_eval}};
}

}  // namespace kcsc
