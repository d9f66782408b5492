#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "kcsc/dataio.hpp"
#include "kcsc/forest.hpp"
#include "kcsc/kernels.hpp"
#include "kcsc/metrics.hpp"
#include "kcsc/optimizer.hpp"

namespace kcsc {

using Json = nlohmann::ordered_json;

/// Throws ConfigError naming `where` if `j` has a key outside `allowed`.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

void to_json(Json& j, const KernelDescriptor& d);
void from_json(const Json& j, KernelDescriptor& d);
void to_json(Json& j, const BankGrid& g);
void from_json(const Json& j, BankGrid& g);
void to_json(Json& j, const SplitSpec& s);
void from_json(const Json& j, SplitSpec& s);
void to_json(Json& j, const ForestOptions& f);
void from_json(const Json& j, ForestOptions& f);
void to_json(Json& j, const OptimizerConfig& c);
void from_json(const Json& j, OptimizerConfig& c);
void to_json(Json& j, const MedianHeuristics& m);
void to_json(Json& j, const MetricReport& r);

}  // namespace kcsc
