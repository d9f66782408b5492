#include "kcsc/bank_cache.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "kcsc/error.hpp"
#include "kcsc/serialize.hpp"

namespace kcsc {

static_assert(std::endian::native == std::endian::little, "bank cache assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'C', 'S', 'C', 'G', 'R', 'M', '1'};
constexpr const char* kManifest = "manifest.json";

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t matrix_checksum(const Eigen::MatrixXd& m) {
  return fnv1a(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::uint64_t dataset_hash(const DataMatrix& data) {
  const auto& x = data.values();
  const std::array<std::int64_t, 2> dims = {static_cast<std::int64_t>(x.rows()), static_cast<std::int64_t>(x.cols())};
  std::uint64_t h = fnv1a(dims.data(), sizeof(dims));
  h = fnv1a(x.data(), static_cast<std::size_t>(x.size()) * sizeof(double), h);
  if (data.labels()) h = fnv1a(data.labels()->data(), data.labels()->size() * sizeof(int), h);
  return h;
}

void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
  const std::array<std::uint64_t, 2> dims = {static_cast<std::uint64_t>(m.rows()),
                                             static_cast<std::uint64_t>(m.cols())};
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(dims.data()), sizeof(dims));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw Error(fmt::format("failed writing '{}'", path.string()));
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
  std::array<char, 8> magic{};
  std::array<std::uint64_t, 2> dims{};
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(dims.data()), sizeof(dims));
  if (!in || magic != kMagic) throw ParseError(fmt::format("'{}' is not a kernel matrix file", path.string()));
  const auto expected = sizeof(magic) + sizeof(dims) + dims[0] * dims[1] * sizeof(double);
  if (std::filesystem::file_size(path) != expected) {
    throw ParseError(fmt::format("'{}' has the wrong size for a {}x{} matrix", path.string(), dims[0], dims[1]));
  }
  Eigen::MatrixXd m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw ParseError(fmt::format("truncated matrix file '{}'", path.string()));
  return m;
}

void save_bank(const KernelBank& bank, const std::filesystem::path& dir, const std::string& key) {
  std::filesystem::create_directories(dir);
  Json kernels = Json::array();
  for (std::size_t i = 0; i < bank.grams.size(); ++i) {
    const auto& g = bank.grams[i];
    const auto file = fmt::format("k{:03}.bin", i);
    write_matrix(g.values(), dir / file);
    Json entry{{"file", file}, {"scale", g.scale()}, {"shift", g.shift()}, {"checksum", hex(matrix_checksum(g.values()))}};
    entry["descriptor"] = g.descriptor() ? Json(*g.descriptor()) : Json(nullptr);
    kernels.push_back(std::move(entry));
  }
  Json views = Json::array();
  for (const auto& v : bank.views) {
    views.push_back(Json{{"view", to_string(v.view)}, {"medians", v.medians}, {"dropped_features", v.dropped_features}});
  }
  const Json manifest{{"key", key}, {"rows", bank.rows()}, {"kernels", kernels}, {"views", views}};
  std::ofstream out(dir / kManifest);
  if (!out) throw Error(fmt::format("cannot write manifest in '{}'", dir.string()));
  out << manifest.dump(2) << '\n';
}

std::optional<KernelBank> load_bank(const std::filesystem::path& dir, const std::string& key) {
  const auto manifest_path = dir / kManifest;
  if (!std::filesystem::exists(manifest_path)) return std::nullopt;
  std::ifstream in(manifest_path);
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("corrupt manifest '{}': {}", manifest_path.string(), e.what()));
  }
  if (manifest.value("key", std::string{}) != key) return std::nullopt;

  KernelBank bank;
  try {
    for (const auto& entry : manifest.at("kernels")) {
      const auto path = dir / entry.at("file").get<std::string>();
      auto values = read_matrix(path);
      if (hex(matrix_checksum(values)) != entry.at("checksum").get<std::string>()) {
        throw ParseError(fmt::format("checksum mismatch for '{}'", path.string()));
      }
      std::optional<KernelDescriptor> desc;
      if (!entry.at("descriptor").is_null()) desc = entry.at("descriptor").get<KernelDescriptor>();
      bank.grams.emplace_back(std::move(values), desc, entry.at("scale").get<double>(),
                              entry.at("shift").get<double>());
    }
    for (const auto& v : manifest.at("views")) {
      ViewInfo info;
      info.view = parse_view(v.at("view").get<std::string>());
      info.medians.euclidean = v.at("medians").at("euclidean").get<double>();
      info.medians.manhattan = v.at("medians").at("manhattan").get<double>();
      info.medians.inner_product = v.at("medians").at("inner_product").get<double>();
      info.dropped_features = v.at("dropped_features").get<std::vector<Index>>();
      bank.views.push_back(std::move(info));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("corrupt manifest '{}': {}", manifest_path.string(), e.what()));
  }
  return bank;
}

}  // namespace kcsc
