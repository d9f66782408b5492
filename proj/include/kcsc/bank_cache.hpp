#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "kcsc/kernels.hpp"

namespace kcsc {

/// On-disk kernel bank: one binary file per Gram matrix plus manifest.json
/// holding descriptors, scales, per-file checksums and a key identifying the
/// dataset and grid the bank was built from.
///
/// Binary layout: 8-byte magic "KCSCGRM1", uint64 rows, uint64 cols, then
/// rows*cols little-endian doubles in column-major order.
void save_bank(const KernelBank& bank, const std::filesystem::path& dir, const std::string& key);

/// Loads a cached bank. Returns nullopt when the directory has no manifest or
/// the manifest key differs; throws ParseError on corrupt files.
std::optional<KernelBank> load_bank(const std::filesystem::path& dir, const std::string& key);

void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s);
/// Content hash of a dataset (values and labels).
std::uint64_t dataset_hash(const DataMatrix& data);

}  // namespace kcsc
