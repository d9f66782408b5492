#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kcsc/dataio.hpp"

namespace kcsc::synthetic {

/// Isotropic Gaussian blobs. Centers drawn uniformly in [-spread, spread]^d.
DataMatrix blobs(Index n, int k, Index d, double spread, double sd, std::uint64_t seed);

/// k blobs in `signal_dims` dimensions at a large raw scale, plus
/// `noise_dims` unit-variance Gaussian columns carrying no cluster signal.
DataMatrix noisy_blobs(Index n, int k, Index signal_dims, Index noise_dims, std::uint64_t seed);

/// Two concentric rings in the plane (radii 1 and 3) with radial jitter.
DataMatrix rings(Index n, double jitter, std::uint64_t seed);

/// Three blobs sheared by a fixed linear map, producing elongated clusters.
DataMatrix anisotropic_blobs(Index n, std::uint64_t seed);

/// Suite by name: "noisy-blobs" (4 blobs in 2 dims plus 5 noise dims), "rings",
/// "anisotropic", or "blobs"
/// (5 well-separated clusters in 10 dimensions).
DataMatrix suite(const std::string& name, Index n, std::uint64_t seed);
/// The benchmark suites (excludes "blobs").
std::vector<std::string> suite_names();

}  // namespace kcsc::synthetic
