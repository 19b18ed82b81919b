#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uncharted/dataset.hpp"
#include "uncharted/random.hpp"

namespace fixture {

std::filesystem::path data_dir();
std::filesystem::path iris_path();

/// Seed of the three-blob generator.
inline constexpr std::uint64_t kBlobSeed = 20240601;

/// 90 x 6: 30 unit-variance normal points around each of
/// (0,0,0,0,0,0), (4,4,0,0,4,0) and (0,4,4,4,0,0); labels "b0".."b2".
uncharted::Dataset three_blobs(std::uint64_t seed = kBlobSeed);

/// Seed of the provenance generator.
inline constexpr std::uint64_t kProvenanceSeed = 7321;

/// Four labelled source blobs (src0..src3, 15 samples each, 5 variables,
/// centres 8 units apart) and 12 unknowns labelled "?", four drawn from each
/// of src0, src1 and src2. `truth` holds the generating source of each
/// unknown, in row order.
struct Provenance {
    uncharted::Dataset data;
    std::vector<std::string> truth;
};
Provenance provenance(std::uint64_t seed = kProvenanceSeed);

/// n x v matrix of standard normal values.
Eigen::MatrixXd normal_matrix(uncharted::Engine& rng, std::size_t n, std::size_t v);

/// Random symmetric matrix in [0, 1] with a unit diagonal. With `coarse`,
/// entries are multiples of 1/8.
Eigen::MatrixXd random_affinity(uncharted::Engine& rng, std::size_t n, bool coarse = false);

/// Edges of `k` nonempty contiguous blocks over n rows: k+1 values from 0 to n.
std::vector<std::size_t> random_bounds(uncharted::Engine& rng, std::size_t n, std::size_t k);

/// A fresh empty directory under the system temp path.
std::filesystem::path temp_dir(const std::string& tag);

std::string slurp(const std::filesystem::path& path);

}  // namespace fixture
