#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uncharted/dataset.hpp"
#include "uncharted/forest.hpp"

namespace uncharted {

/// Interaction quotient of blocks i and j: the mean of P over rows of block i
/// and columns of block j. For i == j this is the self association quotient
/// (diagonal entries included).
double block_iq(const AffinityMatrix& p, const ClassBlocks& blocks, std::size_t i, std::size_t j);

/// k x k matrix of block_iq values; the diagonal holds the SAQs.
Eigen::MatrixXd iq_matrix(const AffinityMatrix& p, const ClassBlocks& blocks);

/// Mean of block_iq over ordered pairs i != j. Throws DegenerateError with
/// fewer than two blocks.
double tiq(const AffinityMatrix& p, const ClassBlocks& blocks);

/// Mean of the SAQs over all blocks.
double tsaq(const AffinityMatrix& p, const ClassBlocks& blocks);

/// Mean of P[r, c] over columns c outside r's block. Throws DegenerateError
/// when there is only one block.
double row_iq(const AffinityMatrix& p, const ClassBlocks& blocks, std::size_t r);
std::vector<double> row_iqs(const AffinityMatrix& p, const ClassBlocks& blocks);

struct OutlierFlag {
    std::size_t row = 0;
    double row_iq = 0.0;
    double z = 0.0;
};

struct OutlierScan {
    double mean = 0.0;
    /// Population standard deviation of all row IQs.
    double std = 0.0;
    double threshold_sigma = 3.0;
    /// All row IQs equal; nothing can be flagged.
    bool degenerate = false;
    std::vector<OutlierFlag> flags;
    std::vector<double> z;
};

/// Flags rows whose row IQ exceeds mean + threshold_sigma * std. Throws
/// InvalidArgument for fewer than two values.
OutlierScan flag_outliers(std::span<const double> row_iq_values, double threshold_sigma = 3.0);

struct Vote {
    std::size_t row = 0;
    /// Mean association with each candidate block, in candidate order.
    std::vector<double> block_means;
    /// Empty when unassignable (every mean zero); several entries on a tie.
    std::vector<std::string> top_labels;

    bool assigned() const noexcept { return top_labels.size() == 1; }
    bool tied() const noexcept { return top_labels.size() > 1; }
    bool unassignable() const noexcept { return top_labels.empty(); }
};

struct VoteResult {
    /// Every block except the unknown one, in block order.
    std::vector<std::string> candidate_labels;
    std::vector<Vote> votes;
};

/// Means within this relative distance of the maximum count as tied.
inline constexpr double kVoteTieTolerance = 1e-12;

/// Maximum-vote assignment of each row in `unknown_block` to the candidate
/// block with the highest mean association. Ties are reported, never broken.
VoteResult vote_assign(const AffinityMatrix& p, const ClassBlocks& blocks, std::size_t unknown_block);

struct MetricsReport {
    std::vector<std::string> block_labels;
    std::vector<std::size_t> block_sizes;
    Eigen::MatrixXd iq;
    std::optional<double> tiq;  // absent with a single block
    double tsaq = 0.0;
    std::vector<double> row_iq;
    std::optional<OutlierScan> outliers;
    std::optional<VoteResult> votes;
};

/// Every block metric at once. Row IQs and outlier flags need at least two
/// blocks; votes are computed when `unknown_block` is given.
MetricsReport compute_metrics(const AffinityMatrix& p, const ClassBlocks& blocks,
                              double threshold_sigma = 3.0,
                              std::optional<std::size_t> unknown_block = std::nullopt);

}  // namespace uncharted
