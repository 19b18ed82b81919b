#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uncharted/tree.hpp"

namespace uncharted {

struct ForestConfig {
    std::size_t n_trees = 100;
    GrowthConfig growth;
    /// Variables drawn per tree; round(sqrt(n_vars)) (at least 1) when unset.
    std::optional<std::size_t> vars_per_tree;
    std::uint64_t seed = 0;
};

/// round(sqrt(n_vars)), at least 1.
std::size_t default_vars_per_tree(std::size_t n_vars);

/// How often one threshold value of a variable was chosen.
struct ThresholdUsage {
    double threshold = 0.0;
    std::size_t count = 0;
    bool ever_at_root = false;
};

struct VariableUsage {
    std::size_t var_index = 0;
    std::size_t usage_count = 0;
    /// usage_count over all branches in the forest.
    double usage_fraction = 0.0;
    /// Sorted by threshold value.
    std::vector<ThresholdUsage> thresholds;
};

/// Decision-boundary statistics over every branch of every tree. Only
/// variables used at least once are listed, in variable-index order.
struct SplitUsage {
    std::size_t total_branches = 0;
    std::vector<VariableUsage> variables;

    const VariableUsage* find(std::size_t var_index) const;
};

struct Forest {
    std::vector<UnchartedTree> trees;
    /// Variables offered to each tree, ascending.
    std::vector<std::vector<std::size_t>> tree_vars;
    SplitUsage usage;
};

/// Variables tree `tree_index` may split on: a uniform draw without
/// replacement from its own random stream, returned in ascending order.
std::vector<std::size_t> tree_variables(std::uint64_t seed, std::size_t tree_index,
                                        std::size_t n_vars, std::size_t vars_per_tree);

/// Grows config.n_trees trees over all rows (no bootstrapping). Each tree is a
/// pure function of (values, config, tree index), so the result is identical
/// for any `threads`.
Forest grow_forest(const Eigen::MatrixXd& values, const ForestConfig& config,
                   std::size_t threads = 1);

SplitUsage split_usage(std::span<const UnchartedTree> trees);

/// Symmetric n x n matrix of association probabilities in [0, 1] with a unit
/// diagonal.
class AffinityMatrix {
public:
    AffinityMatrix() = default;
    /// Throws InvalidArgument unless `values` satisfies the invariants.
    explicit AffinityMatrix(Eigen::MatrixXd values);

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    double operator()(std::size_t row, std::size_t col) const {
        return values_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    }

    /// Rows and columns reordered so that new index i is old index order[i].
    AffinityMatrix reordered(std::span<const std::size_t> order) const;

private:
    Eigen::MatrixXd values_;
};

/// Co-occurrence counts: entry (a, b) is the number of trees in which samples
/// a and b share a leaf. Throws DataError if a tree's leaves do not partition
/// [0, n).
Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> cooccurrence_counts(
    std::span<const UnchartedTree> trees, std::size_t n, std::size_t threads = 1);

/// Tally +1 for every tree in which a pair shares a leaf and -1 for every
/// tree in which it does not, divide by the tree count (the diagonal of the
/// tally) and clamp negatives to zero.
AffinityMatrix build_affinity(std::span<const UnchartedTree> trees, std::size_t n,
                              std::size_t threads = 1);

}  // namespace uncharted
