#include "uncharted/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "uncharted/errors.hpp"
#include "uncharted/parallel.hpp"
#include "uncharted/random.hpp"

namespace uncharted {

std::size_t default_vars_per_tree(std::size_t n_vars) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n_vars)))));
}

const VariableUsage* SplitUsage::find(std::size_t var_index) const {
    for (const auto& v : variables) {
        if (v.var_index == var_index) {
            return &v;
        }
    }
    return nullptr;
}

std::vector<std::size_t> tree_variables(std::uint64_t seed, std::size_t tree_index,
                                        std::size_t n_vars, std::size_t vars_per_tree) {
    auto engine = make_engine(seed, tree_index);
    auto vars = sample_without_replacement(engine, n_vars, vars_per_tree);
    std::sort(vars.begin(), vars.end());
    return vars;
}

Forest grow_forest(const Eigen::MatrixXd& values, const ForestConfig& config,
                   std::size_t threads) {
    const auto n_rows = static_cast<std::size_t>(values.rows());
    const auto n_vars = static_cast<std::size_t>(values.cols());
    if (n_rows == 0 || n_vars == 0) {
        throw InvalidArgument("grow_forest: empty data");
    }
    if (config.n_trees == 0) {
        throw InvalidArgument("grow_forest: n_trees must be positive");
    }
    const std::size_t per_tree = config.vars_per_tree.value_or(default_vars_per_tree(n_vars));
    if (per_tree == 0 || per_tree > n_vars) {
        throw InvalidArgument("grow_forest: vars_per_tree must be in [1, " + std::to_string(n_vars) + "]");
    }

    std::vector<std::size_t> rows(n_rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});

    Forest forest;
    forest.trees.resize(config.n_trees);
    forest.tree_vars.resize(config.n_trees);
    parallel_for(config.n_trees, threads, [&](std::size_t t) {
        forest.tree_vars[t] = tree_variables(config.seed, t, n_vars, per_tree);
        forest.trees[t] = grow_tree(values, rows, forest.tree_vars[t], config.growth);
    });
    forest.usage = split_usage(forest.trees);
    return forest;
}

SplitUsage split_usage(std::span<const UnchartedTree> trees) {
    struct Tally {
        std::size_t count = 0;
        bool at_root = false;
    };
    std::map<std::size_t, std::map<double, Tally>> by_var;
    SplitUsage usage;
    for (const auto& tree : trees) {
        for (const auto* branch : tree.branches()) {
            auto& tally = by_var[branch->var_index][branch->threshold];
            ++tally.count;
            tally.at_root = tally.at_root || branch->depth == 0;
            ++usage.total_branches;
        }
    }
    for (const auto& [var, thresholds] : by_var) {
        VariableUsage v;
        v.var_index = var;
        for (const auto& [threshold, tally] : thresholds) {
            v.usage_count += tally.count;
            v.thresholds.push_back({threshold, tally.count, tally.at_root});
        }
        v.usage_fraction = static_cast<double>(v.usage_count) / static_cast<double>(usage.total_branches);
        usage.variables.push_back(std::move(v));
    }
    return usage;
}

AffinityMatrix::AffinityMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() != values_.cols()) {
        throw InvalidArgument("affinity matrix must be square");
    }
    const Eigen::Index n = values_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (values_(i, i) != 1.0) {
            throw InvalidArgument("affinity matrix diagonal must be exactly 1");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = values_(i, j);
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InvalidArgument("affinity matrix entries must lie in [0, 1]");
            }
            if (std::abs(v - values_(j, i)) > 1e-12) {
                throw InvalidArgument("affinity matrix must be symmetric");
            }
        }
    }
}

AffinityMatrix AffinityMatrix::reordered(std::span<const std::size_t> order) const {
    if (order.size() != size()) {
        throw InvalidArgument("reordered: permutation size mismatch");
    }
    std::vector<Eigen::Index> idx(order.begin(), order.end());
    return AffinityMatrix(Eigen::MatrixXd(values_(idx, idx)));
}

Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> cooccurrence_counts(
    std::span<const UnchartedTree> trees, std::size_t n, std::size_t threads) {
    // leaf_of[t][row] is the position of row's leaf in tree t's leaf list.
    std::vector<std::vector<const UnchartedTree::Leaf*>> leaf_of(trees.size());
    for (std::size_t t = 0; t < trees.size(); ++t) {
        auto& owner = leaf_of[t];
        owner.assign(n, nullptr);
        std::size_t covered = 0;
        for (const auto* leaf : trees[t].leaves()) {
            for (const auto row : leaf->member_rows) {
                if (row >= n || owner[row] != nullptr) {
                    throw DataError("tree " + std::to_string(t) + " does not partition the " +
                                    std::to_string(n) + " samples");
                }
                owner[row] = leaf;
                ++covered;
            }
        }
        if (covered != n) {
            throw DataError("tree " + std::to_string(t) + " does not cover all " +
                            std::to_string(n) + " samples");
        }
    }

    // Each row is filled by one worker, so the integer sums are exact and
    // independent of scheduling.
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> counts =
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(
            static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_for(n, threads, [&](std::size_t a) {
        auto row = counts.row(static_cast<Eigen::Index>(a));
        for (const auto& owner : leaf_of) {
            for (const auto b : owner[a]->member_rows) {
                ++row(static_cast<Eigen::Index>(b));
            }
        }
    });
    return counts;
}

AffinityMatrix build_affinity(std::span<const UnchartedTree> trees, std::size_t n,
                              std::size_t threads) {
    if (trees.empty()) {
        throw InvalidArgument("build_affinity: no trees");
    }
    const auto counts = cooccurrence_counts(trees, n, threads);
    const auto n_trees = static_cast<std::int64_t>(trees.size());
    const auto denom = static_cast<double>(n_trees);
    Eigen::MatrixXd p(counts.rows(), counts.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            const std::int64_t tally = 2 * counts(i, j) - n_trees;
            p(i, j) = std::max(0.0, static_cast<double>(tally) / denom);
        }
    }
    return AffinityMatrix(std::move(p));
}

}  // namespace uncharted
