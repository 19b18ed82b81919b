#pragma once

// Slow reference implementations used to check the library. They share no
// code with it beyond the public types.

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "uncharted/tree.hpp"

namespace oracle {

double spread(std::vector<double> values, uncharted::SpreadMetric metric);

struct Split {
    std::size_t var = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

/// Every (variable, midpoint) pair scored by partitioning the rows and
/// evaluating the gain from scratch. Ties within 1e-12 of the best go to the
/// earliest variable, then the smallest threshold.
std::optional<Split> best_split(const Eigen::MatrixXd& values, const std::vector<std::size_t>& rows,
                                const std::vector<std::size_t>& vars, uncharted::SpreadMetric metric,
                                uncharted::GainMode mode);

/// Elementwise block mean of p over rows [r0, r1) and columns [c0, c1).
double block_mean(const Eigen::MatrixXd& p, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);

struct BlockTotals {
    Eigen::MatrixXd iq;
    double tiq = 0.0;
    double tsaq = 0.0;
};

/// IQ for every block pair plus TIQ and TSAQ; `bounds` holds k+1 block edges.
BlockTotals block_totals(const Eigen::MatrixXd& p, const std::vector<std::size_t>& bounds);

/// Within- and between-cluster variance with 1/n normalization.
std::pair<double, double> variances(const Eigen::MatrixXd& x, const std::vector<std::size_t>& labels);

/// Greedy agglomeration that, at every step, recomputes the WCSS increase of
/// every active pair directly from the member points. Returns cluster
/// membership as sorted row lists, sorted by first row.
std::vector<std::vector<std::size_t>> ward_partition(const Eigen::MatrixXd& x, std::size_t k);

/// Minimal-WCSS split into two nonempty groups, by enumerating every
/// 2-partition (n <= 20).
std::vector<std::vector<std::size_t>> best_two_partition(const Eigen::MatrixXd& x);

/// Membership lists of a label vector, sorted by first row.
std::vector<std::vector<std::size_t>> partition_of(const std::vector<std::size_t>& labels);

/// Fisher-z interval with the two-sided normal critical value from bisection
/// on std::erfc.
std::pair<double, double> fisher_interval(double r, std::size_t n, double confidence);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace oracle
