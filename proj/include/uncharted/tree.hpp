#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace uncharted {

enum class SpreadMetric {
    variance,  ///< population variance
    mad,       ///< median absolute deviation from the median
    ad,        ///< mean absolute deviation from the mean
};

/// How child spreads combine into the gain of a split.
///  - sum:      1 - (S(left) + S(right)) / S(parent)
///  - weighted: 1 - (n_l S(left) + n_r S(right)) / (n S(parent))
///  - literal:  1 - (S(left) - S(right)) / S(parent)
/// `literal` keeps the subtraction of the original formula; it is not bounded
/// above by 1 and exists for comparison only.
enum class GainMode { sum, weighted, literal };

std::string to_string(SpreadMetric metric);
std::string to_string(GainMode mode);
/// Throws InvalidArgument for unknown names.
SpreadMetric parse_spread_metric(const std::string& name);
GainMode parse_gain_mode(const std::string& name);

struct GrowthConfig {
    std::size_t max_depth = 1;
    std::size_t min_node_size = 5;
    SpreadMetric metric = SpreadMetric::variance;
    GainMode gain_mode = GainMode::sum;
};

/// Spread of a nonempty sample. The result does not depend on the order of
/// `values`. Throws InvalidArgument when empty.
double spread(std::span<const double> values, SpreadMetric metric);

/// Gain of partitioning `parent` into `left` and `right`. Throws
/// DegenerateError when the parent spread is zero.
double gain(std::span<const double> parent, std::span<const double> left,
            std::span<const double> right, SpreadMetric metric, GainMode mode);

/// A decision boundary: rows with value <= threshold go left.
struct SplitCandidate {
    std::size_t var_index = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

/// Threshold halfway between consecutive distinct values lo < hi, guaranteed
/// to satisfy lo <= t < hi.
double midpoint(double lo, double hi) noexcept;

/// Gains closer than this are ties, resolved by candidate-variable order and
/// then by the smaller threshold.
inline constexpr double kGainTieTolerance = 1e-12;

/// Exhaustive search over every variable in `candidate_vars` and every
/// midpoint between consecutive distinct values of that variable over `rows`.
/// Variables with zero spread over `rows` are skipped. Returns nullopt when no
/// variable can be split.
std::optional<SplitCandidate> best_split(const Eigen::MatrixXd& values,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> candidate_vars,
                                         const GrowthConfig& config);

class UnchartedTree {
public:
    struct Branch {
        std::size_t var_index;
        double threshold;
        std::size_t depth;
        std::size_t left;   // node index
        std::size_t right;  // node index
    };
    struct Leaf {
        std::vector<std::size_t> member_rows;
        std::size_t depth;
    };
    using Node = std::variant<Branch, Leaf>;

    /// Root is node 0.
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const Node& root() const { return nodes_.at(0); }

    std::size_t leaf_count() const noexcept;
    std::size_t branch_count() const noexcept;
    std::size_t depth() const noexcept;
    /// Leaves in depth-first (left before right) order.
    std::vector<const Leaf*> leaves() const;
    /// Branches with their depth; the root branch has depth 0.
    std::vector<const Branch*> branches() const;

    /// Routes a sample through the branches; returns the leaf's node index.
    std::size_t route(std::span<const double> sample) const;

private:
    friend UnchartedTree grow_tree(const Eigen::MatrixXd&, std::span<const std::size_t>,
                                   std::span<const std::size_t>, const GrowthConfig&);
    std::vector<Node> nodes_;
};

/// Recursive growth: a node becomes a leaf at max_depth, when it has fewer
/// than min_node_size rows, or when best_split finds nothing to split.
UnchartedTree grow_tree(const Eigen::MatrixXd& values, std::span<const std::size_t> rows,
                        std::span<const std::size_t> candidate_vars, const GrowthConfig& config);

}  // namespace uncharted
