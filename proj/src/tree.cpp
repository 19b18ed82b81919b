#include "uncharted/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uncharted/errors.hpp"

namespace uncharted {

namespace {

double sorted_median(std::span<const double> sorted) {
    const std::size_t n = sorted.size();
    if (n % 2 == 1) {
        return sorted[n / 2];
    }
    return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

// Spread of values already in ascending order.
double sorted_spread(std::span<const double> sorted, SpreadMetric metric) {
    const auto n = static_cast<double>(sorted.size());
    if (sorted.size() == 1) {
        return 0.0;
    }
    switch (metric) {
    case SpreadMetric::variance: {
        const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
        double ss = 0.0;
        for (const double x : sorted) {
            ss += (x - mean) * (x - mean);
        }
        return ss / n;
    }
    case SpreadMetric::ad: {
        const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
        double total = 0.0;
        for (const double x : sorted) {
            total += std::abs(x - mean);
        }
        return total / n;
    }
    case SpreadMetric::mad: {
        const double median = sorted_median(sorted);
        std::vector<double> dev(sorted.size());
        std::transform(sorted.begin(), sorted.end(), dev.begin(),
                       [median](double x) { return std::abs(x - median); });
        std::sort(dev.begin(), dev.end());
        return sorted_median(dev);
    }
    }
    return 0.0;
}

double combine(double parent, double left, double right, std::size_t n_left, std::size_t n_right,
               GainMode mode) {
    switch (mode) {
    case GainMode::sum:
        return 1.0 - (left + right) / parent;
    case GainMode::weighted: {
        const auto nl = static_cast<double>(n_left);
        const auto nr = static_cast<double>(n_right);
        return 1.0 - (nl * left + nr * right) / ((nl + nr) * parent);
    }
    case GainMode::literal:
        return 1.0 - (left - right) / parent;
    }
    return 0.0;
}

struct Scored {
    std::size_t var_order;  // position in candidate_vars
    std::size_t split_at;   // left child is sorted[0..split_at]
    double threshold;
    double gain;
};

}  // namespace

std::string to_string(SpreadMetric metric) {
    switch (metric) {
    case SpreadMetric::variance:
        return "variance";
    case SpreadMetric::mad:
        return "mad";
    case SpreadMetric::ad:
        return "ad";
    }
    return "?";
}

std::string to_string(GainMode mode) {
    switch (mode) {
    case GainMode::sum:
        return "sum";
    case GainMode::weighted:
        return "weighted";
    case GainMode::literal:
        return "literal";
    }
    return "?";
}

SpreadMetric parse_spread_metric(const std::string& name) {
    if (name == "variance") return SpreadMetric::variance;
    if (name == "mad") return SpreadMetric::mad;
    if (name == "ad") return SpreadMetric::ad;
    throw InvalidArgument("unknown spread metric '" + name + "'");
}

GainMode parse_gain_mode(const std::string& name) {
    if (name == "sum") return GainMode::sum;
    if (name == "weighted") return GainMode::weighted;
    if (name == "literal") return GainMode::literal;
    throw InvalidArgument("unknown gain mode '" + name + "'");
}

double spread(std::span<const double> values, SpreadMetric metric) {
    if (values.empty()) {
        throw InvalidArgument("spread of an empty sample");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted_spread(sorted, metric);
}

double gain(std::span<const double> parent, std::span<const double> left,
            std::span<const double> right, SpreadMetric metric, GainMode mode) {
    if (left.size() + right.size() != parent.size()) {
        throw InvalidArgument("gain: branches do not partition the parent");
    }
    const double sp = spread(parent, metric);
    if (!(sp > 0.0)) {
        throw DegenerateError("gain: parent node has zero spread");
    }
    const double sl = left.empty() ? 0.0 : spread(left, metric);
    const double sr = right.empty() ? 0.0 : spread(right, metric);
    return combine(sp, sl, sr, left.size(), right.size(), mode);
}

double midpoint(double lo, double hi) noexcept {
    const double mid = 0.5 * (lo + hi);
    return (mid >= lo && mid < hi) ? mid : lo;
}

std::optional<SplitCandidate> best_split(const Eigen::MatrixXd& values,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> candidate_vars,
                                         const GrowthConfig& config) {
    const std::size_t n = rows.size();
    if (n < 2) {
        return std::nullopt;
    }

    std::vector<std::vector<double>> sorted_by_var(candidate_vars.size());
    std::vector<double> parent_spread(candidate_vars.size(), 0.0);
    std::vector<Scored> scored;

    for (std::size_t vi = 0; vi < candidate_vars.size(); ++vi) {
        auto& sorted = sorted_by_var[vi];
        sorted.reserve(n);
        const auto col = static_cast<Eigen::Index>(candidate_vars[vi]);
        for (const auto r : rows) {
            sorted.push_back(values(static_cast<Eigen::Index>(r), col));
        }
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front() == sorted.back()) {
            continue;
        }
        const double sp = sorted_spread(sorted, config.metric);
        if (!(sp > 0.0)) {
            continue;
        }
        parent_spread[vi] = sp;

        if (config.metric == SpreadMetric::variance) {
            // Prefix sums of values centred on the node mean keep cancellation small;
            // near-best candidates are re-scored exactly below.
            const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
            double total1 = 0.0;
            double total2 = 0.0;
            for (const double x : sorted) {
                total1 += x - mean;
                total2 += (x - mean) * (x - mean);
            }
            double s1 = 0.0;
            double s2 = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double d = sorted[i] - mean;
                s1 += d;
                s2 += d * d;
                if (sorted[i] == sorted[i + 1]) {
                    continue;
                }
                const auto nl = static_cast<double>(i + 1);
                const auto nr = static_cast<double>(n - i - 1);
                const double var_l = std::max(0.0, s2 / nl - (s1 / nl) * (s1 / nl));
                const double r1 = total1 - s1;
                const double r2 = total2 - s2;
                const double var_r = std::max(0.0, r2 / nr - (r1 / nr) * (r1 / nr));
                scored.push_back({vi, i, midpoint(sorted[i], sorted[i + 1]),
                                  combine(sp, var_l, var_r, i + 1, n - i - 1, config.gain_mode)});
            }
        } else {
            const std::span<const double> all(sorted);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                if (sorted[i] == sorted[i + 1]) {
                    continue;
                }
                const double sl = sorted_spread(all.first(i + 1), config.metric);
                const double sr = sorted_spread(all.subspan(i + 1), config.metric);
                scored.push_back({vi, i, midpoint(sorted[i], sorted[i + 1]),
                                  combine(sp, sl, sr, i + 1, n - i - 1, config.gain_mode)});
            }
        }
    }
    if (scored.empty()) {
        return std::nullopt;
    }

    double approx_best = -std::numeric_limits<double>::infinity();
    for (const auto& s : scored) {
        approx_best = std::max(approx_best, s.gain);
    }
    const double slack = 1e-9 * std::max(1.0, std::abs(approx_best));

    // Exact re-scoring of the shortlist. `scored` is already in candidate-variable
    // order and, within a variable, in increasing threshold order.
    std::vector<Scored> shortlist;
    for (const auto& s : scored) {
        if (s.gain >= approx_best - slack) {
            Scored exact = s;
            if (config.metric == SpreadMetric::variance) {
                const std::span<const double> all(sorted_by_var[s.var_order]);
                exact.gain = combine(parent_spread[s.var_order],
                                     sorted_spread(all.first(s.split_at + 1), config.metric),
                                     sorted_spread(all.subspan(s.split_at + 1), config.metric),
                                     s.split_at + 1, n - s.split_at - 1, config.gain_mode);
            }
            shortlist.push_back(exact);
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : shortlist) {
        best = std::max(best, s.gain);
    }
    for (const auto& s : shortlist) {
        if (s.gain >= best - kGainTieTolerance) {
            return SplitCandidate{candidate_vars[s.var_order], s.threshold, s.gain};
        }
    }
    return std::nullopt;
}

std::size_t UnchartedTree::leaf_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& node) {
        return std::holds_alternative<Leaf>(node);
    }));
}

std::size_t UnchartedTree::branch_count() const noexcept { return nodes_.size() - leaf_count(); }

std::size_t UnchartedTree::depth() const noexcept {
    std::size_t d = 0;
    for (const auto& node : nodes_) {
        if (const auto* leaf = std::get_if<Leaf>(&node)) {
            d = std::max(d, leaf->depth);
        }
    }
    return d;
}

std::vector<const UnchartedTree::Leaf*> UnchartedTree::leaves() const {
    std::vector<const Leaf*> out;
    for (const auto& node : nodes_) {
        if (const auto* leaf = std::get_if<Leaf>(&node)) {
            out.push_back(leaf);
        }
    }
    return out;
}

std::vector<const UnchartedTree::Branch*> UnchartedTree::branches() const {
    std::vector<const Branch*> out;
    for (const auto& node : nodes_) {
        if (const auto* branch = std::get_if<Branch>(&node)) {
            out.push_back(branch);
        }
    }
    return out;
}

std::size_t UnchartedTree::route(std::span<const double> sample) const {
    std::size_t index = 0;
    while (const auto* branch = std::get_if<Branch>(&nodes_.at(index))) {
        index = sample[branch->var_index] <= branch->threshold ? branch->left : branch->right;
    }
    return index;
}

UnchartedTree grow_tree(const Eigen::MatrixXd& values, std::span<const std::size_t> rows,
                        std::span<const std::size_t> candidate_vars, const GrowthConfig& config) {
    if (rows.empty()) {
        throw InvalidArgument("grow_tree: no rows");
    }
    UnchartedTree tree;
    auto& nodes = tree.nodes_;

    // Nodes are stored in pre-order; the recursion depth is bounded by max_depth.
    auto grow = [&](auto&& self, std::vector<std::size_t> members, std::size_t depth) -> std::size_t {
        const std::size_t index = nodes.size();
        std::optional<SplitCandidate> split;
        if (depth < config.max_depth && members.size() >= config.min_node_size &&
            members.size() >= 2) {
            split = best_split(values, members, candidate_vars, config);
        }
        if (!split) {
            nodes.emplace_back(UnchartedTree::Leaf{std::move(members), depth});
            return index;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        const auto col = static_cast<Eigen::Index>(split->var_index);
        for (const auto r : members) {
            (values(static_cast<Eigen::Index>(r), col) <= split->threshold ? left : right).push_back(r);
        }
        members.clear();
        members.shrink_to_fit();
        nodes.emplace_back(UnchartedTree::Branch{split->var_index, split->threshold, depth, 0, 0});
        const std::size_t l = self(self, std::move(left), depth + 1);
        const std::size_t r = self(self, std::move(right), depth + 1);
        auto& branch = std::get<UnchartedTree::Branch>(nodes[index]);
        branch.left = l;
        branch.right = r;
        return index;
    };
    grow(grow, std::vector<std::size_t>(rows.begin(), rows.end()), 0);
    return tree;
}

}  // namespace uncharted
