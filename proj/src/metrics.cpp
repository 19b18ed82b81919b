#include "uncharted/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "uncharted/errors.hpp"

namespace uncharted {

namespace {

void require_layout(const AffinityMatrix& p, const ClassBlocks& blocks) {
    if (blocks.n_rows() != p.size() || blocks.size() == 0) {
        throw InvalidArgument("class blocks do not match the affinity matrix size");
    }
}

// A constant sequence averages to exactly its value.
double mean_of(std::span<const double> v) {
    if (std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end()) {
        return v.front();
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double block_iq(const AffinityMatrix& p, const ClassBlocks& blocks, std::size_t i, std::size_t j) {
    require_layout(p, blocks);
    const auto& bi = blocks[i];
    const auto& bj = blocks[j];
    const double mass = p.values()
                            .block(static_cast<Eigen::Index>(bi.start), static_cast<Eigen::Index>(bj.start),
                                   static_cast<Eigen::Index>(bi.size()), static_cast<Eigen::Index>(bj.size()))
                            .sum();
    return mass / (static_cast<double>(bi.size()) * static_cast<double>(bj.size()));
}

Eigen::MatrixXd iq_matrix(const AffinityMatrix& p, const ClassBlocks& blocks) {
    const auto k = static_cast<Eigen::Index>(blocks.size());
    Eigen::MatrixXd iq(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            iq(i, j) = block_iq(p, blocks, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    return iq;
}

double tiq(const AffinityMatrix& p, const ClassBlocks& blocks) {
    const std::size_t k = blocks.size();
    if (k < 2) {
        throw DegenerateError("TIQ needs at least two class blocks");
    }
    std::vector<double> off;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j) {
                off.push_back(block_iq(p, blocks, i, j));
            }
        }
    }
    return mean_of(off);
}

double tsaq(const AffinityMatrix& p, const ClassBlocks& blocks) {
    require_layout(p, blocks);
    std::vector<double> saq;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        saq.push_back(block_iq(p, blocks, i, i));
    }
    return mean_of(saq);
}

double row_iq(const AffinityMatrix& p, const ClassBlocks& blocks, std::size_t r) {
    require_layout(p, blocks);
    if (blocks.size() < 2) {
        throw DegenerateError("row IQ needs at least two class blocks");
    }
    const auto& own = blocks[blocks.block_of(r)];
    const auto row = p.values().row(static_cast<Eigen::Index>(r));
    double outside = 0.0;
    for (Eigen::Index c = 0; c < row.size(); ++c) {
        if (!own.contains(static_cast<std::size_t>(c))) {
            outside += row(c);
        }
    }
    return outside / static_cast<double>(p.size() - own.size());
}

std::vector<double> row_iqs(const AffinityMatrix& p, const ClassBlocks& blocks) {
    std::vector<double> out(p.size());
    for (std::size_t r = 0; r < p.size(); ++r) {
        out[r] = row_iq(p, blocks, r);
    }
    return out;
}

OutlierScan flag_outliers(std::span<const double> values, double threshold_sigma) {
    if (values.size() < 2) {
        throw InvalidArgument("flag_outliers needs at least two samples");
    }
    OutlierScan scan;
    scan.threshold_sigma = threshold_sigma;
    const auto n = static_cast<double>(values.size());
    scan.mean = mean_of(values);
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - scan.mean) * (v - scan.mean);
    }
    scan.std = std::sqrt(ss / n);
    scan.z.assign(values.size(), 0.0);
    if (!(scan.std > 0.0)) {
        scan.degenerate = true;
        return scan;
    }
    for (std::size_t r = 0; r < values.size(); ++r) {
        scan.z[r] = (values[r] - scan.mean) / scan.std;
        if (values[r] > scan.mean + threshold_sigma * scan.std) {
            scan.flags.push_back({r, values[r], scan.z[r]});
        }
    }
    return scan;
}

VoteResult vote_assign(const AffinityMatrix& p, const ClassBlocks& blocks, std::size_t unknown_block) {
    require_layout(p, blocks);
    if (unknown_block >= blocks.size()) {
        throw InvalidArgument("vote_assign: unknown block index out of range");
    }
    if (blocks.size() < 2) {
        throw DegenerateError("vote_assign: no candidate blocks besides the unknown block");
    }
    VoteResult result;
    std::vector<std::size_t> candidates;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b != unknown_block) {
            candidates.push_back(b);
            result.candidate_labels.push_back(blocks[b].label);
        }
    }
    const auto& unknown = blocks[unknown_block];
    for (std::size_t r = unknown.start; r < unknown.end; ++r) {
        Vote vote;
        vote.row = r;
        const auto row = p.values().row(static_cast<Eigen::Index>(r));
        for (const auto b : candidates) {
            const auto& blk = blocks[b];
            vote.block_means.push_back(
                row.segment(static_cast<Eigen::Index>(blk.start), static_cast<Eigen::Index>(blk.size())).sum() /
                static_cast<double>(blk.size()));
        }
        const double best = *std::max_element(vote.block_means.begin(), vote.block_means.end());
        if (best > 0.0) {
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                if (vote.block_means[c] >= best * (1.0 - kVoteTieTolerance)) {
                    vote.top_labels.push_back(result.candidate_labels[c]);
                }
            }
        }
        result.votes.push_back(std::move(vote));
    }
    return result;
}

MetricsReport compute_metrics(const AffinityMatrix& p, const ClassBlocks& blocks,
                              double threshold_sigma, std::optional<std::size_t> unknown_block) {
    require_layout(p, blocks);
    MetricsReport report;
    for (const auto& b : blocks.blocks()) {
        report.block_labels.push_back(b.label);
        report.block_sizes.push_back(b.size());
    }
    report.iq = iq_matrix(p, blocks);
    report.tsaq = tsaq(p, blocks);
    if (blocks.size() >= 2) {
        report.tiq = tiq(p, blocks);
        report.row_iq = row_iqs(p, blocks);
        if (report.row_iq.size() >= 2) {
            report.outliers = flag_outliers(report.row_iq, threshold_sigma);
        }
    }
    if (unknown_block) {
        report.votes = vote_assign(p, blocks, *unknown_block);
    }
    return report;
}

}  // namespace uncharted
