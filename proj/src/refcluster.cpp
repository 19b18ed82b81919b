#include "uncharted/refcluster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "uncharted/errors.hpp"
#include "uncharted/metrics.hpp"
#include "uncharted/parallel.hpp"
#include "uncharted/random.hpp"

namespace uncharted {

namespace {

using Index = Eigen::Index;

std::size_t cluster_count(std::span<const std::size_t> assignments) {
    if (assignments.empty()) {
        throw InvalidArgument("no assignments");
    }
    return *std::max_element(assignments.begin(), assignments.end()) + 1;
}

Eigen::MatrixXd centroids_of(const Eigen::MatrixXd& values, std::span<const std::size_t> assignments,
                             std::size_t k, std::vector<std::size_t>& sizes) {
    Eigen::MatrixXd centres = Eigen::MatrixXd::Zero(static_cast<Index>(k), values.cols());
    sizes.assign(k, 0);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        centres.row(static_cast<Index>(assignments[i])) += values.row(static_cast<Index>(i));
        ++sizes[assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] > 0) {
            centres.row(static_cast<Index>(c)) /= static_cast<double>(sizes[c]);
        }
    }
    return centres;
}

double wcss(const Eigen::MatrixXd& values, std::span<const std::size_t> assignments,
            const Eigen::MatrixXd& centres) {
    double total = 0.0;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        total += (values.row(static_cast<Index>(i)) - centres.row(static_cast<Index>(assignments[i]))).squaredNorm();
    }
    return total;
}

// Renumbers clusters in order of their first sample.
std::vector<std::size_t> canonical_labels(std::span<const std::size_t> raw) {
    std::vector<std::size_t> map(cluster_count(raw), std::numeric_limits<std::size_t>::max());
    std::size_t next = 0;
    std::vector<std::size_t> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (map[raw[i]] == std::numeric_limits<std::size_t>::max()) {
            map[raw[i]] = next++;
        }
        out[i] = map[raw[i]];
    }
    return out;
}

void finish(Clustering& c, const Eigen::MatrixXd& values) {
    c.assignments = canonical_labels(c.assignments);
    const auto v = cluster_variances(values, c.assignments);
    c.within_var = v.within_var;
    c.between_var = v.between_var;
}

void require_k(std::size_t k, std::size_t n) {
    if (k == 0) {
        throw InvalidArgument("cluster count must be positive");
    }
    if (k > n) {
        throw InvalidArgument("cluster count " + std::to_string(k) + " exceeds sample count " +
                              std::to_string(n));
    }
}

}  // namespace

ClusterVariances cluster_variances(const Eigen::MatrixXd& values,
                                   std::span<const std::size_t> assignments) {
    if (assignments.size() != static_cast<std::size_t>(values.rows())) {
        throw InvalidArgument("cluster_variances: one assignment per sample required");
    }
    const std::size_t k = cluster_count(assignments);
    std::vector<std::size_t> sizes;
    const Eigen::MatrixXd centres = centroids_of(values, assignments, k, sizes);
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end()) {
        throw InvalidArgument("cluster_variances: empty cluster");
    }
    const auto n = static_cast<double>(values.rows());
    const Eigen::RowVectorXd mean = values.colwise().mean();
    ClusterVariances out;
    out.within_var = wcss(values, assignments, centres) / n;
    double between = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        between += static_cast<double>(sizes[c]) * (centres.row(static_cast<Index>(c)) - mean).squaredNorm();
    }
    out.between_var = between / n;
    return out;
}

double total_variance(const Eigen::MatrixXd& values) {
    const Eigen::RowVectorXd mean = values.colwise().mean();
    return (values.rowwise() - mean).squaredNorm() / static_cast<double>(values.rows());
}

Clustering kmeans(const Eigen::MatrixXd& values, std::size_t k, std::uint64_t seed,
                  std::size_t max_iter) {
    const auto n = static_cast<std::size_t>(values.rows());
    require_k(k, n);

    auto engine = make_engine(seed, 0);
    const auto init = sample_without_replacement(engine, n, k);
    Eigen::MatrixXd centres(static_cast<Index>(k), values.cols());
    for (std::size_t c = 0; c < k; ++c) {
        centres.row(static_cast<Index>(c)) = values.row(static_cast<Index>(init[c]));
    }

    Clustering result;
    result.k = k;
    std::vector<std::size_t> assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> sizes;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = (values.row(static_cast<Index>(i)) - centres.row(static_cast<Index>(c))).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
        centres = centroids_of(values, assign, k, sizes);

        // Reseed emptied clusters from the sample farthest from its centroid,
        // taken only from clusters that can spare a member.
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) {
                continue;
            }
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[assign[i]] < 2) {
                    continue;
                }
                const double d = (values.row(static_cast<Index>(i)) - centres.row(static_cast<Index>(assign[i]))).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            const std::size_t donor = assign[far];
            assign[far] = c;
            --sizes[donor];
            sizes[c] = 1;
            centres = centroids_of(values, assign, k, sizes);
        }
        result.wcss_trace.push_back(wcss(values, assign, centres));
        result.iterations = iter + 1;
    }
    result.assignments = std::move(assign);
    finish(result, values);
    return result;
}

Clustering ward_cluster(const Eigen::MatrixXd& values, std::size_t k) {
    const auto n = static_cast<std::size_t>(values.rows());
    require_k(k, n);

    // cost(i, j): increase in within-cluster sum of squares when merging the
    // clusters held in slots i < j. A merged cluster keeps the lower slot, so
    // each slot's id is its smallest member index.
    std::vector<double> cost(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            cost[i * n + j] = 0.5 * (values.row(static_cast<Index>(i)) - values.row(static_cast<Index>(j))).squaredNorm();
        }
    }
    auto at = [&](std::size_t a, std::size_t b) -> double& {
        return a < b ? cost[a * n + b] : cost[b * n + a];
    };

    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    std::vector<std::size_t> owner(n);
    std::iota(owner.begin(), owner.end(), std::size_t{0});

    for (std::size_t clusters = n; clusters > k; --clusters) {
        std::size_t bi = 0;
        std::size_t bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (active[j] && cost[i * n + j] < best) {
                    best = cost[i * n + j];
                    bi = i;
                    bj = j;
                }
            }
        }
        const auto ni = static_cast<double>(size[bi]);
        const auto nj = static_cast<double>(size[bj]);
        for (std::size_t m = 0; m < n; ++m) {
            if (!active[m] || m == bi || m == bj) continue;
            const auto nm = static_cast<double>(size[m]);
            at(bi, m) = ((nm + ni) * at(bi, m) + (nm + nj) * at(bj, m) - nm * best) / (nm + ni + nj);
        }
        size[bi] += size[bj];
        active[bj] = false;
        for (auto& o : owner) {
            if (o == bj) o = bi;
        }
    }

    Clustering result;
    result.k = k;
    result.assignments = std::move(owner);
    finish(result, values);
    return result;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw InvalidArgument("pearson_r: length mismatch");
    }
    if (x.size() < 3) {
        throw InvalidArgument("pearson_r: at least three pairs required");
    }
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) {
        throw DegenerateError("pearson_r: constant series");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
    }
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                             -2.759285104469687e+02, 1.383577518672690e+02,
                                             -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                             -1.556989798598866e+02, 6.680131188771972e+01,
                                             -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                             -2.400758277161838e+00, -2.549732539343734e+00,
                                             4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                             2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x = 0.0;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step against the exact CDF.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

Interval fisher_ci(double r, std::size_t n, double confidence) {
    if (!(std::abs(r) < 1.0)) {
        throw DegenerateError("fisher_ci: |r| must be below 1");
    }
    if (n < 4) {
        throw InvalidArgument("fisher_ci: at least four samples required");
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw InvalidArgument("fisher_ci: confidence must lie in (0, 1)");
    }
    const double z = std::atanh(r);
    const double half = normal_quantile(0.5 + 0.5 * confidence) / std::sqrt(static_cast<double>(n - 3));
    return {std::tanh(z - half), std::tanh(z + half)};
}

PcaResult pca_scores(const Eigen::MatrixXd& values, std::size_t n_components) {
    const auto n = static_cast<std::size_t>(values.rows());
    const auto p = static_cast<std::size_t>(values.cols());
    if (n_components == 0 || n_components > std::min(n, p)) {
        throw InvalidArgument("pca_scores: n_components must be in [1, min(n_samples, n_vars)]");
    }
    const Eigen::RowVectorXd mean = values.colwise().mean();
    const Eigen::MatrixXd centred = values.rowwise() - mean;
    const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
        throw DegenerateError("pca_scores: eigendecomposition failed");
    }
    // Eigen returns ascending eigenvalues.
    const auto m = static_cast<Index>(n_components);
    PcaResult out;
    out.total_variance = cov.trace();
    out.explained.resize(m);
    out.loadings.resize(static_cast<Index>(p), m);
    for (Index c = 0; c < m; ++c) {
        const Index src = static_cast<Index>(p) - 1 - c;
        out.explained(c) = std::max(0.0, eig.eigenvalues()(src));
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        Index lead = 0;
        v.cwiseAbs().maxCoeff(&lead);
        if (v(lead) < 0.0) {
            v = -v;
        }
        out.loadings.col(c) = v;
    }
    out.scores = centred * out.loadings;
    return out;
}

std::vector<NeighbourLabel> nn1_classify(const Dataset& train, const Eigen::MatrixXd& test) {
    if (!train.labels || train.n_samples() == 0) {
        throw InvalidArgument("nn1_classify: training data must be labelled and nonempty");
    }
    if (test.cols() != train.values.cols()) {
        throw InvalidArgument("nn1_classify: variable count mismatch");
    }
    std::vector<NeighbourLabel> out;
    out.reserve(static_cast<std::size_t>(test.rows()));
    for (Index t = 0; t < test.rows(); ++t) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        bool tied = false;
        for (std::size_t i = 0; i < train.n_samples(); ++i) {
            const double d = (train.values.row(static_cast<Index>(i)) - test.row(t)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
                tied = false;
            } else if (d == best_d) {
                tied = true;
            }
        }
        out.push_back({(*train.labels)[best], best, tied});
    }
    return out;
}

std::string to_string(ClusterMethod method) {
    return method == ClusterMethod::kmeans ? "kmeans" : "ward";
}

Correlation correlate(std::span<const double> x, std::span<const double> y, double confidence) {
    Correlation c;
    c.n = x.size();
    try {
        c.r = pearson_r(x, y);
    } catch (const Error& e) {
        c.warning = e.what();
        return c;
    }
    try {
        c.ci = fisher_ci(*c.r, c.n, confidence);
    } catch (const Error& e) {
        c.warning = e.what();
    }
    return c;
}

SweepResult sweep_compare(const Eigen::MatrixXd& values, const SweepConfig& sweep,
                          const ForestConfig& forest, std::size_t threads) {
    const auto n = static_cast<std::size_t>(values.rows());
    if (sweep.k_min < 2 || sweep.k_min > sweep.k_max || sweep.k_max > n) {
        throw InvalidArgument("sweep_compare: k range must lie within [2, n_samples]");
    }
    if (sweep.replicates == 0) {
        throw InvalidArgument("sweep_compare: replicates must be positive");
    }

    const std::array methods{ClusterMethod::kmeans, ClusterMethod::ward};
    const std::size_t n_k = sweep.k_max - sweep.k_min + 1;

    std::vector<Clustering> ward(n_k);
    parallel_for(n_k, threads, [&](std::size_t i) { ward[i] = ward_cluster(values, sweep.k_min + i); });

    SweepResult result;
    result.confidence = sweep.confidence;
    result.records.resize(methods.size() * n_k * sweep.replicates);
    parallel_for(result.records.size(), threads, [&](std::size_t cell) {
        const std::size_t m = cell / (n_k * sweep.replicates);
        const std::size_t ki = (cell / sweep.replicates) % n_k;
        const std::size_t rep = cell % sweep.replicates;
        const std::size_t k = sweep.k_min + ki;
        const std::uint64_t stream = (static_cast<std::uint64_t>(m) << 48) |
                                     (static_cast<std::uint64_t>(k) << 24) | rep;

        const Clustering clustering = methods[m] == ClusterMethod::kmeans
                                          ? kmeans(values, k, stream_seed(forest.seed, 2 * stream + 1),
                                                   sweep.kmeans_max_iter)
                                          : ward[ki];

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return clustering.assignments[a] < clustering.assignments[b];
        });
        std::vector<std::string> labels(n);
        std::vector<Index> idx(order.begin(), order.end());
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = std::to_string(clustering.assignments[order[i]]);
        }
        const Eigen::MatrixXd ordered = values(idx, Eigen::all);
        const auto blocks = ClassBlocks::from_grouped_labels(labels);

        ForestConfig cfg = forest;
        cfg.seed = stream_seed(forest.seed, 2 * stream);
        const auto grown = grow_forest(ordered, cfg, 1);
        const auto p = build_affinity(grown.trees, n, 1);

        auto& rec = result.records[cell];
        rec.method = methods[m];
        rec.k = k;
        rec.replicate = rep;
        rec.tiq = tiq(p, blocks);
        rec.tsaq = tsaq(p, blocks);
        rec.within_var = clustering.within_var;
        rec.between_var = clustering.between_var;
    });

    for (const auto method : methods) {
        std::vector<double> t_iq, t_saq, within, between;
        for (const auto& rec : result.records) {
            if (rec.method == method) {
                t_iq.push_back(rec.tiq);
                t_saq.push_back(rec.tsaq);
                within.push_back(rec.within_var);
                between.push_back(rec.between_var);
            }
        }
        result.summary.push_back({method, correlate(t_saq, within, sweep.confidence),
                                  correlate(t_iq, between, sweep.confidence),
                                  correlate(t_saq, between, sweep.confidence),
                                  correlate(t_iq, within, sweep.confidence)});
    }
    return result;
}

}  // namespace uncharted
