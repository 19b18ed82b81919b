#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uncharted/dataset.hpp"
#include "uncharted/forest.hpp"

namespace uncharted {

struct Clustering {
    /// Cluster index in [0, k) per sample. Clusters are numbered in order of
    /// their first sample.
    std::vector<std::size_t> assignments;
    std::size_t k = 0;
    double within_var = 0.0;
    double between_var = 0.0;
    /// K-means only: within-cluster sum of squares after each iteration.
    std::vector<double> wcss_trace;
    std::size_t iterations = 0;
};

struct ClusterVariances {
    /// (1/n) sum_k sum_{x in k} |x - mu_k|^2
    double within_var = 0.0;
    /// (1/n) sum_k n_k |mu_k - mu|^2
    double between_var = 0.0;
};

/// Throws InvalidArgument if any cluster in [0, max index] is empty.
ClusterVariances cluster_variances(const Eigen::MatrixXd& values,
                                   std::span<const std::size_t> assignments);

/// Trace of the population covariance matrix.
double total_variance(const Eigen::MatrixXd& values);

/// Lloyd's algorithm from k distinct random samples. An emptied cluster is
/// reseeded with the sample farthest from its current centroid.
Clustering kmeans(const Eigen::MatrixXd& values, std::size_t k, std::uint64_t seed,
                  std::size_t max_iter = 300);

/// Ward agglomeration (Lance-Williams update) cut at k clusters. On equal
/// merge costs the pair with the lowest indices merges first.
Clustering ward_cluster(const Eigen::MatrixXd& values, std::size_t k);

/// Product-moment correlation. Throws DegenerateError for a constant input.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// Inverse standard normal CDF (Acklam's rational approximation followed by
/// one Halley refinement step). p must lie in (0, 1).
double normal_quantile(double p);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Confidence interval for a correlation via the Fisher z transform.
Interval fisher_ci(double r, std::size_t n, double confidence = 0.99);

struct PcaResult {
    Eigen::MatrixXd scores;    // n_samples x n_components
    Eigen::MatrixXd loadings;  // n_vars x n_components
    /// Population-covariance eigenvalues, nonincreasing.
    Eigen::VectorXd explained;
    double total_variance = 0.0;
};

/// Projection of the column-centred data onto the leading eigenvectors of its
/// population covariance. Each loading's largest-magnitude entry is positive.
PcaResult pca_scores(const Eigen::MatrixXd& values, std::size_t n_components);

struct NeighbourLabel {
    std::string label;
    std::size_t train_index = 0;
    /// Another training sample lies at exactly the same distance.
    bool tied = false;
};

/// Label of the Euclidean nearest training sample; lowest index wins ties.
std::vector<NeighbourLabel> nn1_classify(const Dataset& train, const Eigen::MatrixXd& test);

enum class ClusterMethod { kmeans, ward };
std::string to_string(ClusterMethod method);

struct SweepRecord {
    ClusterMethod method = ClusterMethod::kmeans;
    std::size_t k = 0;
    std::size_t replicate = 0;
    double tiq = 0.0;
    double tsaq = 0.0;
    double within_var = 0.0;
    double between_var = 0.0;
};

struct Correlation {
    std::size_t n = 0;
    std::optional<double> r;
    std::optional<Interval> ci;
    /// Set when r or its interval is undefined (constant series, |r| = 1, n < 4).
    std::optional<std::string> warning;
};

struct MethodSummary {
    ClusterMethod method = ClusterMethod::kmeans;
    Correlation tsaq_within;
    Correlation tiq_between;
    // Cross pairings, reported for comparison.
    Correlation tsaq_between;
    Correlation tiq_within;
};

struct SweepResult {
    std::vector<SweepRecord> records;
    std::vector<MethodSummary> summary;
    double confidence = 0.99;
};

struct SweepConfig {
    std::size_t k_min = 2;
    std::size_t k_max = 7;
    std::size_t replicates = 15;
    double confidence = 0.99;
    std::size_t kmeans_max_iter = 300;
};

/// Clusters the data with K-means (one random restart per replicate) and Ward
/// (deterministic, computed once per k and shared by all replicates), orders
/// the samples by cluster, runs a forest per record and correlates the block
/// metrics with the cluster variances. Every record draws its seeds from
/// forest.seed and its (method, k, replicate) coordinates.
SweepResult sweep_compare(const Eigen::MatrixXd& values, const SweepConfig& sweep,
                          const ForestConfig& forest, std::size_t threads = 1);

/// Pearson correlation with its Fisher interval, or a warning instead.
Correlation correlate(std::span<const double> x, std::span<const double> y, double confidence);

}  // namespace uncharted
