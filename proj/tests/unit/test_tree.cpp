#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "uncharted/errors.hpp"
#include "uncharted/tree.hpp"

using namespace uncharted;

namespace {

const std::vector<double> kTwoClusters{0, 1, 2, 3, 4, 100, 101, 102, 103, 104};

Eigen::MatrixXd column(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

TEST_CASE("spread examples") {
    const std::vector<double> c{2, 2, 2, 2, 2};
    CHECK(spread(c, SpreadMetric::variance) == 0.0);
    const std::vector<double> a{1, 2, 3, 4, 5};
    CHECK(spread(a, SpreadMetric::variance) == 2.0);
    const std::vector<double> b{1, 2, 3, 4, 100};
    CHECK(spread(b, SpreadMetric::mad) == 1.0);
    CHECK(spread(a, SpreadMetric::ad) == doctest::Approx(1.2));
    const std::vector<double> one{7.0};
    for (auto m : {SpreadMetric::variance, SpreadMetric::mad, SpreadMetric::ad}) {
        CHECK(spread(one, m) == 0.0);
    }
    CHECK_THROWS_AS(spread(std::vector<double>{}, SpreadMetric::variance), InvalidArgument);
}

TEST_CASE("spread agrees with the oracle on random samples") {
    auto rng = make_engine(17, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 30);
        std::vector<double> v(n);
        for (auto& x : v) x = standard_normal(rng) * 10.0;
        for (auto m : {SpreadMetric::variance, SpreadMetric::mad, SpreadMetric::ad}) {
            CHECK(spread(v, m) == doctest::Approx(oracle::spread(v, m)).epsilon(1e-12));
        }
    }
}

TEST_CASE("gain examples") {
    const std::vector<double> left(kTwoClusters.begin(), kTwoClusters.begin() + 5);
    const std::vector<double> right(kTwoClusters.begin() + 5, kTwoClusters.end());
    CHECK(spread(kTwoClusters, SpreadMetric::variance) == 2502.0);
    CHECK(gain(kTwoClusters, left, right, SpreadMetric::variance, GainMode::sum) ==
          doctest::Approx(1.0 - 4.0 / 2502.0).epsilon(1e-14));
    CHECK(gain(kTwoClusters, left, right, SpreadMetric::variance, GainMode::weighted) ==
          doctest::Approx(1.0 - 2.0 / 2502.0).epsilon(1e-14));
    CHECK(gain(kTwoClusters, left, right, SpreadMetric::variance, GainMode::sum) ==
          doctest::Approx(0.99840).epsilon(1e-5));

    const std::vector<double> p{1, 1, 5, 5};
    const std::vector<double> l{1, 1};
    const std::vector<double> r{5, 5};
    CHECK(gain(p, l, r, SpreadMetric::variance, GainMode::sum) == 1.0);
    CHECK(gain(p, l, r, SpreadMetric::mad, GainMode::literal) == 1.0);

    const std::vector<double> flat{3, 3};
    const std::vector<double> half{3};
    CHECK_THROWS_AS(gain(flat, half, half, SpreadMetric::variance, GainMode::sum), DegenerateError);
    CHECK_THROWS_AS(gain(p, l, half, SpreadMetric::variance, GainMode::sum), InvalidArgument);
}

TEST_CASE("midpoint stays strictly below the upper value") {
    CHECK(midpoint(4.0, 100.0) == 52.0);
    const double lo = 1.0;
    const double hi = std::nextafter(lo, 2.0);
    CHECK(midpoint(lo, hi) == lo);
}

TEST_CASE("best_split on two clusters") {
    const auto x = column(kTwoClusters);
    const auto rows = iota(10);
    const std::vector<std::size_t> vars{0};
    const auto s = best_split(x, rows, vars, GrowthConfig{});
    REQUIRE(s);
    CHECK(s->var_index == 0);
    CHECK(s->threshold == 52.0);
    CHECK(s->gain == doctest::Approx(1.0 - 4.0 / 2502.0).epsilon(1e-12));
}

TEST_CASE("best_split returns nothing for constant data") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(6, 3, 1.5);
    const std::vector<std::size_t> vars{0, 1, 2};
    CHECK_FALSE(best_split(x, iota(6), vars, GrowthConfig{}));
}

TEST_CASE("best_split takes the variable with the larger gain") {
    // Column 0 is two loose groups, column 1 two tight ones.
    Eigen::MatrixXd x(6, 2);
    x << 0, 0, 1, 0.1, 2, 0.2, 10, 10, 11, 10.1, 12, 10.2;
    const std::vector<std::size_t> both{0, 1};
    const auto s = best_split(x, iota(6), both, GrowthConfig{});
    REQUIRE(s);
    CHECK(s->var_index == 1);
}

TEST_CASE("best_split tie-break prefers candidate order then smaller threshold") {
    // Identical columns tie; the first listed variable wins.
    Eigen::MatrixXd x(4, 2);
    x << 0, 0, 1, 1, 5, 5, 6, 6;
    const std::vector<std::size_t> fwd{0, 1};
    const std::vector<std::size_t> rev{1, 0};
    CHECK(best_split(x, iota(4), fwd, GrowthConfig{})->var_index == 0);
    CHECK(best_split(x, iota(4), rev, GrowthConfig{})->var_index == 1);

    // Mirror-image layout: the cuts at 5 and 16 tie, the middle cut is worse.
    const auto y = column({0, 10, 11, 21});
    const std::vector<std::size_t> v0{0};
    const auto s = best_split(y, iota(4), v0, GrowthConfig{});
    REQUIRE(s);
    CHECK(s->threshold == 5.0);
}

TEST_CASE("best_split matches the brute-force scan on random nodes") {
    auto rng = make_engine(99, 0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + uniform_below(rng, 40);
        const std::size_t v = 1 + uniform_below(rng, 4);
        Eigen::MatrixXd x = fixture::normal_matrix(rng, n, v);
        if (trial % 2) x = (x * 2.0).array().round();
        GrowthConfig cfg;
        cfg.metric = static_cast<SpreadMetric>(uniform_below(rng, 3));
        cfg.gain_mode = static_cast<GainMode>(uniform_below(rng, 3));
        auto vars = sample_without_replacement(rng, v, v);
        const auto rows = iota(n);
        const auto s = best_split(x, rows, vars, cfg);
        const auto o = oracle::best_split(x, rows, vars, cfg.metric, cfg.gain_mode);
        REQUIRE(s.has_value() == o.has_value());
        if (s) {
            CHECK(s->var_index == o->var);
            CHECK(s->threshold == o->threshold);
            CHECK(std::abs(s->gain - o->gain) <= 1e-12);
        }
    }
}

TEST_CASE("grow_tree stopping rules") {
    const auto x = column(kTwoClusters);
    const std::vector<std::size_t> v0{0};
    const std::vector<std::size_t> four{0, 1, 5, 6};
    const auto small = grow_tree(x, four, v0, GrowthConfig{});
    CHECK(small.leaf_count() == 1);
    CHECK(small.leaves()[0]->member_rows.size() == 4);

    GrowthConfig flat;
    flat.max_depth = 0;
    const auto stump = grow_tree(x, iota(10), v0, flat);
    CHECK(stump.leaf_count() == 1);
    CHECK(stump.depth() == 0);

    const auto t = grow_tree(x, iota(10), v0, GrowthConfig{});
    REQUIRE(t.branch_count() == 1);
    CHECK(t.branches()[0]->threshold == 52.0);
    const auto leaves = t.leaves();
    REQUIRE(leaves.size() == 2);
    CHECK(leaves[0]->member_rows == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(leaves[1]->member_rows == std::vector<std::size_t>{5, 6, 7, 8, 9});
    const double probe[] = {60.0};
    CHECK(t.route(probe) == 2);
}

TEST_CASE("grow_tree leaves partition the rows and respect the depth bound") {
    auto rng = make_engine(4, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 60);
        const std::size_t v = 1 + uniform_below(rng, 5);
        const Eigen::MatrixXd x = fixture::normal_matrix(rng, n, v);
        GrowthConfig cfg;
        cfg.max_depth = uniform_below(rng, 6);
        cfg.min_node_size = 1 + uniform_below(rng, 6);
        cfg.metric = static_cast<SpreadMetric>(uniform_below(rng, 3));
        const auto vars = iota(v);
        const auto t = grow_tree(x, iota(n), vars, cfg);
        std::vector<std::size_t> seen;
        for (const auto* leaf : t.leaves()) {
            CHECK(leaf->depth <= cfg.max_depth);
            if (leaf->member_rows.size() >= cfg.min_node_size && leaf->depth < cfg.max_depth) {
                CHECK_FALSE(best_split(x, leaf->member_rows, vars, cfg));
            }
            seen.insert(seen.end(), leaf->member_rows.begin(), leaf->member_rows.end());
        }
        std::sort(seen.begin(), seen.end());
        CHECK(seen == iota(n));
        CHECK(t.leaf_count() <= (std::size_t{1} << cfg.max_depth));
        for (std::size_t r = 0; r < n; ++r) {
            const auto& row = x.row(static_cast<Eigen::Index>(r));
            std::vector<double> sample(row.begin(), row.end());
            const auto& leaf = std::get<UnchartedTree::Leaf>(t.nodes()[t.route(sample)]);
            CHECK(std::count(leaf.member_rows.begin(), leaf.member_rows.end(), r) == 1);
        }
    }
}

TEST_CASE("grow_tree is invariant to row order") {
    auto rng = make_engine(8, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + uniform_below(rng, 40);
        const Eigen::MatrixXd x = fixture::normal_matrix(rng, n, 3);
        const auto perm = sample_without_replacement(rng, n, n);
        Eigen::MatrixXd y(x.rows(), x.cols());
        for (std::size_t i = 0; i < n; ++i) y.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(perm[i]));
        GrowthConfig cfg;
        cfg.max_depth = 3;
        const std::vector<std::size_t> vars{0, 1, 2};
        const auto a = grow_tree(x, iota(n), vars, cfg);
        const auto b = grow_tree(y, iota(n), vars, cfg);
        REQUIRE(a.nodes().size() == b.nodes().size());
        for (std::size_t i = 0; i < a.nodes().size(); ++i) {
            if (const auto* ba = std::get_if<UnchartedTree::Branch>(&a.nodes()[i])) {
                const auto& bb = std::get<UnchartedTree::Branch>(b.nodes()[i]);
                CHECK(ba->var_index == bb.var_index);
                CHECK(ba->threshold == bb.threshold);
            } else {
                auto la = std::get<UnchartedTree::Leaf>(a.nodes()[i]).member_rows;
                auto lb = std::get<UnchartedTree::Leaf>(b.nodes()[i]).member_rows;
                for (auto& r : lb) r = perm[r];
                std::sort(lb.begin(), lb.end());
                CHECK(la == lb);
            }
        }
    }
}

TEST_CASE("metric and gain names") {
    CHECK(parse_spread_metric("mad") == SpreadMetric::mad);
    CHECK(to_string(GainMode::literal) == "literal");
    CHECK_THROWS_AS(parse_gain_mode("max"), InvalidArgument);
}
