#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "csvreg/csv_metrics.hpp"
#include "csvreg/errors.hpp"
#include "csvreg/oracles.hpp"
#include "doctest.h"

using namespace csvreg;

namespace {

// Builds a grouped dataset directly from (y, z) pairs.
GroupedDataset make_groups(const std::vector<std::pair<int, int>>& yz) {
    GroupedDataset ds;
    ds.K_y = 0;
    ds.K_z = 0;
    ds.z_observed = true;
    for (auto [y, z] : yz) {
        ds.K_y = std::max<std::size_t>(ds.K_y, std::size_t(y) + 1);
        ds.K_z = std::max<std::size_t>(ds.K_z, std::size_t(z) + 1);
        ds.samples.push_back({{0.0}, y, z});
    }
    return ds;
}

}  // namespace

TEST_CASE("group mean losses are exact per-group means") {
    GroupedDataset ds = make_groups({{0, 0}, {0, 0}, {0, 1}, {1, 0}, {1, 1}});
    GroupIndex idx = build_group_index(ds);
    GroupLossStats stats = group_mean_losses({0.2, 0.4, 0.7, 0.1, 0.5}, idx);
    CHECK(stats.mean(0, 0) == doctest::Approx(0.3));
    CHECK(stats.mean(0, 1) == doctest::Approx(0.7));
    CHECK(stats.mean(1, 0) == doctest::Approx(0.1));
    CHECK(stats.p_hat[0] == doctest::Approx(0.6));
    CHECK(stats.per_class[0].size() == 3);
    SUBCASE("constant losses give a constant field") {
        GroupLossStats c = group_mean_losses({0.5, 0.5, 0.5, 0.5, 0.5}, idx);
        for (std::size_t k = 0; k < 2; ++k) {
            for (std::size_t z = 0; z < 2; ++z) CHECK(c.mean(k, z) == 0.5);
        }
    }
}

TEST_CASE("empirical csv hand computations") {
    SUBCASE("single class") {
        GroupedDataset ds = make_groups({{0, 0}, {0, 1}});
        GroupLossStats stats = group_mean_losses({0.3, 0.1}, build_group_index(ds));
        CHECK(empirical_csv(stats) == doctest::Approx(0.2));
    }
    SUBCASE("two classes with proportions") {
        GroupedDataset ds = make_groups({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
        GroupLossStats stats = group_mean_losses({0.5, 0.1, 0.2, 0.2}, build_group_index(ds));
        CHECK(empirical_csv(stats) == doctest::Approx(0.5 * 0.4 + 0.5 * 0.0));
    }
    SUBCASE("equal means give zero") {
        GroupedDataset ds = make_groups({{0, 0}, {0, 1}});
        GroupLossStats stats = group_mean_losses({0.4, 0.4}, build_group_index(ds));
        CHECK(empirical_csv(stats) == 0.0);
    }
    SUBCASE("empty group raises the census violation") {
        GroupedDataset ds = make_groups({{0, 0}, {1, 0}, {1, 1}});
        GroupLossStats stats = group_mean_losses({0.1, 0.2, 0.3}, build_group_index(ds));
        CHECK_THROWS_AS(empirical_csv(stats), AssumptionViolation);
    }
    SUBCASE("K_z = 1 returns zero") {
        GroupedDataset ds = make_groups({{0, 0}, {1, 0}});
        GroupLossStats stats = group_mean_losses({0.9, 0.1}, build_group_index(ds));
        CHECK(empirical_csv(stats) == 0.0);
    }
}

TEST_CASE("attribute-free estimator") {
    SUBCASE("hand computation") {
        CHECK(csv_unobserved({{0.2, 0.4, 0.1}}, {1.0}) == doctest::Approx(0.3));
    }
    SUBCASE("singletons have zero range") {
        CHECK(csv_unobserved({{0.7}, {0.2}}, {0.5, 0.5}) == 0.0);
    }
    SUBCASE("empty class rejected") {
        CHECK_THROWS_AS(csv_unobserved({{}, {0.1}}, {0.5, 0.5}), ValidationError);
    }
    SUBCASE("dominates the observed estimator on the same data") {
        GroupedDataset ds = make_groups({{0, 0}, {0, 0}, {0, 1}});
        GroupLossStats stats = group_mean_losses({0.2, 0.4, 0.1}, build_group_index(ds));
        const double upper = csv_unobserved(stats.per_class, stats.p_hat);
        CHECK(upper >= empirical_csv(stats));
        CHECK(upper == doctest::Approx(0.3));
        CHECK(empirical_csv(stats) == doctest::Approx(0.2));
    }
}

TEST_CASE("estimator dominance on random data") {
    Rng rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t K_y = 1 + rng.uniform_index(3);
        const std::size_t K_z = 1 + rng.uniform_index(3);
        std::vector<std::pair<int, int>> yz;
        for (std::size_t k = 0; k < K_y; ++k) {
            for (std::size_t z = 0; z < K_z; ++z) {
                const std::size_t m = 1 + rng.uniform_index(4);
                for (std::size_t i = 0; i < m; ++i) yz.emplace_back(int(k), int(z));
            }
        }
        GroupedDataset ds = make_groups(yz);
        GroupIndex idx = build_group_index(ds);
        std::vector<double> losses(ds.size());
        for (double& l : losses) l = rng.uniform() * 3.0;
        GroupLossStats stats = group_mean_losses(losses, idx);
        const double lower = empirical_csv(stats);
        const double upper = csv_unobserved(stats.per_class, stats.p_hat);
        CHECK(lower >= 0.0);
        CHECK(upper >= lower);
    }
}

TEST_CASE("quantile range: examples and conventions") {
    SUBCASE("three-point example") {
        CHECK(quantile_range({0.0, 1.0, 2.0}, 1.0 / 3.0) == doctest::Approx(2.0));
    }
    SUBCASE("c = 1/n reproduces max - min exactly") {
        Rng rng(5);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 1 + rng.uniform_index(40);
            std::vector<double> v(n);
            for (double& x : v) x = rng.normal();
            const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
            CHECK(quantile_range(v, 1.0 / double(n)) == *hi - *lo);
        }
    }
    SUBCASE("constant vector gives zero for any c") {
        for (double c : {0.01, 0.2, 0.5}) {
            CHECK(quantile_range({1.3, 1.3, 1.3, 1.3}, c) == 0.0);
        }
    }
    SUBCASE("non-increasing in c") {
        Rng rng(6);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> v(20);
            for (double& x : v) x = rng.uniform() * 5.0;
            double prev = quantile_range(v, 0.02);
            for (double c : {0.05, 0.1, 0.2, 0.3, 0.4, 0.5}) {
                const double cur = quantile_range(v, c);
                CHECK(cur <= prev + 1e-12);
                CHECK(cur >= 0.0);
                prev = cur;
            }
        }
    }
    SUBCASE("c outside (0, 0.5] rejected") {
        CHECK_THROWS_AS(quantile_range({1.0, 2.0}, 0.0), ValidationError);
        CHECK_THROWS_AS(quantile_range({1.0, 2.0}, 0.6), ValidationError);
    }
}

TEST_CASE("pairwise difference vector") {
    GroupedDataset ds = make_groups({{0, 0}, {0, 1}});
    GroupLossStats stats = group_mean_losses({0.3, 0.1}, build_group_index(ds));
    SUBCASE("hand enumeration") {
        const std::vector<double> f = pairwise_F_observed(stats, 0);
        REQUIRE(f.size() == 4);
        CHECK(f[0] == doctest::Approx(0.0));
        CHECK(f[1] == doctest::Approx(0.2));
        CHECK(f[2] == doctest::Approx(-0.2));
        CHECK(f[3] == doctest::Approx(0.0));
        // max entry equals the class term of the estimator
        CHECK(*std::max_element(f.begin(), f.end()) == doctest::Approx(empirical_csv(stats)));
    }
    SUBCASE("antisymmetry on random stats") {
        Rng rng(9);
        GroupedDataset big = make_groups({{0, 0}, {0, 1}, {0, 2}});
        GroupIndex idx = build_group_index(big);
        GroupLossStats s = group_mean_losses({rng.uniform(), rng.uniform(), rng.uniform()}, idx);
        const std::vector<double> f = pairwise_F_observed(s, 0);
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) {
                CHECK(f[a * 3 + b] == doctest::Approx(-f[b * 3 + a]));
            }
        }
    }
    SUBCASE("empty group raises") {
        GroupedDataset missing = make_groups({{0, 0}, {0, 1}, {1, 1}});
        GroupLossStats s = group_mean_losses({0.1, 0.2, 0.3}, build_group_index(missing));
        CHECK_THROWS_AS(pairwise_F_observed(s, 1), AssumptionViolation);
    }
}

TEST_CASE("population oracle: exact enumeration") {
    DiscreteDistributionSpec spec = make_two_group_spec();
    SUBCASE("conditionally independent model has zero population csv") {
        CHECK(population_csv_oracle(spec, class_coordinate_model(),
                                    clipped_cross_entropy(spec.loss_bound)) <= 1e-15);
    }
    SUBCASE("two-point support hand computation") {
        DiscreteDistributionSpec tiny;
        tiny.support = {{0.0}, {1.0}};
        tiny.p_y = {1.0};
        tiny.p_z_given_y = {{0.5, 0.5}};
        tiny.p_x_given_yz = {{{1.0, 0.0}, {0.0, 1.0}}};
        // losses 0.3 at x=0 and 0.1 at x=1
        auto model = [](const std::vector<double>& x) { return x; };
        auto loss = [](const std::vector<double>& out, std::size_t) {
            return out[0] < 0.5 ? 0.3 : 0.1;
        };
        CHECK(population_csv_oracle(tiny, model, loss) == doctest::Approx(0.2));
    }
    SUBCASE("non-normalized spec rejected") {
        DiscreteDistributionSpec bad = spec;
        bad.p_y = {0.4, 0.4};
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    }
    SUBCASE("empirical csv converges to the oracle") {
        const LossFn ce = clipped_cross_entropy(spec.loss_bound);
        const ModelFn model = attribute_coordinate_model();
        const double pop = population_csv_oracle(spec, model, ce);
        GroupedDataset ds = spec.sample_dataset(100000, 31);
        GroupIndex idx = build_group_index(ds);
        std::vector<double> losses(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            losses[i] = ce(model(ds.samples[i].features), std::size_t(ds.samples[i].y));
        }
        CHECK(std::abs(empirical_csv(group_mean_losses(losses, idx)) - pop) <= 0.01);
    }
}

TEST_CASE("mixture upper bound property (enumerated supports)") {
    // random finite mixtures P = sum pi_z P_z with pi_z >= c:
    // quantile_range(P, c) >= max_z E[P_z] - min_z E[P_z]
    Rng rng(777);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t K = 2 + rng.uniform_index(3);
        const std::size_t support = 6 + rng.uniform_index(7);  // <= 12
        std::vector<double> values(support);
        for (double& v : values) v = rng.uniform();
        std::vector<double> pi(K);
        double s = 0.0;
        for (double& p : pi) {
            p = -std::log(1.0 - rng.uniform());
            s += p;
        }
        for (double& p : pi) p /= s;
        const double c = *std::min_element(pi.begin(), pi.end());

        std::vector<double> mix(support, 0.0);
        std::vector<double> means(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<double> w(support);
            double ws = 0.0;
            for (double& x : w) {
                x = -std::log(1.0 - rng.uniform());
                ws += x;
            }
            for (std::size_t i = 0; i < support; ++i) {
                w[i] /= ws;
                mix[i] += pi[k] * w[i];
                means[k] += w[i] * values[i];
            }
        }
        const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
        CHECK(quantile_range(values, mix, c) >= *hi - *lo - 1e-9);
    }
}

TEST_CASE("rate of the empirical estimator decays like a square root") {
    DiscreteDistributionSpec spec = make_two_group_spec();
    spec.p_z_given_y = {{0.5, 0.5}, {0.5, 0.5}};
    OracleReport rep =
        estimator_rate_study(spec, attribute_coordinate_model(),
                             clipped_cross_entropy(spec.loss_bound), {100, 400, 1600, 6400}, 20, 99);
    CHECK(rep.pass);
    CHECK(rep.extra["slope"] <= -0.35);
    CHECK(rep.extra["slope"] >= -0.65);
}

TEST_CASE("rate study: deterministic per-group losses give zero error") {
    // loss depends only on (y, z) through a z-deterministic coordinate
    DiscreteDistributionSpec spec;
    spec.support = {{0.0}, {1.0}};
    spec.p_y = {1.0};
    spec.p_z_given_y = {{0.5, 0.5}};
    spec.p_x_given_yz = {{{1.0, 0.0}, {0.0, 1.0}}};  // x identifies z exactly
    auto model = [](const std::vector<double>& x) { return x; };
    auto loss = [](const std::vector<double>& out, std::size_t) {
        return out[0] < 0.5 ? 0.25 : 0.75;
    };
    const double pop = population_csv_oracle(spec, model, loss);
    GroupedDataset ds = spec.sample_dataset(500, 3);
    GroupIndex idx = build_group_index(ds);
    std::vector<double> losses(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        losses[i] = loss(model(ds.samples[i].features), 0);
    }
    CHECK(empirical_csv(group_mean_losses(losses, idx)) == doctest::Approx(pop));
}
