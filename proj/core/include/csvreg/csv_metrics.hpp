#pragma once

#include <functional>
#include <vector>

#include "csvreg/dataset.hpp"

namespace csvreg {

/// Sufficient statistics for the conditional-spurious-variation estimators:
/// per-(k,z) mean losses, group counts, class proportions, and the per-class
/// loss vectors.
struct GroupLossStats {
    std::size_t K_y = 0;
    std::size_t K_z = 0;
    std::vector<double> mean_loss;               // K_y * K_z, row-major (k, z); NaN if empty
    std::vector<std::size_t> counts;             // n_kz
    std::vector<double> p_hat;                   // n_k / n
    std::vector<std::vector<double>> per_class;  // per-class loss vectors

    double mean(std::size_t k, std::size_t z) const { return mean_loss[k * K_z + z]; }
    std::size_t count(std::size_t k, std::size_t z) const { return counts[k * K_z + z]; }
    bool assumption1_ok() const;
};

GroupLossStats group_mean_losses(const std::vector<double>& per_sample_losses,
                                 const GroupIndex& index);

/// sum_k p_hat_k (max_z - min_z of the group means). Requires every group
/// populated; returns 0 when K_z == 1.
double empirical_csv(const GroupLossStats& stats);

/// Attribute-free upper estimator: sum_k p_hat_k (max_i - min_i of the
/// per-sample losses of class k).
double csv_unobserved(const std::vector<std::vector<double>>& per_class_losses,
                      const std::vector<double>& p_hat);

/// Gap between the upper-tail and lower-tail conditional means at level c:
/// E[L | L >= q_hi(c)] - E[L | L <= q_lo(c)], where q_lo(c) = inf{p : F(p) >= c}
/// and q_hi(c) = sup{p : P(L >= p) >= c}, conditioning sets closed on both
/// sides. With c = 1/n this is exactly max - min.
double quantile_range(const std::vector<double>& losses, double c);

/// Weighted-atom variant for finite distributions.
double quantile_range(const std::vector<double>& values, const std::vector<double>& weights,
                      double c);

/// Eq-style ordered-pair difference vector for class k: entries
/// (mean(k,z1) - mean(k,z2)) laid out row-major over (z1, z2).
std::vector<double> pairwise_F_observed(const GroupLossStats& stats, std::size_t k);

/// Finite distribution over feature points with the correlation-shift factor
/// structure: P_Y, P_{Z|Y} and P_{X|Y,Z}. Support capped at 64 points so the
/// oracles can enumerate exactly.
struct DiscreteDistributionSpec {
    std::vector<std::vector<double>> support;                    // feature points
    std::vector<double> p_y;                                     // K_y
    std::vector<std::vector<double>> p_z_given_y;                // [K_y][K_z]
    std::vector<std::vector<std::vector<double>>> p_x_given_yz;  // [K_y][K_z][support]
    double loss_bound = 1.0;                                     // M

    std::size_t K_y() const { return p_y.size(); }
    std::size_t K_z() const { return p_z_given_y.empty() ? 0 : p_z_given_y.front().size(); }
    void validate() const;

    /// Draws one (x index, y, z) triple.
    struct Draw {
        std::size_t x;
        std::size_t y;
        std::size_t z;
    };
    Draw sample(Rng& rng) const;

    GroupedDataset sample_dataset(std::size_t n, std::uint64_t seed) const;
};

using ModelFn = std::function<std::vector<double>(const std::vector<double>&)>;
using LossFn = std::function<double(const std::vector<double>& outputs, std::size_t k)>;

/// Per-(k,z) conditional expected losses under the spec, by exact enumeration.
std::vector<std::vector<double>> conditional_mean_losses(const DiscreteDistributionSpec& spec,
                                                         const ModelFn& model, const LossFn& loss);

/// Exact population CSV: sum_k P_Y(k) (max_z - min_z of E[L | Y=k, Z=z]).
double population_csv_oracle(const DiscreteDistributionSpec& spec, const ModelFn& model,
                             const LossFn& loss);

}  // namespace csvreg
