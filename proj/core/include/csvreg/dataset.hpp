#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csvreg/rng.hpp"
#include "csvreg/tensor.hpp"

namespace csvreg {

constexpr int kUnobservedAttribute = -1;

struct GroupedSample {
    std::vector<double> features;
    int y = 0;                       // class index in [0, K_y)
    int z = kUnobservedAttribute;    // spurious index in [0, K_z) or unobserved
};

/// Training/test universe: samples plus category counts and provenance.
/// Attribute observability is dataset-global: either every sample carries z
/// or none does.
struct GroupedDataset {
    std::vector<GroupedSample> samples;
    std::size_t K_y = 0;
    std::size_t K_z = 0;
    bool z_observed = false;
    std::string provenance;
    std::uint64_t seed = 0;

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().features.size(); }
    void validate() const;

    /// [count x dim] feature matrix for the given sample ids.
    Tensor features_of(const std::vector<std::size_t>& ids) const;
    std::vector<int> labels_of(const std::vector<std::size_t>& ids) const;
};

/// Per-(k,z) sample census. When z is unobserved the index degenerates to one
/// attribute bucket per class.
struct GroupIndex {
    std::size_t K_y = 0;
    std::size_t K_z = 0;  // 1 when attributes unobserved
    std::size_t n = 0;
    bool attributes_observed = false;
    bool assumption1_ok = false;  // every (k,z) group populated

    std::vector<std::vector<std::vector<std::size_t>>> groups;  // [K_y][K_z] -> ids
    std::vector<std::vector<std::size_t>> class_ids;            // [K_y] -> ids
    std::vector<std::size_t> class_counts;                      // n_k
    std::vector<double> class_proportions;                      // p_hat_k = n_k / n

    std::size_t group_count(std::size_t k, std::size_t z) const { return groups[k][z].size(); }
};

GroupIndex build_group_index(const GroupedDataset& dataset);

/// Gaussian two-block toy family: features = (y * mu1 ; z * mu2) + noise with
/// y, z in {-1,+1}, z = y with probability (1 + sigma_yz)/2.
struct ToySpec {
    std::vector<double> mu1;
    std::vector<double> mu2;
    double sigma_yz = 0.0;

    static ToySpec defaults();  // 5+5 dims, ||mu2|| = 2 ||mu1||
    void validate() const;
};

GroupedDataset gen_toy(const ToySpec& spec, std::size_t n, std::uint64_t seed);

/// Sample mean of y*z under the {-1,+1} coding; binary tasks only.
double empirical_correlation(const GroupedDataset& dataset);

enum class SamplerKind { kUniform, kClassBalanced, kGroupBalanced };

struct SamplerStrategy {
    SamplerKind kind = SamplerKind::kUniform;
    // sampling is always with replacement
};

/// Draws a batch of sample ids. The balanced strategies are stratified: the
/// class (resp. group) quotas floor(S / K_y) (resp. floor(S / (K_y K_z))) are
/// hit exactly, with replacement inside each stratum, so every per-group mean
/// is defined each step.
std::vector<std::size_t> sample_batch(const GroupIndex& index, SamplerStrategy strategy,
                                      std::size_t size, Rng& rng);

}  // namespace csvreg
