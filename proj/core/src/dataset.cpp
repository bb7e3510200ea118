#include "csvreg/dataset.hpp"

#include <cmath>
#include <string>

#include "csvreg/errors.hpp"

namespace csvreg {

void GroupedDataset::validate() const {
    if (K_y == 0) throw ValidationError("dataset declares no classes");
    const std::size_t d = dim();
    for (const auto& s : samples) {
        if (s.features.size() != d) {
            throw ValidationError("sample feature dimensionality differs within dataset");
        }
        if (s.y < 0 || static_cast<std::size_t>(s.y) >= K_y) {
            throw ValidationError("class index " + std::to_string(s.y) + " out of range");
        }
        if (z_observed) {
            if (s.z < 0 || static_cast<std::size_t>(s.z) >= K_z) {
                throw ValidationError("attribute index " + std::to_string(s.z) + " out of range");
            }
        } else if (s.z != kUnobservedAttribute) {
            throw ValidationError("observed attribute in dataset declared unobserved");
        }
    }
}

Tensor GroupedDataset::features_of(const std::vector<std::size_t>& ids) const {
    const std::size_t d = dim();
    Tensor out = Tensor::zeros({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& f = samples[ids[i]].features;
        std::copy(f.begin(), f.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return out;
}

std::vector<int> GroupedDataset::labels_of(const std::vector<std::size_t>& ids) const {
    std::vector<int> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = samples[ids[i]].y;
    return out;
}

GroupIndex build_group_index(const GroupedDataset& dataset) {
    GroupIndex idx;
    idx.K_y = dataset.K_y;
    idx.attributes_observed = dataset.z_observed;
    idx.K_z = dataset.z_observed ? dataset.K_z : 1;
    idx.n = dataset.size();
    idx.groups.assign(idx.K_y, std::vector<std::vector<std::size_t>>(idx.K_z));
    idx.class_ids.assign(idx.K_y, {});
    idx.class_counts.assign(idx.K_y, 0);
    idx.class_proportions.assign(idx.K_y, 0.0);

    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset.samples[i];
        const std::size_t k = static_cast<std::size_t>(s.y);
        const std::size_t z = dataset.z_observed ? static_cast<std::size_t>(s.z) : 0;
        idx.groups[k][z].push_back(i);
        idx.class_ids[k].push_back(i);
        idx.class_counts[k] += 1;
    }
    idx.assumption1_ok = true;
    for (std::size_t k = 0; k < idx.K_y; ++k) {
        for (std::size_t z = 0; z < idx.K_z; ++z) {
            if (idx.groups[k][z].empty()) idx.assumption1_ok = false;
        }
        if (idx.n > 0) {
            idx.class_proportions[k] =
                static_cast<double>(idx.class_counts[k]) / static_cast<double>(idx.n);
        }
    }
    return idx;
}

ToySpec ToySpec::defaults() {
    ToySpec spec;
    spec.mu1.assign(5, 1.05);
    spec.mu2.assign(5, 7.0);  // spurious block dominates: ||mu2|| > sqrt(3) ||mu1||
    return spec;
}

void ToySpec::validate() const {
    if (std::abs(sigma_yz) > 1.0) {
        throw ValidationError("sigma_yz must lie in [-1, 1]");
    }
    auto norm2 = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return s;
    };
    if (mu1.empty() || mu2.empty() || norm2(mu1) == 0.0 || norm2(mu2) == 0.0) {
        throw ValidationError("toy mean directions mu1, mu2 must be nonzero");
    }
}

GroupedDataset gen_toy(const ToySpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw ValidationError("toy dataset needs at least one sample");

    GroupedDataset ds;
    ds.K_y = 2;
    ds.K_z = 2;
    ds.z_observed = true;
    ds.seed = seed;
    ds.provenance = "toy(sigma=" + std::to_string(spec.sigma_yz) + ")";
    ds.samples.reserve(n);

    Rng rng(seed);
    const std::size_t d1 = spec.mu1.size(), d2 = spec.mu2.size();
    const double p_equal = (1.0 + spec.sigma_yz) / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y_sign = rng.bernoulli(0.5) ? 1 : -1;
        const int z_sign = rng.bernoulli(p_equal) ? y_sign : -y_sign;
        GroupedSample s;
        s.features.resize(d1 + d2);
        for (std::size_t j = 0; j < d1; ++j) {
            s.features[j] = y_sign * spec.mu1[j] + rng.normal();
        }
        for (std::size_t j = 0; j < d2; ++j) {
            s.features[d1 + j] = z_sign * spec.mu2[j] + rng.normal();
        }
        s.y = y_sign > 0 ? 1 : 0;
        s.z = z_sign > 0 ? 1 : 0;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

double empirical_correlation(const GroupedDataset& dataset) {
    if (dataset.K_y != 2 || dataset.K_z != 2 || !dataset.z_observed) {
        throw ValidationError("empirical correlation requires a binary task with observed z");
    }
    if (dataset.samples.empty()) throw ValidationError("empirical correlation of empty dataset");
    double acc = 0.0;
    for (const auto& s : dataset.samples) {
        acc += static_cast<double>((2 * s.y - 1) * (2 * s.z - 1));
    }
    return acc / static_cast<double>(dataset.size());
}

std::vector<std::size_t> sample_batch(const GroupIndex& index, SamplerStrategy strategy,
                                      std::size_t size, Rng& rng) {
    if (size < 1) throw ValidationError("batch size must be at least 1");
    std::vector<std::size_t> batch;
    switch (strategy.kind) {
        case SamplerKind::kUniform: {
            batch.reserve(size);
            for (std::size_t i = 0; i < size; ++i) batch.push_back(rng.uniform_index(index.n));
            break;
        }
        case SamplerKind::kClassBalanced: {
            if (size < index.K_y) {
                throw ValidationError("class-balanced batch needs size >= K_y");
            }
            const std::size_t quota = size / index.K_y;
            for (std::size_t k = 0; k < index.K_y; ++k) {
                const auto& ids = index.class_ids[k];
                if (ids.empty()) {
                    throw AssumptionViolation("class " + std::to_string(k) +
                                              " has no samples to draw from");
                }
                for (std::size_t i = 0; i < quota; ++i) {
                    batch.push_back(ids[rng.uniform_index(ids.size())]);
                }
            }
            break;
        }
        case SamplerKind::kGroupBalanced: {
            if (!index.attributes_observed) {
                throw ValidationError("group-balanced sampling requires observed attributes");
            }
            if (size < index.K_y * index.K_z) {
                throw ValidationError("group-balanced batch needs size >= K_y * K_z");
            }
            const std::size_t quota = size / (index.K_y * index.K_z);
            for (std::size_t k = 0; k < index.K_y; ++k) {
                for (std::size_t z = 0; z < index.K_z; ++z) {
                    const auto& ids = index.groups[k][z];
                    if (ids.empty()) {
                        throw AssumptionViolation("group (" + std::to_string(k) + ", " +
                                                  std::to_string(z) +
                                                  ") is empty; Assumption-1 census fails");
                    }
                    for (std::size_t i = 0; i < quota; ++i) {
                        batch.push_back(ids[rng.uniform_index(ids.size())]);
                    }
                }
            }
            break;
        }
    }
    return batch;
}

}  // namespace csvreg
