#include "csvreg/csv_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "csvreg/errors.hpp"

namespace csvreg {

bool GroupLossStats::assumption1_ok() const {
    return std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
}

GroupLossStats group_mean_losses(const std::vector<double>& per_sample_losses,
                                 const GroupIndex& index) {
    if (per_sample_losses.size() != index.n) {
        throw ValidationError("loss vector length " + std::to_string(per_sample_losses.size()) +
                              " does not match dataset size " + std::to_string(index.n));
    }
    GroupLossStats stats;
    stats.K_y = index.K_y;
    stats.K_z = index.K_z;
    stats.mean_loss.assign(index.K_y * index.K_z, std::numeric_limits<double>::quiet_NaN());
    stats.counts.assign(index.K_y * index.K_z, 0);
    stats.p_hat = index.class_proportions;
    stats.per_class.assign(index.K_y, {});

    for (std::size_t k = 0; k < index.K_y; ++k) {
        for (std::size_t z = 0; z < index.K_z; ++z) {
            const auto& ids = index.groups[k][z];
            stats.counts[k * index.K_z + z] = ids.size();
            if (ids.empty()) continue;
            double sum = 0.0;
            for (std::size_t id : ids) sum += per_sample_losses[id];
            stats.mean_loss[k * index.K_z + z] = sum / static_cast<double>(ids.size());
        }
        stats.per_class[k].reserve(index.class_counts[k]);
        for (std::size_t id : index.class_ids[k]) {
            stats.per_class[k].push_back(per_sample_losses[id]);
        }
    }
    return stats;
}

double empirical_csv(const GroupLossStats& stats) {
    if (stats.K_z == 1) return 0.0;
    if (!stats.assumption1_ok()) {
        throw AssumptionViolation("empirical CSV undefined: some (class, attribute) group is empty");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < stats.K_y; ++k) {
        double lo = stats.mean(k, 0), hi = stats.mean(k, 0);
        for (std::size_t z = 1; z < stats.K_z; ++z) {
            lo = std::min(lo, stats.mean(k, z));
            hi = std::max(hi, stats.mean(k, z));
        }
        total += stats.p_hat[k] * (hi - lo);
    }
    return total;
}

double csv_unobserved(const std::vector<std::vector<double>>& per_class_losses,
                      const std::vector<double>& p_hat) {
    if (per_class_losses.size() != p_hat.size()) {
        throw ValidationError("per-class loss vectors do not match class proportions");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < per_class_losses.size(); ++k) {
        const auto& losses = per_class_losses[k];
        if (losses.empty()) {
            throw ValidationError("class " + std::to_string(k) + " has no samples");
        }
        const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
        total += p_hat[k] * (*hi - *lo);
    }
    return total;
}

double quantile_range(const std::vector<double>& losses, double c) {
    return quantile_range(losses, std::vector<double>(losses.size(), 1.0), c);
}

double quantile_range(const std::vector<double>& values, const std::vector<double>& weights,
                      double c) {
    if (values.empty()) throw ValidationError("quantile range of empty distribution");
    if (values.size() != weights.size()) {
        throw ValidationError("quantile range: values/weights length mismatch");
    }
    if (!(c > 0.0) || c > 0.5) throw ValidationError("quantile level c must lie in (0, 0.5]");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ValidationError("quantile range: negative weight");
        total += w;
    }
    if (total <= 0.0) throw ValidationError("quantile range: zero total mass");

    // Lower quantile q_lo = inf{p : F(p) >= c}: first atom where the cumulative
    // mass reaches c * total; conditioning set is {v <= q_lo} (ties included).
    const double target = c * total;
    double cum = 0.0;
    double q_lo = values[order.back()];
    for (std::size_t i = 0; i < order.size(); ++i) {
        cum += weights[order[i]];
        if (cum >= target - 1e-15 * total) {
            q_lo = values[order[i]];
            break;
        }
    }
    // Upper quantile via the survival function: q_hi = sup{p : P(V >= p) >= c};
    // conditioning set is {v >= q_hi}.
    cum = 0.0;
    double q_hi = values[order.front()];
    for (std::size_t i = order.size(); i-- > 0;) {
        cum += weights[order[i]];
        if (cum >= target - 1e-15 * total) {
            q_hi = values[order[i]];
            break;
        }
    }

    double lo_mass = 0.0, lo_sum = 0.0, hi_mass = 0.0, hi_sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] <= q_lo) {
            lo_mass += weights[i];
            lo_sum += weights[i] * values[i];
        }
        if (values[i] >= q_hi) {
            hi_mass += weights[i];
            hi_sum += weights[i] * values[i];
        }
    }
    return hi_sum / hi_mass - lo_sum / lo_mass;
}

std::vector<double> pairwise_F_observed(const GroupLossStats& stats, std::size_t k) {
    if (k >= stats.K_y) throw ValidationError("class index out of range");
    for (std::size_t z = 0; z < stats.K_z; ++z) {
        if (stats.count(k, z) == 0) {
            throw AssumptionViolation("pairwise differences undefined: group (" +
                                      std::to_string(k) + ", " + std::to_string(z) + ") is empty");
        }
    }
    std::vector<double> f(stats.K_z * stats.K_z);
    for (std::size_t z1 = 0; z1 < stats.K_z; ++z1) {
        for (std::size_t z2 = 0; z2 < stats.K_z; ++z2) {
            f[z1 * stats.K_z + z2] = stats.mean(k, z1) - stats.mean(k, z2);
        }
    }
    return f;
}

void DiscreteDistributionSpec::validate() const {
    if (support.empty() || support.size() > 64) {
        throw ValidationError("spec support must hold between 1 and 64 points");
    }
    if (p_y.empty() || p_z_given_y.size() != K_y() || p_x_given_yz.size() != K_y()) {
        throw ValidationError("spec tables do not agree on K_y");
    }
    auto check_simplex = [](const std::vector<double>& p, const std::string& what) {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) throw ValidationError(what + " has a negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ValidationError(what + " does not normalize to 1");
    };
    check_simplex(p_y, "P_Y");
    for (std::size_t k = 0; k < K_y(); ++k) {
        if (p_z_given_y[k].size() != K_z() || p_x_given_yz[k].size() != K_z()) {
            throw ValidationError("spec tables do not agree on K_z");
        }
        check_simplex(p_z_given_y[k], "P_{Z|Y=" + std::to_string(k) + "}");
        for (std::size_t z = 0; z < K_z(); ++z) {
            if (p_x_given_yz[k][z].size() != support.size()) {
                throw ValidationError("P_{X|Y,Z} table does not match support size");
            }
            check_simplex(p_x_given_yz[k][z],
                          "P_{X|Y=" + std::to_string(k) + ",Z=" + std::to_string(z) + "}");
        }
    }
}

namespace {
std::size_t draw_categorical(const std::vector<double>& p, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        cum += p[i];
        if (u < cum) return i;
    }
    return p.size() - 1;
}
}  // namespace

DiscreteDistributionSpec::Draw DiscreteDistributionSpec::sample(Rng& rng) const {
    Draw d;
    d.y = draw_categorical(p_y, rng);
    d.z = draw_categorical(p_z_given_y[d.y], rng);
    d.x = draw_categorical(p_x_given_yz[d.y][d.z], rng);
    return d;
}

GroupedDataset DiscreteDistributionSpec::sample_dataset(std::size_t n, std::uint64_t seed) const {
    GroupedDataset ds;
    ds.K_y = K_y();
    ds.K_z = K_z();
    ds.z_observed = true;
    ds.seed = seed;
    ds.provenance = "discrete_spec";
    ds.samples.reserve(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const Draw d = sample(rng);
        GroupedSample s;
        s.features = support[d.x];
        s.y = static_cast<int>(d.y);
        s.z = static_cast<int>(d.z);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::vector<std::vector<double>> conditional_mean_losses(const DiscreteDistributionSpec& spec,
                                                         const ModelFn& model, const LossFn& loss) {
    spec.validate();
    std::vector<double> point_loss(spec.support.size() * spec.K_y());
    for (std::size_t x = 0; x < spec.support.size(); ++x) {
        const std::vector<double> out = model(spec.support[x]);
        for (std::size_t k = 0; k < spec.K_y(); ++k) {
            point_loss[x * spec.K_y() + k] = loss(out, k);
        }
    }
    std::vector<std::vector<double>> m(spec.K_y(), std::vector<double>(spec.K_z(), 0.0));
    for (std::size_t k = 0; k < spec.K_y(); ++k) {
        for (std::size_t z = 0; z < spec.K_z(); ++z) {
            double acc = 0.0;
            for (std::size_t x = 0; x < spec.support.size(); ++x) {
                acc += spec.p_x_given_yz[k][z][x] * point_loss[x * spec.K_y() + k];
            }
            m[k][z] = acc;
        }
    }
    return m;
}

double population_csv_oracle(const DiscreteDistributionSpec& spec, const ModelFn& model,
                             const LossFn& loss) {
    const auto m = conditional_mean_losses(spec, model, loss);
    double total = 0.0;
    for (std::size_t k = 0; k < spec.K_y(); ++k) {
        const auto [lo, hi] = std::minmax_element(m[k].begin(), m[k].end());
        total += spec.p_y[k] * (*hi - *lo);
    }
    return total;
}

}  // namespace csvreg
