#include "csvreg/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csvreg/errors.hpp"
#include "json.hpp"

namespace csvreg {

std::string to_json_line(const OracleReport& report) {
    nlohmann::json j;
    j["check"] = report.check;
    j["max_deviation"] = report.max_deviation;
    j["bound"] = report.bound;
    j["pass"] = report.pass;
    j["trials"] = report.trials;
    j["seed"] = report.seed;
    if (!report.note.empty()) j["note"] = report.note;
    for (const auto& [k, v] : report.extra) j["extra"][k] = v;
    return j.dump();
}

namespace {

/// All length-`parts` vectors of nonnegative integers summing to `total`.
void compositions(std::size_t total, std::size_t parts, std::vector<std::size_t>& prefix,
                  std::vector<std::vector<std::size_t>>& out) {
    if (parts == 1) {
        prefix.push_back(total);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (std::size_t head = 0; head <= total; ++head) {
        prefix.push_back(head);
        compositions(total - head, parts - 1, prefix, out);
        prefix.pop_back();
    }
}

std::vector<std::vector<double>> simplex_lattice(std::size_t grid_size, std::size_t dims) {
    std::vector<std::vector<std::size_t>> comps;
    std::vector<std::size_t> prefix;
    compositions(grid_size, dims, prefix, comps);
    std::vector<std::vector<double>> out;
    out.reserve(comps.size());
    for (const auto& c : comps) {
        std::vector<double> q(dims);
        for (std::size_t i = 0; i < dims; ++i) {
            q[i] = static_cast<double>(c[i]) / static_cast<double>(grid_size);
        }
        out.push_back(std::move(q));
    }
    return out;
}

double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
}

double population_risk(const DiscreteDistributionSpec& spec,
                       const std::vector<std::vector<double>>& cond_means,
                       const std::vector<std::vector<double>>& q_z_given_y) {
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.K_y(); ++k) {
        double inner = 0.0;
        for (std::size_t z = 0; z < spec.K_z(); ++z) {
            inner += q_z_given_y[k][z] * cond_means[k][z];
        }
        acc += spec.p_y[k] * inner;
    }
    return acc;
}

}  // namespace

OracleReport check_risk_invariance(const DiscreteDistributionSpec& spec, const ModelFn& model,
                                   const LossFn& loss, std::size_t grid_size) {
    spec.validate();
    if (grid_size < 1) throw ValidationError("grid size must be at least 1");
    const auto cond = conditional_mean_losses(spec, model, loss);
    const double risk_p = population_risk(spec, cond, spec.p_z_given_y);

    const auto lattice = simplex_lattice(grid_size, spec.K_z());
    double joint = 1.0;
    for (std::size_t k = 0; k < spec.K_y(); ++k) joint *= static_cast<double>(lattice.size());
    if (joint > 500000.0) {
        throw ValidationError("conditional grid too large to enumerate");
    }

    // Distinct model outputs over the support, plus P(f(X)=v | Y=k, Z=z).
    std::vector<std::size_t> out_id(spec.support.size());
    std::vector<std::vector<double>> distinct_outputs;
    for (std::size_t x = 0; x < spec.support.size(); ++x) {
        const std::vector<double> v = model(spec.support[x]);
        auto it = std::find(distinct_outputs.begin(), distinct_outputs.end(), v);
        if (it == distinct_outputs.end()) {
            distinct_outputs.push_back(v);
            out_id[x] = distinct_outputs.size() - 1;
        } else {
            out_id[x] = static_cast<std::size_t>(it - distinct_outputs.begin());
        }
    }
    const std::size_t n_out = distinct_outputs.size();
    std::vector<double> out_mass(n_out * spec.K_y() * spec.K_z(), 0.0);
    for (std::size_t k = 0; k < spec.K_y(); ++k) {
        for (std::size_t z = 0; z < spec.K_z(); ++z) {
            for (std::size_t x = 0; x < spec.support.size(); ++x) {
                out_mass[(out_id[x] * spec.K_y() + k) * spec.K_z() + z] +=
                    spec.p_x_given_yz[k][z][x];
            }
        }
    }

    double risk_dev = 0.0;
    std::vector<double> table_min(n_out * spec.K_y(), std::numeric_limits<double>::infinity());
    std::vector<double> table_max(n_out * spec.K_y(), -std::numeric_limits<double>::infinity());

    std::vector<std::size_t> pick(spec.K_y(), 0);
    std::vector<std::vector<double>> q(spec.K_y());
    std::size_t combos = 0;
    while (true) {
        for (std::size_t k = 0; k < spec.K_y(); ++k) q[k] = lattice[pick[k]];
        risk_dev = std::max(risk_dev, std::abs(population_risk(spec, cond, q) - risk_p));
        for (std::size_t v = 0; v < n_out; ++v) {
            double denom = 0.0;
            std::vector<double> numer(spec.K_y(), 0.0);
            for (std::size_t k = 0; k < spec.K_y(); ++k) {
                for (std::size_t z = 0; z < spec.K_z(); ++z) {
                    numer[k] += spec.p_y[k] * q[k][z] * out_mass[(v * spec.K_y() + k) * spec.K_z() + z];
                }
                denom += numer[k];
            }
            if (denom < 1e-12) continue;
            for (std::size_t k = 0; k < spec.K_y(); ++k) {
                const double p = numer[k] / denom;
                table_min[v * spec.K_y() + k] = std::min(table_min[v * spec.K_y() + k], p);
                table_max[v * spec.K_y() + k] = std::max(table_max[v * spec.K_y() + k], p);
            }
        }
        ++combos;
        std::size_t k = 0;
        while (k < spec.K_y() && ++pick[k] == lattice.size()) {
            pick[k] = 0;
            ++k;
        }
        if (k == spec.K_y()) break;
    }
    double table_var = 0.0;
    for (std::size_t c = 0; c < table_min.size(); ++c) {
        if (table_max[c] >= table_min[c]) table_var = std::max(table_var, table_max[c] - table_min[c]);
    }

    OracleReport rep;
    rep.check = "risk_invariance";
    rep.max_deviation = std::max(risk_dev, table_var);
    rep.bound = 1e-12;
    rep.pass = rep.max_deviation <= rep.bound;
    rep.trials = combos;
    rep.extra["risk_deviation"] = risk_dev;
    rep.extra["conditional_table_variation"] = table_var;
    return rep;
}

OracleReport check_ood_risk_bound(const DiscreteDistributionSpec& spec, const ModelFn& model,
                                  const LossFn& loss, std::size_t n, std::size_t trials,
                                  std::size_t grid_size, std::uint64_t seed) {
    spec.validate();
    const auto cond = conditional_mean_losses(spec, model, loss);
    const double risk_p = population_risk(spec, cond, spec.p_z_given_y);
    const double csv = population_csv_oracle(spec, model, loss);
    const auto lattice = simplex_lattice(grid_size, spec.K_z());

    // sup over the product grid of |R_emp - R_pop(Q)| decomposes per class
    // since E_Q is linear in each conditional block; the per-class extremes
    // are attained on the lattice.
    std::vector<double> lo_k(spec.K_y()), hi_k(spec.K_y());
    for (std::size_t k = 0; k < spec.K_y(); ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& qk : lattice) {
            double inner = 0.0;
            for (std::size_t z = 0; z < spec.K_z(); ++z) inner += qk[z] * cond[k][z];
            lo = std::min(lo, inner);
            hi = std::max(hi, inner);
        }
        lo_k[k] = spec.p_y[k] * lo;
        hi_k[k] = spec.p_y[k] * hi;
    }
    const double risk_lo = std::accumulate(lo_k.begin(), lo_k.end(), 0.0);
    const double risk_hi = std::accumulate(hi_k.begin(), hi_k.end(), 0.0);

    OracleReport rep;
    rep.check = "ood_risk_gap_bound";
    rep.bound = 1e-9;
    rep.seed = seed;
    rep.trials = std::max<std::size_t>(trials, 1);
    double worst = -std::numeric_limits<double>::infinity();
    Rng rng(seed);
    for (std::size_t t = 0; t < rep.trials; ++t) {
        double r_emp;
        if (trials == 0 || n == 0) {
            r_emp = risk_p;  // exact-weights mode
        } else {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto d = spec.sample(rng);
                acc += loss(model(spec.support[d.x]), d.y);
            }
            r_emp = acc / static_cast<double>(n);
        }
        const double lhs = std::max(std::abs(r_emp - risk_lo), std::abs(r_emp - risk_hi));
        const double rhs = std::abs(r_emp - risk_p) + csv;
        worst = std::max(worst, lhs - rhs);
        if (t + 1 == rep.trials) {
            rep.extra["lhs_last"] = lhs;
            rep.extra["rhs_last"] = rhs;
        }
    }
    rep.max_deviation = worst;
    rep.pass = rep.max_deviation <= rep.bound;
    rep.extra["population_csv"] = csv;
    return rep;
}

namespace {

struct CutPoints {
    double q_lo;
    double q_hi;
};

// Same convention as quantile_range: lower quantile by the cdf, upper by the
// survival function, both with closed conditioning sets.
CutPoints quantile_cuts(const std::vector<double>& sorted_values,
                        const std::vector<double>& sorted_weights, double c) {
    double total = std::accumulate(sorted_weights.begin(), sorted_weights.end(), 0.0);
    const double target = c * total;
    double cum = 0.0;
    CutPoints cuts{sorted_values.back(), sorted_values.front()};
    for (std::size_t i = 0; i < sorted_values.size(); ++i) {
        cum += sorted_weights[i];
        if (cum >= target - 1e-15 * total) {
            cuts.q_lo = sorted_values[i];
            break;
        }
    }
    cum = 0.0;
    for (std::size_t i = sorted_values.size(); i-- > 0;) {
        cum += sorted_weights[i];
        if (cum >= target - 1e-15 * total) {
            cuts.q_hi = sorted_values[i];
            break;
        }
    }
    return cuts;
}

}  // namespace

OracleReport check_quantile_sharpness(std::size_t K, double c, std::size_t support_size,
                                      std::size_t trials, std::uint64_t seed) {
    if (K < 2) throw ValidationError("mixture needs at least two components");
    if (!(c > 0.0) || c > 0.5) throw ValidationError("c must lie in (0, 0.5]");
    if (support_size < 3 || support_size > 12) {
        throw ValidationError("sharpness oracle enumerates supports of size 3..12");
    }

    OracleReport rep;
    rep.check = "quantile_sharpness";
    rep.bound = 1e-9;
    rep.seed = seed;

    double residual = 0.0;
    if (K >= 3) {
        // Explicit sharp construction on a uniform base: the lower and upper
        // components are the conditional slices below q(c) and above q(1-c),
        // the middle components share the remainder.
        std::vector<double> values(support_size);
        std::iota(values.begin(), values.end(), 0.0);
        std::vector<double> weights(support_size, 1.0 / static_cast<double>(support_size));
        const CutPoints cuts = quantile_cuts(values, weights, c);
        if (cuts.q_lo >= cuts.q_hi) {
            throw ValidationError("c too large: conditional slices overlap");
        }
        double lo_mass = 0.0, lo_mean = 0.0, hi_mass = 0.0, hi_mean = 0.0, mid_mass = 0.0,
               mid_mean = 0.0;
        for (std::size_t i = 0; i < support_size; ++i) {
            if (values[i] <= cuts.q_lo) {
                lo_mass += weights[i];
                lo_mean += weights[i] * values[i];
            } else if (values[i] >= cuts.q_hi) {
                hi_mass += weights[i];
                hi_mean += weights[i] * values[i];
            } else {
                mid_mass += weights[i];
                mid_mean += weights[i] * values[i];
            }
        }
        lo_mean /= lo_mass;
        hi_mean /= hi_mass;
        if (mid_mass <= 0.0 || mid_mass / static_cast<double>(K - 2) < c - 1e-12) {
            throw ValidationError("middle components would violate the weight floor c");
        }
        const double qr = quantile_range(values, weights, c);
        residual = std::abs(qr - (hi_mean - lo_mean));
        rep.extra["construction_quantile_range"] = qr;
        rep.extra["construction_mean_range"] = hi_mean - lo_mean;
    } else {
        rep.note = "K < 3: sharpness not claimed, inequality-only mode";
    }

    // Inequality direction on random mixtures: component weights >= c_trial.
    double worst_violation = 0.0;
    Rng rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> values(support_size);
        for (double& v : values) v = rng.uniform();
        std::vector<double> pi(K);
        double pi_sum = 0.0;
        for (double& p : pi) {
            p = -std::log(1.0 - rng.uniform());
            pi_sum += p;
        }
        for (double& p : pi) p /= pi_sum;
        const double c_trial = *std::min_element(pi.begin(), pi.end());

        std::vector<std::vector<double>> comp(K, std::vector<double>(support_size));
        std::vector<double> mix(support_size, 0.0);
        std::vector<double> comp_mean(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            double sum = 0.0;
            for (double& w : comp[k]) {
                w = -std::log(1.0 - rng.uniform());
                sum += w;
            }
            for (std::size_t i = 0; i < support_size; ++i) {
                comp[k][i] /= sum;
                mix[i] += pi[k] * comp[k][i];
                comp_mean[k] += comp[k][i] * values[i];
            }
        }
        const auto [lo, hi] = std::minmax_element(comp_mean.begin(), comp_mean.end());
        const double qr = quantile_range(values, mix, c_trial);
        worst_violation = std::max(worst_violation, (*hi - *lo) - qr);
    }
    rep.trials = trials;
    rep.max_deviation = std::max(residual, worst_violation);
    rep.pass = rep.max_deviation <= rep.bound;
    rep.extra["equality_residual"] = residual;
    rep.extra["worst_inequality_violation"] = worst_violation;
    return rep;
}

OracleReport estimator_rate_study(const DiscreteDistributionSpec& spec, const ModelFn& model,
                                  const LossFn& loss, const std::vector<std::size_t>& n_grid,
                                  std::size_t trials, std::uint64_t seed) {
    OracleReport rep;
    rep.check = "estimator_rate";
    rep.seed = seed;
    rep.trials = trials;
    rep.bound = 0.15;
    if (n_grid.size() < 2) {
        rep.max_deviation = std::numeric_limits<double>::infinity();
        rep.pass = false;
        rep.note = "insufficient grid: slope undefined";
        return rep;
    }
    const double pop = population_csv_oracle(spec, model, loss);
    std::vector<double> log_n, log_err;
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        const std::size_t n = n_grid[gi];
        double err_sum = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            // Redraw (deterministically) in the rare event a census group is empty.
            for (std::uint64_t attempt = 0;; ++attempt) {
                GroupedDataset ds = spec.sample_dataset(n, derive_seed(seed, gi, t, attempt));
                GroupIndex index = build_group_index(ds);
                if (!index.assumption1_ok) continue;
                std::vector<double> losses(ds.size());
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    losses[i] = loss(model(ds.samples[i].features),
                                     static_cast<std::size_t>(ds.samples[i].y));
                }
                err_sum += std::abs(empirical_csv(group_mean_losses(losses, index)) - pop);
                break;
            }
        }
        const double mean_err = err_sum / static_cast<double>(trials);
        rep.extra["err_n" + std::to_string(n)] = mean_err;
        log_n.push_back(std::log(static_cast<double>(n)));
        log_err.push_back(std::log(std::max(mean_err, 1e-300)));
    }
    const double slope = least_squares_slope(log_n, log_err);
    rep.extra["slope"] = slope;
    rep.max_deviation = std::abs(slope + 0.5);
    rep.pass = rep.max_deviation <= rep.bound;
    return rep;
}

OracleReport convergence_study(const ToySpec& toy, std::size_t n_train,
                               const TrainConfig& config_template,
                               const std::vector<std::size_t>& T_grid, std::size_t n_seeds,
                               std::uint64_t seed) {
    OracleReport rep;
    rep.check = "minimax_convergence_trend";
    rep.seed = seed;
    rep.bound = -0.25;
    rep.trials = n_seeds * T_grid.size();
    if (T_grid.size() < 2) {
        rep.max_deviation = std::numeric_limits<double>::infinity();
        rep.pass = false;
        rep.note = "insufficient grid: slope undefined";
        return rep;
    }

    std::vector<double> log_t, log_g;
    for (std::size_t gi = 0; gi < T_grid.size(); ++gi) {
        const std::size_t T = T_grid[gi];
        double acc = 0.0;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            GroupedDataset ds = gen_toy(toy, n_train, derive_seed(seed, 11, s));
            GroupIndex index = build_group_index(ds);
            TrainConfig cfg = config_template;
            cfg.method = Method::kRcsv;
            cfg.schedule = Schedule::kTheoremScaled;
            cfg.steps = T;
            cfg.seed = derive_seed(seed, 22, s);
            Trainer trainer(ds, index, cfg,
                            ModelParams::linear(ds.dim(), 1, /*with_bias=*/false));
            double min_g2 = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < T; ++t) {
                trainer.step();
                const PhiRho phi =
                    phi_rho_full(ds, index, trainer.params(), cfg.lambda, cfg.rho);
                min_g2 = std::min(min_g2, phi.grad_norm * phi.grad_norm);
            }
            acc += min_g2;
        }
        const double mean_min = acc / static_cast<double>(n_seeds);
        rep.extra["min_grad_sq_T" + std::to_string(T)] = mean_min;
        log_t.push_back(std::log(static_cast<double>(T)));
        log_g.push_back(std::log(std::max(mean_min, 1e-300)));
    }
    const double slope = least_squares_slope(log_t, log_g);
    rep.extra["slope"] = slope;
    rep.max_deviation = slope;
    rep.pass = slope <= rep.bound;
    return rep;
}

OracleReport check_gap_bound(std::size_t m, double lambda, double rho, std::size_t trials,
                             std::uint64_t seed) {
    if (m < 2) throw ValidationError("gap bound needs m >= 2");
    OracleReport rep;
    rep.check = "smoothing_gap_bound_m" + std::to_string(m);
    rep.seed = seed;
    rep.trials = trials;
    rep.bound = lambda * rho * (1.0 / (static_cast<double>(m) * std::exp(1.0)) +
                                2.0 * std::log(static_cast<double>(m)));
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> F(m);
        for (double& v : F) v = 2.0 * rng.uniform() - 1.0;
        const double hard = *std::max_element(F.begin(), F.end());
        const double gap = std::abs(lambda * (entropic_max_value(F, rho) - hard));
        worst = std::max(worst, gap);
    }
    rep.max_deviation = worst;
    rep.pass = worst <= rep.bound + 1e-9;
    return rep;
}

DiscreteDistributionSpec make_two_group_spec() {
    DiscreteDistributionSpec spec;
    spec.support = {{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}};
    spec.p_y = {0.5, 0.5};
    spec.p_z_given_y = {{0.9, 0.1}, {0.1, 0.9}};
    spec.p_x_given_yz.assign(2, std::vector<std::vector<double>>(2, std::vector<double>(4, 0.0)));
    // Coordinate 0 reflects the class with prob 0.9, coordinate 1 the
    // attribute with prob 0.8, independently.
    for (std::size_t y = 0; y < 2; ++y) {
        for (std::size_t z = 0; z < 2; ++z) {
            for (std::size_t x = 0; x < 4; ++x) {
                const std::size_t x0 = x / 2, x1 = x % 2;
                const double p0 = x0 == y ? 0.9 : 0.1;
                const double p1 = x1 == z ? 0.8 : 0.2;
                spec.p_x_given_yz[y][z][x] = p0 * p1;
            }
        }
    }
    spec.loss_bound = 5.0;
    return spec;
}

ModelFn class_coordinate_model() {
    return [](const std::vector<double>& x) {
        const double s = 4.0 * (x[0] - 0.5);
        return std::vector<double>{-s, s};
    };
}

ModelFn attribute_coordinate_model() {
    return [](const std::vector<double>& x) {
        const double s = 4.0 * (x[1] - 0.5);
        return std::vector<double>{-s, s};
    };
}

LossFn clipped_cross_entropy(double M) {
    return [M](const std::vector<double>& outputs, std::size_t k) {
        double mx = outputs[0];
        for (double v : outputs) mx = std::max(mx, v);
        double sum = 0.0;
        for (double v : outputs) sum += std::exp(v - mx);
        const double ce = std::log(sum) - (outputs[k] - mx);
        return std::min(ce, M);
    };
}

std::vector<OracleReport> run_oracle_suite(std::uint64_t seed, bool include_slow) {
    std::vector<OracleReport> reports;
    const DiscreteDistributionSpec spec = make_two_group_spec();
    const LossFn ce = clipped_cross_entropy(spec.loss_bound);

    reports.push_back(check_risk_invariance(spec, class_coordinate_model(), ce, 20));

    {
        // The counterexample mechanism: a model reading the attribute-informative
        // coordinate must see a large risk shift across the grid.
        OracleReport r = check_risk_invariance(spec, attribute_coordinate_model(), ce, 20);
        OracleReport flipped;
        flipped.check = "spurious_model_shift";
        flipped.trials = r.trials;
        flipped.extra = r.extra;
        flipped.bound = -0.1;  // pass <=> risk deviation >= 0.1
        flipped.max_deviation = -r.extra["risk_deviation"];
        flipped.pass = flipped.max_deviation <= flipped.bound;
        flipped.note = "expects a large deviation for a spurious-feature model";
        reports.push_back(flipped);
    }

    reports.push_back(
        check_ood_risk_bound(spec, attribute_coordinate_model(), ce, 50, 100, 20, seed));
    reports.push_back(check_quantile_sharpness(3, 0.25, 12, 100, derive_seed(seed, 2)));
    {
        // Balanced attribute census isolates the 1/sqrt(n) trend from the
        // min-group-size term.
        DiscreteDistributionSpec rate_spec = spec;
        rate_spec.p_z_given_y = {{0.5, 0.5}, {0.5, 0.5}};
        reports.push_back(estimator_rate_study(rate_spec, attribute_coordinate_model(), ce,
                                               {100, 400, 1600, 6400}, 20, derive_seed(seed, 3)));
    }
    for (std::size_t m : {2, 4, 9, 16}) {
        reports.push_back(check_gap_bound(m, 1.0, 0.1, 100, derive_seed(seed, 4, m)));
    }
    if (include_slow) {
        TrainConfig tmpl;
        tmpl.lambda = 1.0;
        tmpl.rho = 0.1;
        tmpl.lr = 1.0;
        tmpl.batch_size = 32;
        reports.push_back(convergence_study(ToySpec::defaults(), 1000, tmpl, {500, 2000, 8000}, 3,
                                            derive_seed(seed, 5)));
    }
    return reports;
}

}  // namespace csvreg
