#include "csvreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "csvreg/csv_metrics.hpp"
#include "csvreg/errors.hpp"

namespace csvreg {

std::string method_name(Method m) {
    switch (m) {
        case Method::kRcsv: return "rcsv";
        case Method::kRcsvU: return "rcsv_u";
        case Method::kErm: return "erm";
        case Method::kErmrsY: return "ermrs_y";
        case Method::kErmrsYz: return "ermrs_yz";
        case Method::kGroupDro: return "group_dro";
        case Method::kCorrelation: return "correlation";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    for (Method m : {Method::kRcsv, Method::kRcsvU, Method::kErm, Method::kErmrsY,
                     Method::kErmrsYz, Method::kGroupDro, Method::kCorrelation}) {
        if (method_name(m) == name) return m;
    }
    return std::nullopt;
}

bool method_needs_attributes(Method m) {
    return m == Method::kRcsv || m == Method::kErmrsYz || m == Method::kGroupDro;
}

SamplerStrategy default_sampler(Method m) {
    switch (m) {
        case Method::kErmrsYz:
        case Method::kGroupDro:
            return {SamplerKind::kGroupBalanced};
        case Method::kErmrsY:
        case Method::kCorrelation:
        case Method::kRcsvU:
            return {SamplerKind::kClassBalanced};
        default:
            return {SamplerKind::kUniform};
    }
}

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    if (rho <= 0.0) throw ValidationError("rho must be positive");
    if (gamma <= 0.0 || gamma > 1.0) throw ValidationError("gamma must lie in (0, 1]");
    if (lr <= 0.0) throw ValidationError("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw ValidationError("weight decay must be nonnegative");
    if (batch_size < 1) throw ValidationError("batch size must be at least 1");
    if (group_dro_eta <= 0.0) throw ValidationError("group_dro_eta must be positive");
}

double TrainConfig::effective_lr() const {
    if (schedule == Schedule::kTheoremScaled) {
        return lr * std::pow(static_cast<double>(std::max<std::size_t>(steps, 1)), -0.6);
    }
    return lr;
}

double TrainConfig::effective_gamma() const {
    if (schedule == Schedule::kTheoremScaled) {
        return std::pow(static_cast<double>(std::max<std::size_t>(steps, 1)), -0.4);
    }
    return gamma;
}

std::vector<double> smoothed_max_weights(const std::vector<double>& F, double rho) {
    if (rho <= 0.0) throw ValidationError("rho must be positive");
    if (F.empty()) throw ValidationError("smoothed max of empty vector");
    double m = F[0];
    for (double v : F) m = std::max(m, v);
    std::vector<double> w(F.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) {
        w[i] = std::exp((F[i] - m) / rho);
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

double entropic_max_value(const std::vector<double>& F, double rho) {
    if (rho <= 0.0) throw ValidationError("rho must be positive");
    double m = F[0];
    for (double v : F) m = std::max(m, v);
    double sum = 0.0;
    for (double v : F) sum += std::exp((v - m) / rho);
    return m + rho * std::log(sum / static_cast<double>(F.size()));
}

void dual_update(DualState& dual, std::size_t k, const std::vector<double>& F_hat,
                 const std::vector<std::uint8_t>* observed_mask) {
    auto& F = dual.F[k];
    if (F_hat.size() != F.size()) {
        throw DimensionError("dual update: estimator length " + std::to_string(F_hat.size()) +
                             " vs state length " + std::to_string(F.size()));
    }
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (observed_mask && !(*observed_mask)[i]) continue;
        F[i] = (1.0 - dual.gamma) * F[i] + dual.gamma * F_hat[i];
    }
    if (k < dual.u.size() && !dual.u[k].empty()) {
        dual.u[k] = smoothed_max_weights(F, dual.rho);
    }
}

RangePenalty smooth_range_penalty(const std::vector<double>& losses, double rho) {
    if (rho <= 0.0) throw ValidationError("rho must be positive");
    if (losses.empty()) throw ValidationError("range penalty of empty loss vector");
    std::vector<double> neg(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) neg[i] = -losses[i];
    const std::vector<double> a = smoothed_max_weights(losses, rho);
    const std::vector<double> b = smoothed_max_weights(neg, rho);
    RangePenalty out;
    out.weights.resize(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
        out.weights[i] = a[i] - b[i];
        out.penalty += out.weights[i] * losses[i];
    }
    return out;
}

std::vector<double> label_shift_weights(const std::vector<double>& class_priors) {
    std::vector<double> w(class_priors.size());
    for (std::size_t k = 0; k < class_priors.size(); ++k) {
        if (class_priors[k] <= 0.0) {
            throw ValidationError("label-shift weight undefined for zero class prior");
        }
        w[k] = 1.0 / (static_cast<double>(class_priors.size()) * class_priors[k]);
    }
    return w;
}

namespace {

// Per-sample coefficients realizing lambda * p_k * u' grad F for the pairwise
// estimator: the loss of a sample in batch-group (k,z) enters every pair
// (z, z2) positively and every pair (z1, z) negatively, scaled by the batch
// group mean denominator.
double pair_weight_margin(const std::vector<double>& u, std::size_t K_z, std::size_t z) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < K_z; ++j) {
        row += u[z * K_z + j];
        col += u[j * K_z + z];
    }
    return row - col;
}

}  // namespace

PhiRho phi_rho_full(const GroupedDataset& dataset, const GroupIndex& index,
                    const ModelParams& params, double lambda, double rho) {
    if (!index.attributes_observed) {
        throw ValidationError("phi_rho_full requires observed spurious attributes");
    }
    const std::size_t n = dataset.size();
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);

    Tape tape;
    ModelNodes nodes = register_params(tape, params);
    NodeId feats = tape.input(dataset.features_of(ids));
    NodeId out = forward(tape, params, nodes, feats);
    NodeId losses = per_sample_losses(tape, params, out, dataset.labels_of(ids));
    const std::vector<double> lvals = tape.value(losses).data;  // adding nodes invalidates references

    GroupLossStats stats = group_mean_losses(lvals, index);
    double value = 0.0;
    for (double v : lvals) value += v;
    value /= static_cast<double>(n);

    std::vector<double> coeff(n, 1.0 / static_cast<double>(n));
    if (lambda > 0.0) {
        for (std::size_t k = 0; k < index.K_y; ++k) {
            const std::vector<double> F = pairwise_F_observed(stats, k);
            value += lambda * index.class_proportions[k] * entropic_max_value(F, rho);
            const std::vector<double> u = smoothed_max_weights(F, rho);
            for (std::size_t z = 0; z < index.K_z; ++z) {
                const double w = lambda * index.class_proportions[k] *
                                 pair_weight_margin(u, index.K_z, z) /
                                 static_cast<double>(index.group_count(k, z));
                for (std::size_t id : index.groups[k][z]) coeff[id] += w;
            }
        }
    }
    NodeId obj = tape.weighted_sum(losses, std::move(coeff));
    tape.backward(obj);
    double norm2 = 0.0;
    for (const Tensor& g : collect_grads(tape, nodes)) {
        for (double v : g.data) norm2 += v * v;
    }
    return {value, std::sqrt(norm2)};
}

Trainer::Trainer(const GroupedDataset& dataset, const GroupIndex& index, TrainConfig config,
                 ModelParams init)
    : dataset_(dataset),
      index_(index),
      config_(std::move(config)),
      params_(std::move(init)),
      rng_uniform_(derive_seed(config_.seed, stream::kUniformBatch)),
      rng_penalty_(derive_seed(config_.seed, stream::kPenaltyBatch)) {
    config_.validate();
    params_.validate();
    if (method_needs_attributes(config_.method) && !index_.attributes_observed) {
        throw ValidationError(method_name(config_.method) +
                              " requires observed spurious attributes");
    }
    if (config_.method == Method::kRcsv && !index_.assumption1_ok) {
        throw AssumptionViolation("rcsv requires every (class, attribute) group populated");
    }

    dual_.gamma = config_.effective_gamma();
    dual_.rho = config_.rho;
    if (config_.method == Method::kRcsv) {
        dual_.F.assign(index_.K_y, std::vector<double>(index_.K_z * index_.K_z, 0.0));
        dual_.u.resize(index_.K_y);
        for (std::size_t k = 0; k < index_.K_y; ++k) {
            dual_.u[k] = smoothed_max_weights(dual_.F[k], dual_.rho);
        }
    } else if (config_.method == Method::kRcsvU) {
        dual_.F.resize(index_.K_y);
        for (std::size_t k = 0; k < index_.K_y; ++k) {
            dual_.F[k].assign(index_.class_counts[k], 0.0);
        }
    }
    if (config_.method == Method::kGroupDro) {
        dro_weights_.assign(index_.K_y * index_.K_z,
                            1.0 / static_cast<double>(index_.K_y * index_.K_z));
    }
    if (config_.method == Method::kRcsvU) {
        class_pos_.resize(dataset_.size());
        for (std::size_t k = 0; k < index_.K_y; ++k) {
            for (std::size_t pos = 0; pos < index_.class_ids[k].size(); ++pos) {
                class_pos_[index_.class_ids[k][pos]] = {k, pos};
            }
        }
    }
}

std::vector<double> Trainer::risk_coefficients(const std::vector<std::size_t>& ids) const {
    std::vector<double> coeff(ids.size(), 1.0 / static_cast<double>(ids.size()));
    if (config_.label_shift == LabelShift::kUniformClass) {
        const std::vector<double> w = label_shift_weights(index_.class_proportions);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            coeff[i] *= w[static_cast<std::size_t>(dataset_.samples[ids[i]].y)];
        }
    }
    return coeff;
}

void Trainer::apply_update(Tape& tape, const ModelNodes& nodes) {
    std::vector<Tensor> grads = collect_grads(tape, nodes);
    const double lr = config_.effective_lr();
    if (config_.momentum == 0.0) {
        sgd_step(params_, grads, lr, config_.weight_decay);
        return;
    }
    if (momentum_.empty()) {
        for (const Tensor& g : grads) momentum_.push_back(Tensor::zeros(g.shape));
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].all_finite()) {
            throw std::runtime_error("training aborted: non-finite gradient at step " +
                                     std::to_string(step_));
        }
    }
    const std::vector<Tensor*> targets = trainable_tensors(params_);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Tensor& p = *targets[i];
        Tensor& v = momentum_[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            v.data[j] = config_.momentum * v.data[j] + g.data[j] + config_.weight_decay * p.data[j];
            p.data[j] -= lr * v.data[j];
        }
    }
}

void Trainer::step() {
    switch (config_.method) {
        case Method::kRcsv: step_rcsv(); break;
        case Method::kRcsvU: step_rcsv_u(); break;
        default: step_baseline(); break;
    }
    ++step_;
}

void Trainer::run() {
    while (step_ < config_.steps) step();
}

void Trainer::step_rcsv() {
    const auto ids_u =
        sample_batch(index_, {SamplerKind::kUniform}, config_.batch_size, rng_uniform_);
    const auto ids_g =
        sample_batch(index_, {SamplerKind::kGroupBalanced}, config_.batch_size, rng_penalty_);

    Tape tape;
    ModelNodes nodes = register_params(tape, params_);
    NodeId losses_u = per_sample_losses(
        tape, params_, forward(tape, params_, nodes, tape.input(dataset_.features_of(ids_u))),
        dataset_.labels_of(ids_u));
    NodeId losses_g = per_sample_losses(
        tape, params_, forward(tape, params_, nodes, tape.input(dataset_.features_of(ids_g))),
        dataset_.labels_of(ids_g));

    // Batch estimate of the per-group mean losses; the stratified sampler
    // guarantees every group is present.
    const std::vector<double> gvals = tape.value(losses_g).data;  // adding nodes invalidates references
    std::vector<double> mean(index_.K_y * index_.K_z, 0.0);
    std::vector<std::size_t> count(index_.K_y * index_.K_z, 0);
    for (std::size_t i = 0; i < ids_g.size(); ++i) {
        const auto& s = dataset_.samples[ids_g[i]];
        const std::size_t cell = static_cast<std::size_t>(s.y) * index_.K_z +
                                 static_cast<std::size_t>(s.z);
        mean[cell] += gvals[i];
        count[cell] += 1;
    }
    for (std::size_t c = 0; c < mean.size(); ++c) {
        mean[c] /= static_cast<double>(count[c]);
    }

    double penalty_estimate = 0.0;
    for (std::size_t k = 0; k < index_.K_y; ++k) {
        std::vector<double> F_hat(index_.K_z * index_.K_z);
        for (std::size_t z1 = 0; z1 < index_.K_z; ++z1) {
            for (std::size_t z2 = 0; z2 < index_.K_z; ++z2) {
                F_hat[z1 * index_.K_z + z2] = mean[k * index_.K_z + z1] - mean[k * index_.K_z + z2];
            }
        }
        dual_update(dual_, k, F_hat, nullptr);
        double dot = 0.0;
        for (std::size_t j = 0; j < F_hat.size(); ++j) dot += dual_.u[k][j] * F_hat[j];
        penalty_estimate += config_.lambda * index_.class_proportions[k] * dot;
    }

    NodeId obj = tape.weighted_sum(losses_u, risk_coefficients(ids_u));
    if (config_.lambda > 0.0) {
        std::vector<double> coeff(ids_g.size());
        for (std::size_t i = 0; i < ids_g.size(); ++i) {
            const auto& s = dataset_.samples[ids_g[i]];
            const std::size_t k = static_cast<std::size_t>(s.y);
            const std::size_t z = static_cast<std::size_t>(s.z);
            coeff[i] = config_.lambda * index_.class_proportions[k] *
                       pair_weight_margin(dual_.u[k], index_.K_z, z) /
                       static_cast<double>(count[k * index_.K_z + z]);
        }
        obj = tape.add(obj, tape.weighted_sum(losses_g, std::move(coeff)));
    }
    tape.backward(obj);

    double mean_u = 0.0;
    for (double v : tape.value(losses_u).data) mean_u += v;
    loss_trace_.push_back(mean_u / static_cast<double>(ids_u.size()));
    penalty_trace_.push_back(penalty_estimate);
    apply_update(tape, nodes);
}

void Trainer::step_rcsv_u() {
    const auto ids_u =
        sample_batch(index_, {SamplerKind::kUniform}, config_.batch_size, rng_uniform_);
    const auto ids_c =
        sample_batch(index_, {SamplerKind::kClassBalanced}, config_.batch_size, rng_penalty_);

    Tape tape;
    ModelNodes nodes = register_params(tape, params_);
    NodeId losses_u = per_sample_losses(
        tape, params_, forward(tape, params_, nodes, tape.input(dataset_.features_of(ids_u))),
        dataset_.labels_of(ids_u));
    NodeId losses_c = per_sample_losses(
        tape, params_, forward(tape, params_, nodes, tape.input(dataset_.features_of(ids_c))),
        dataset_.labels_of(ids_c));
    const std::vector<double> cvals = tape.value(losses_c).data;  // adding nodes invalidates references

    // First batch slot per distinct sampled id, per class.
    std::vector<std::map<std::size_t, std::size_t>> seen(index_.K_y);
    for (std::size_t i = 0; i < ids_c.size(); ++i) {
        const auto [k, pos] = class_pos_[ids_c[i]];
        seen[k].emplace(pos, i);
    }

    double penalty_value = 0.0;
    std::vector<double> coeff(ids_c.size(), 0.0);
    for (std::size_t k = 0; k < index_.K_y; ++k) {
        if (seen[k].empty()) continue;
        // Masked moving average on the sampled entries of the per-class vector.
        std::vector<double> F_hat(dual_.F[k].size(), 0.0);
        std::vector<std::uint8_t> mask(dual_.F[k].size(), 0);
        for (const auto& [pos, slot] : seen[k]) {
            F_hat[pos] = cvals[slot];
            mask[pos] = 1;
        }
        dual_update(dual_, k, F_hat, &mask);

        std::vector<double> avg;
        std::vector<std::size_t> slots;
        avg.reserve(seen[k].size());
        for (const auto& [pos, slot] : seen[k]) {
            avg.push_back(dual_.F[k][pos]);
            slots.push_back(slot);
        }
        const RangePenalty rp = smooth_range_penalty(avg, dual_.rho);
        penalty_value += config_.lambda * index_.class_proportions[k] * rp.penalty;
        for (std::size_t j = 0; j < slots.size(); ++j) {
            coeff[slots[j]] = config_.lambda * index_.class_proportions[k] * rp.weights[j];
        }
    }

    NodeId obj = tape.weighted_sum(losses_u, risk_coefficients(ids_u));
    if (config_.lambda > 0.0) {
        obj = tape.add(obj, tape.weighted_sum(losses_c, std::move(coeff)));
    }
    tape.backward(obj);

    double mean_u = 0.0;
    for (double v : tape.value(losses_u).data) mean_u += v;
    loss_trace_.push_back(mean_u / static_cast<double>(ids_u.size()));
    penalty_trace_.push_back(penalty_value);
    apply_update(tape, nodes);
}

void Trainer::step_baseline() {
    const auto ids = sample_batch(index_, config_.sampler, config_.batch_size, rng_uniform_);

    Tape tape;
    ModelNodes nodes = register_params(tape, params_);
    NodeId losses = per_sample_losses(
        tape, params_, forward(tape, params_, nodes, tape.input(dataset_.features_of(ids))),
        dataset_.labels_of(ids));
    const std::vector<double> lvals = tape.value(losses).data;  // adding nodes invalidates references

    double penalty_value = 0.0;
    NodeId obj = 0;
    if (config_.method == Method::kGroupDro) {
        std::vector<double> mean(index_.K_y * index_.K_z, 0.0);
        std::vector<std::size_t> count(index_.K_y * index_.K_z, 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& s = dataset_.samples[ids[i]];
            const std::size_t cell =
                static_cast<std::size_t>(s.y) * index_.K_z + static_cast<std::size_t>(s.z);
            mean[cell] += lvals[i];
            count[cell] += 1;
        }
        // multiplicative update in log space (large eta must not overflow)
        std::vector<double> logw(mean.size());
        double logmax = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] = count[c] ? mean[c] / static_cast<double>(count[c]) : 0.0;
            logw[c] = std::log(dro_weights_[c]) + config_.group_dro_eta * mean[c];
            logmax = std::max(logmax, logw[c]);
        }
        double wsum = 0.0;
        for (std::size_t c = 0; c < mean.size(); ++c) {
            dro_weights_[c] = std::exp(logw[c] - logmax);
            wsum += dro_weights_[c];
        }
        for (double& w : dro_weights_) w /= wsum;

        std::vector<double> coeff(ids.size(), 0.0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& s = dataset_.samples[ids[i]];
            const std::size_t cell =
                static_cast<std::size_t>(s.y) * index_.K_z + static_cast<std::size_t>(s.z);
            coeff[i] = dro_weights_[cell] / static_cast<double>(count[cell]);
        }
        obj = tape.weighted_sum(losses, std::move(coeff));
    } else if (config_.method == Method::kCorrelation && config_.lambda > 0.0) {
        // Within-class population variance of the batch losses, averaged over
        // the classes present; exact gradient coefficients 2(l - mean)/m.
        std::vector<double> class_sum(index_.K_y, 0.0);
        std::vector<std::size_t> class_count(index_.K_y, 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::size_t k = static_cast<std::size_t>(dataset_.samples[ids[i]].y);
            class_sum[k] += lvals[i];
            class_count[k] += 1;
        }
        std::size_t present = 0;
        for (std::size_t k = 0; k < index_.K_y; ++k) {
            if (class_count[k] > 0) ++present;
        }
        std::vector<double> coeff = risk_coefficients(ids);
        double var_total = 0.0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::size_t k = static_cast<std::size_t>(dataset_.samples[ids[i]].y);
            const double m = static_cast<double>(class_count[k]);
            const double dev = lvals[i] - class_sum[k] / m;
            var_total += dev * dev / m;
            coeff[i] += config_.lambda * 2.0 * dev / (m * static_cast<double>(present));
        }
        penalty_value = config_.lambda * var_total / static_cast<double>(present);
        obj = tape.weighted_sum(losses, std::move(coeff));
    } else {
        obj = tape.weighted_sum(losses, risk_coefficients(ids));
    }
    tape.backward(obj);

    double mean_l = 0.0;
    for (double v : lvals) mean_l += v;
    loss_trace_.push_back(mean_l / static_cast<double>(ids.size()));
    penalty_trace_.push_back(penalty_value);
    apply_update(tape, nodes);
}

std::string serialize_train_config(const TrainConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "method=" << method_name(c.method) << ";lambda=" << c.lambda << ";rho=" << c.rho
       << ";gamma=" << c.gamma << ";lr=" << c.lr << ";momentum=" << c.momentum
       << ";weight_decay=" << c.weight_decay << ";steps=" << c.steps
       << ";batch_size=" << c.batch_size << ";sampler=" << static_cast<int>(c.sampler.kind)
       << ";label_shift=" << static_cast<int>(c.label_shift)
       << ";group_dro_eta=" << c.group_dro_eta << ";schedule=" << static_cast<int>(c.schedule)
       << ";seed=" << c.seed;
    return os.str();
}

std::uint64_t config_hash(const TrainConfig& config) {
    const std::string s = serialize_train_config(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace csvreg
