#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csvreg/dataset.hpp"
#include "csvreg/model.hpp"

namespace csvreg {

enum class Method { kRcsv, kRcsvU, kErm, kErmrsY, kErmrsYz, kGroupDro, kCorrelation };

std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

/// Whether the method needs observed spurious attributes.
bool method_needs_attributes(Method m);

enum class LabelShift { kOff, kUniformClass };
enum class Schedule { kConstant, kTheoremScaled };

struct TrainConfig {
    Method method = Method::kErm;
    double lambda = 1.0;
    double rho = 0.01;
    double gamma = 0.9;
    double lr = 0.01;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::size_t steps = 3000;
    std::size_t batch_size = 32;
    SamplerStrategy sampler{};  // sampler for the empirical-risk / baseline batch
    LabelShift label_shift = LabelShift::kOff;
    double group_dro_eta = 0.01;  // multiplicative-weights step for the GroupDRO baseline
    Schedule schedule = Schedule::kConstant;
    std::uint64_t seed = 0;

    void validate() const;
    /// Schedule-aware step size / moving-average constant. Under the
    /// theorem-scaled schedule: lr * steps^(-3/5) and steps^(-2/5).
    double effective_lr() const;
    double effective_gamma() const;
};

/// Default batch sampler per method (the reweighted-sampling pairs).
SamplerStrategy default_sampler(Method m);

/// Inner-maximization state: per-class moving-average estimator vector and,
/// for the observed-attribute method, the explicit simplex weights. For the
/// attribute-free method F holds a per-sample loss vector per class and the
/// pairwise weights are factorized on the fly.
struct DualState {
    double gamma = 0.9;
    double rho = 0.01;
    std::vector<std::vector<double>> F;
    std::vector<std::vector<double>> u;
};

/// Softmax(F / rho) with max-subtraction; the exact maximizer of
/// u -> u'F - rho * sum_j u_j log(m u_j) over the simplex.
std::vector<double> smoothed_max_weights(const std::vector<double>& F, double rho);

/// max_u { u'F - rho * sum_j u_j log(m u_j) } in closed form:
/// rho * log( (1/m) sum_j exp(F_j / rho) ).
double entropic_max_value(const std::vector<double>& F, double rho);

/// Moving-average update of dual.F[k] on the observed entries, leaving masked
/// entries untouched, then refresh of the explicit weights when present.
void dual_update(DualState& dual, std::size_t k, const std::vector<double>& F_hat,
                 const std::vector<std::uint8_t>* observed_mask);

struct RangePenalty {
    double penalty = 0.0;            // sum_i a_i L_i - sum_j b_j L_j
    std::vector<double> weights;     // a - b, the per-sample gradient coefficients
};

/// Entropically smoothed range of a loss vector: with a = softmax(L/rho) and
/// b = softmax(-L/rho), equals the smoothed maximum of u'F over the pairwise
/// difference vector F (the pair softmax factorizes as a (x) b).
RangePenalty smooth_range_penalty(const std::vector<double>& losses, double rho);

/// Worst-case label-shift weights w_k = 1 / (K_y * p_k); E_P[w] = 1.
std::vector<double> label_shift_weights(const std::vector<double>& class_priors);

struct PhiRho {
    double value = 0.0;
    double grad_norm = 0.0;
};

/// Full-batch smoothed objective sum_k p_k (R_emp + lambda * max_u {u'F^k -
/// rho sum u log(mu)}) and the norm of its gradient at the exact inner
/// maximizer (held fixed). Diagnostics only; requires observed attributes.
PhiRho phi_rho_full(const GroupedDataset& dataset, const GroupIndex& index,
                    const ModelParams& params, double lambda, double rho);

/// Single-owner training loop over one dataset. Batch draws come from two
/// independent seed-derived streams (empirical-risk batch vs. penalty batch),
/// so a lambda = 0 run consumes the identical uniform stream as plain ERM.
class Trainer {
public:
    Trainer(const GroupedDataset& dataset, const GroupIndex& index, TrainConfig config,
            ModelParams init);

    void step();
    void run();  // executes the remaining steps up to config.steps

    const ModelParams& params() const { return params_; }
    const TrainConfig& config() const { return config_; }
    const DualState& dual() const { return dual_; }
    std::size_t step_count() const { return step_; }
    const std::vector<double>& loss_trace() const { return loss_trace_; }
    const std::vector<double>& penalty_trace() const { return penalty_trace_; }
    const std::vector<double>& dro_weights() const { return dro_weights_; }

    void save_checkpoint(std::ostream& os) const;
    /// Restores a trainer saved with save_checkpoint; the config must hash to
    /// the stored value and the dataset must be the one trained on.
    static Trainer load_checkpoint(std::istream& is, const GroupedDataset& dataset,
                                   const GroupIndex& index, const TrainConfig& config);

private:
    void step_rcsv();
    void step_rcsv_u();
    void step_baseline();
    void apply_update(Tape& tape, const ModelNodes& nodes);
    std::vector<double> risk_coefficients(const std::vector<std::size_t>& ids) const;

    const GroupedDataset& dataset_;
    const GroupIndex& index_;
    TrainConfig config_;
    ModelParams params_;
    DualState dual_;
    std::vector<double> dro_weights_;
    std::vector<Tensor> momentum_;
    std::vector<std::pair<std::size_t, std::size_t>> class_pos_;  // id -> (k, within-class pos)
    Rng rng_uniform_;
    Rng rng_penalty_;
    std::size_t step_ = 0;
    std::vector<double> loss_trace_;
    std::vector<double> penalty_trace_;
};

/// FNV-1a hash of the canonical config serialization; stored in checkpoints.
std::uint64_t config_hash(const TrainConfig& config);
std::string serialize_train_config(const TrainConfig& config);

}  // namespace csvreg
