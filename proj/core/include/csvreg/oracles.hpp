#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csvreg/csv_metrics.hpp"
#include "csvreg/dataset.hpp"
#include "csvreg/trainer.hpp"

namespace csvreg {

/// Machine-readable result of one brute-force check. pass <=> the observed
/// deviation is within the bound (checks encode their inequality so that
/// "deviation <= bound" is the passing direction).
struct OracleReport {
    std::string check;
    double max_deviation = 0.0;
    double bound = 0.0;
    bool pass = false;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::string note;
    std::map<std::string, double> extra;
};

std::string to_json_line(const OracleReport& report);

/// Population-risk invariance under correlation shift for a fixed model:
/// enumerates a barycentric lattice of conditionals Q_{Z|Y} (denominator
/// `grid_size`, Q_Y and Q_{X|Y,Z} pinned to the spec) and reports the largest
/// |E_Q[L] - E_P[L]| together with the variation of the Y | f(X) table.
OracleReport check_risk_invariance(const DiscreteDistributionSpec& spec, const ModelFn& model,
                                   const LossFn& loss, std::size_t grid_size);

/// Out-of-distribution risk-gap bound: per trial draws a training set of size
/// n, enumerates the worst Q over the grid, and checks
/// sup_Q |R_emp - R_pop(Q)| <= |R_emp - R_pop(P)| + population CSV.
/// trials == 0 runs one deterministic trial with exact population weights in
/// place of the sample.
OracleReport check_ood_risk_bound(const DiscreteDistributionSpec& spec, const ModelFn& model,
                                  const LossFn& loss, std::size_t n, std::size_t trials,
                                  std::size_t grid_size, std::uint64_t seed);

/// Sharpness of the quantile upper bound: builds the explicit construction
/// (lower/upper conditional slices of a base distribution at the c and 1-c
/// quantiles, middle components sharing the rest) and checks equality for
/// K >= 3; additionally checks the inequality direction on `trials` random
/// mixtures with component weights >= c.
OracleReport check_quantile_sharpness(std::size_t K, double c, std::size_t support_size,
                                      std::size_t trials, std::uint64_t seed);

/// Monte-Carlo decay rate of |empirical CSV - population CSV| over n_grid;
/// reports the fitted log-log slope, expected near -1/2.
OracleReport estimator_rate_study(const DiscreteDistributionSpec& spec, const ModelFn& model,
                                  const LossFn& loss, const std::vector<std::size_t>& n_grid,
                                  std::size_t trials, std::uint64_t seed);

/// Convergence trend of the smoothed minimax loop under the theorem-scaled
/// schedules: for each T in T_grid runs the observed-attribute method on a toy
/// dataset, records min over t of the full-batch squared gradient norm of the
/// smoothed objective, averages over `n_seeds` runs, and fits the log-log
/// slope versus T.
OracleReport convergence_study(const ToySpec& toy, std::size_t n_train,
                               const TrainConfig& config_template,
                               const std::vector<std::size_t>& T_grid, std::size_t n_seeds,
                               std::uint64_t seed);

/// |Phi_rho - Phi| <= lambda * rho * (1/(m e) + 2 log m) on random F vectors.
OracleReport check_gap_bound(std::size_t m, double lambda, double rho, std::size_t trials,
                             std::uint64_t seed);

/// A small 2-class / 2-attribute spec used by the default verification suite:
/// feature coordinate 0 carries the class, coordinate 1 carries the attribute.
DiscreteDistributionSpec make_two_group_spec();

/// Logit model reading only the class-informative coordinate (conditionally
/// independent of Z given Y under make_two_group_spec).
ModelFn class_coordinate_model();

/// Logit model reading the attribute-informative coordinate.
ModelFn attribute_coordinate_model();

/// Cross-entropy of 2-class logits, clipped at M.
LossFn clipped_cross_entropy(double M);

/// Runs the default oracle suite (the checks behind the acceptance criteria)
/// with fixed parameters.
std::vector<OracleReport> run_oracle_suite(std::uint64_t seed, bool include_slow = true);

}  // namespace csvreg
