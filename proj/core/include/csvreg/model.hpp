#pragma once

#include <functional>
#include <vector>

#include "csvreg/rng.hpp"
#include "csvreg/tape.hpp"
#include "csvreg/tensor.hpp"

namespace csvreg {

enum class Arch { kLinear, kMlp };

/// Model parameters: a stack of (weight, bias) pairs. Weights are stored
/// [in x out]; ReLU sits between layers for the MLP. `has_bias` turns the
/// whole stack bias-free (the toy classifier is a pure inner product).
struct ModelParams {
    Arch arch = Arch::kLinear;
    bool has_bias = true;
    struct Layer {
        Tensor weight;  // [in x out]
        Tensor bias;    // [out]
    };
    std::vector<Layer> layers;

    static ModelParams linear(std::size_t in_dim, std::size_t out_dim, bool with_bias = true);
    static ModelParams mlp(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, Rng& rng);

    std::size_t input_dim() const { return layers.front().weight.rows(); }
    std::size_t output_dim() const { return layers.back().weight.cols(); }

    /// Checks that consecutive layer shapes compose.
    void validate() const;

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
    std::size_t parameter_count() const;
};

/// Parameter nodes registered on a tape, in layer order [W0, b0, W1, b1, ...].
struct ModelNodes {
    std::vector<NodeId> nodes;
};

ModelNodes register_params(Tape& tape, const ModelParams& params);

/// Runs the model on a [batch x dim] feature tensor; returns the output node
/// ([batch x out_dim]). Throws DimensionError naming both shapes on mismatch.
NodeId forward(Tape& tape, const ModelParams& params, const ModelNodes& nodes, NodeId features);

/// Per-example losses for the model's output head: logistic loss when
/// output_dim == 1, softmax cross-entropy otherwise. Labels are class indices.
NodeId per_sample_losses(Tape& tape, const ModelParams& params, NodeId outputs,
                         std::vector<int> labels);

/// Predicted class indices (sign test for the single-output head, argmax else).
std::vector<int> predict(const ModelParams& params, const Tensor& features);

/// Trainable tensors in register_params order.
std::vector<Tensor*> trainable_tensors(ModelParams& params);

/// In-place SGD step: theta <- theta - lr * (g + weight_decay * theta).
/// `grads` follow register_params order. Throws on non-finite gradients.
void sgd_step(ModelParams& params, const std::vector<Tensor>& grads, double lr,
              double weight_decay);

/// Collects adjoints of registered parameter nodes after backward().
std::vector<Tensor> collect_grads(const Tape& tape, const ModelNodes& nodes);

/// Max relative error between the autodiff gradient and central differences.
/// `fn` evaluates the scalar objective at the given parameters and, when
/// `grads` is non-null, must fill it with the autodiff gradient.
using GradCheckFn = std::function<double(const ModelParams&, std::vector<Tensor>* grads)>;
double grad_check(const GradCheckFn& fn, const ModelParams& point, double epsilon);

}  // namespace csvreg
