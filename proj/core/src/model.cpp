#include "csvreg/model.hpp"

#include <cmath>
#include <string>

#include "csvreg/errors.hpp"

namespace csvreg {

ModelParams ModelParams::linear(std::size_t in_dim, std::size_t out_dim, bool with_bias) {
    ModelParams p;
    p.arch = Arch::kLinear;
    p.has_bias = with_bias;
    p.layers.push_back({Tensor::zeros({in_dim, out_dim}), Tensor::zeros({out_dim})});
    return p;
}

ModelParams ModelParams::mlp(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, Rng& rng) {
    ModelParams p;
    p.arch = Arch::kMlp;
    auto init = [&rng](std::size_t rows, std::size_t cols) {
        Tensor t = Tensor::zeros({rows, cols});
        const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
        for (double& v : t.data) v = rng.normal() * scale;
        return t;
    };
    p.layers.push_back({init(in_dim, hidden), Tensor::zeros({hidden})});
    p.layers.push_back({init(hidden, out_dim), Tensor::zeros({out_dim})});
    return p;
}

void ModelParams::validate() const {
    if (layers.empty()) throw ValidationError("model has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.weight.rank() != 2 || l.bias.size() != l.weight.cols()) {
            throw DimensionError("layer " + std::to_string(i) + " bias " + l.bias.shape_str() +
                                 " does not match weight " + l.weight.shape_str());
        }
        if (i > 0 && layers[i - 1].weight.cols() != l.weight.rows()) {
            throw DimensionError("layer " + std::to_string(i - 1) + " output " +
                                 layers[i - 1].weight.shape_str() + " does not feed layer " +
                                 std::to_string(i) + " input " + l.weight.shape_str());
        }
    }
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers) {
        flat.insert(flat.end(), l.weight.data.begin(), l.weight.data.end());
        if (has_bias) flat.insert(flat.end(), l.bias.data.begin(), l.bias.data.end());
    }
    return flat;
}

void ModelParams::unflatten(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) {
        throw DimensionError("flat parameter vector length " + std::to_string(flat.size()) +
                             " does not match model size " + std::to_string(parameter_count()));
    }
    std::size_t off = 0;
    for (auto& l : layers) {
        std::copy(flat.begin() + off, flat.begin() + off + l.weight.size(), l.weight.data.begin());
        off += l.weight.size();
        if (has_bias) {
            std::copy(flat.begin() + off, flat.begin() + off + l.bias.size(), l.bias.data.begin());
            off += l.bias.size();
        }
    }
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + (has_bias ? l.bias.size() : 0);
    return n;
}

ModelNodes register_params(Tape& tape, const ModelParams& params) {
    ModelNodes out;
    for (const auto& l : params.layers) {
        out.nodes.push_back(tape.parameter(l.weight));
        if (params.has_bias) out.nodes.push_back(tape.parameter(l.bias));
    }
    return out;
}

NodeId forward(Tape& tape, const ModelParams& params, const ModelNodes& nodes, NodeId features) {
    const Tensor& x = tape.value(features);
    if (x.rank() != 2 || x.cols() != params.input_dim()) {
        throw DimensionError("features " + x.shape_str() + " do not match first layer input [" +
                             std::to_string(params.input_dim()) + " x ...]");
    }
    const std::size_t stride = params.has_bias ? 2 : 1;
    NodeId h = features;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        h = tape.matmul(h, nodes.nodes[stride * i]);
        if (params.has_bias) h = tape.add_rowvec(h, nodes.nodes[stride * i + 1]);
        if (i + 1 < params.layers.size()) h = tape.relu(h);
    }
    return h;
}

NodeId per_sample_losses(Tape& tape, const ModelParams& params, NodeId outputs,
                         std::vector<int> labels) {
    if (params.output_dim() == 1) return tape.logistic_loss(outputs, std::move(labels));
    return tape.softmax_cross_entropy(outputs, std::move(labels));
}

std::vector<int> predict(const ModelParams& params, const Tensor& features) {
    Tape tape;
    ModelNodes nodes = register_params(tape, params);
    NodeId out = forward(tape, params, nodes, tape.input(features));
    const Tensor& y = tape.value(out);
    std::vector<int> pred(y.rows());
    if (y.cols() == 1) {
        for (std::size_t i = 0; i < y.rows(); ++i) pred[i] = y.data[i] > 0.0 ? 1 : 0;
    } else {
        for (std::size_t i = 0; i < y.rows(); ++i) {
            const double* row = &y.data[i * y.cols()];
            std::size_t best = 0;
            for (std::size_t j = 1; j < y.cols(); ++j) {
                if (row[j] > row[best]) best = j;
            }
            pred[i] = static_cast<int>(best);
        }
    }
    return pred;
}

std::vector<Tensor*> trainable_tensors(ModelParams& params) {
    std::vector<Tensor*> out;
    for (auto& l : params.layers) {
        out.push_back(&l.weight);
        if (params.has_bias) out.push_back(&l.bias);
    }
    return out;
}

void sgd_step(ModelParams& params, const std::vector<Tensor>& grads, double lr,
              double weight_decay) {
    const std::vector<Tensor*> targets = trainable_tensors(params);
    if (grads.size() != targets.size()) {
        throw DimensionError("gradient list length " + std::to_string(grads.size()) +
                             " does not match parameter tensors " +
                             std::to_string(targets.size()));
    }
    for (const Tensor& g : grads) {
        if (!g.all_finite()) {
            throw std::runtime_error("training aborted: non-finite gradient encountered");
        }
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const Tensor& g = grads[i];
        Tensor& p = *targets[i];
        if (!g.same_shape(p)) {
            throw DimensionError("gradient " + g.shape_str() + " does not match parameter " +
                                 p.shape_str());
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            p.data[j] -= lr * (g.data[j] + weight_decay * p.data[j]);
        }
    }
}

std::vector<Tensor> collect_grads(const Tape& tape, const ModelNodes& nodes) {
    std::vector<Tensor> grads;
    grads.reserve(nodes.nodes.size());
    for (NodeId id : nodes.nodes) grads.push_back(tape.adjoint(id));
    return grads;
}

double grad_check(const GradCheckFn& fn, const ModelParams& point, double epsilon) {
    if (epsilon <= 0.0) throw ValidationError("grad_check epsilon must be positive");
    ModelParams work = point;
    std::vector<Tensor> grads;
    fn(work, &grads);
    std::vector<double> flat_grad;
    for (const Tensor& g : grads) {
        flat_grad.insert(flat_grad.end(), g.data.begin(), g.data.end());
    }

    std::vector<double> flat = point.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double saved = flat[i];
        flat[i] = saved + epsilon;
        work.unflatten(flat);
        const double up = fn(work, nullptr);
        flat[i] = saved - epsilon;
        work.unflatten(flat);
        const double down = fn(work, nullptr);
        flat[i] = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double rel = std::abs(flat_grad[i] - fd) / (std::abs(fd) + 1e-12);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace csvreg
