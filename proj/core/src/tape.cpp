#include "csvreg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csvreg/errors.hpp"

namespace csvreg {

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_ref(NodeId id) const {
    if (id >= nodes_.size()) throw ContractError("tape node reference out of range");
}

NodeId Tape::input(Tensor value) {
    return push(Node{OpKind::kInput, 0, 0, std::move(value), {}, {}, {}});
}

NodeId Tape::parameter(Tensor value) {
    return push(Node{OpKind::kParameter, 0, 0, std::move(value), {}, {}, {}});
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    check_ref(a);
    check_ref(b);
    Tensor out = csvreg::matmul(nodes_[a].value, nodes_[b].value);
    return push(Node{OpKind::kMatmul, a, b, std::move(out), {}, {}, {}});
}

NodeId Tape::add_rowvec(NodeId m, NodeId b) {
    check_ref(m);
    check_ref(b);
    const Tensor& mat = nodes_[m].value;
    const Tensor& vec = nodes_[b].value;
    if (mat.rank() != 2 || vec.size() != mat.cols()) {
        throw DimensionError("add_rowvec shape mismatch: " + mat.shape_str() + " vs " +
                             vec.shape_str());
    }
    Tensor out = mat;
    const std::size_t c = mat.cols();
    for (std::size_t i = 0; i < mat.rows(); ++i) {
        for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += vec.data[j];
    }
    return push(Node{OpKind::kAddRowVec, m, b, std::move(out), {}, {}, {}});
}

NodeId Tape::relu(NodeId x) {
    check_ref(x);
    Tensor out = nodes_[x].value;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return push(Node{OpKind::kRelu, x, 0, std::move(out), {}, {}, {}});
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
    check_ref(logits);
    const Tensor& z = nodes_[logits].value;
    if (z.rank() != 2) throw DimensionError("softmax CE expects [batch x K] logits, got " + z.shape_str());
    const std::size_t batch = z.rows(), k = z.cols();
    if (batch == 0) throw ValidationError("softmax CE on empty batch");
    if (labels.size() != batch) throw ValidationError("label count does not match batch size");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw ValidationError("label " + std::to_string(y) + " out of range [0, " +
                                  std::to_string(k) + ")");
        }
    }
    Tensor out = Tensor::zeros({batch});
    for (std::size_t i = 0; i < batch; ++i) {
        const double* row = &z.data[i * k];
        double m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - m);
        out.data[i] = std::log(sum) - (row[static_cast<std::size_t>(labels[i])] - m);
    }
    return push(Node{OpKind::kSoftmaxCrossEntropy, logits, 0, std::move(out), {}, std::move(labels), {}});
}

NodeId Tape::logistic_loss(NodeId scores, std::vector<int> labels) {
    check_ref(scores);
    const Tensor& s = nodes_[scores].value;
    if (s.rank() != 2 || s.cols() != 1) {
        throw DimensionError("logistic loss expects [batch x 1] scores, got " + s.shape_str());
    }
    const std::size_t batch = s.rows();
    if (batch == 0) throw ValidationError("logistic loss on empty batch");
    if (labels.size() != batch) throw ValidationError("label count does not match batch size");
    Tensor out = Tensor::zeros({batch});
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw ValidationError("binary label " + std::to_string(labels[i]) + " out of range");
        }
        // loss = log(1 + exp(-m)), m = (2y-1) * s, computed as softplus(-m).
        const double m = (labels[i] == 1 ? 1.0 : -1.0) * s.data[i];
        out.data[i] = m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    }
    return push(Node{OpKind::kLogisticLoss, scores, 0, std::move(out), {}, std::move(labels), {}});
}

NodeId Tape::weighted_sum(NodeId vec, std::vector<double> weights) {
    check_ref(vec);
    const Tensor& v = nodes_[vec].value;
    if (weights.size() != v.size()) {
        throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights vs " +
                             std::to_string(v.size()) + " entries");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * v.data[i];
    return push(Node{OpKind::kWeightedSum, vec, 0, Tensor::scalar(acc), {}, {}, std::move(weights)});
}

NodeId Tape::add(NodeId a, NodeId b) {
    check_ref(a);
    check_ref(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("add shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
    return push(Node{OpKind::kAdd, a, b, std::move(out), {}, {}, {}});
}

NodeId Tape::scale(NodeId x, double c) {
    check_ref(x);
    Tensor out = nodes_[x].value;
    for (double& v : out.data) v *= c;
    return push(Node{OpKind::kScale, x, 0, std::move(out), {}, {}, {c}});
}

NodeId Tape::sum_squares(NodeId x) {
    check_ref(x);
    double acc = 0.0;
    for (double v : nodes_[x].value.data) acc += v * v;
    return push(Node{OpKind::kSumSquares, x, 0, Tensor::scalar(acc), {}, {}, {}});
}

void Tape::backward(NodeId root) {
    check_ref(root);
    if (!nodes_[root].value.is_scalar()) {
        throw ContractError("backward root must be a scalar node");
    }
    for (Node& n : nodes_) {
        n.adjoint = Tensor::zeros(n.value.shape);
    }
    nodes_[root].adjoint.data[0] = 1.0;

    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
        Node& n = nodes_[idx];
        switch (n.op) {
            case OpKind::kInput:
            case OpKind::kParameter:
                break;
            case OpKind::kMatmul: {
                const Tensor& a = nodes_[n.a].value;
                const Tensor& b = nodes_[n.b].value;
                Tensor& da = nodes_[n.a].adjoint;
                Tensor& db = nodes_[n.b].adjoint;
                const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
                // dA += dC * B^T ; dB += A^T * dC
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t l = 0; l < c; ++l) {
                        const double g = n.adjoint.data[i * c + l];
                        if (g == 0.0) continue;
                        for (std::size_t j = 0; j < k; ++j) {
                            da.data[i * k + j] += g * b.data[j * c + l];
                            db.data[j * c + l] += a.data[i * k + j] * g;
                        }
                    }
                }
                break;
            }
            case OpKind::kAddRowVec: {
                Tensor& dm = nodes_[n.a].adjoint;
                Tensor& dv = nodes_[n.b].adjoint;
                const std::size_t c = nodes_[n.a].value.cols();
                for (std::size_t i = 0; i < nodes_[n.a].value.rows(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        const double g = n.adjoint.data[i * c + j];
                        dm.data[i * c + j] += g;
                        dv.data[j] += g;
                    }
                }
                break;
            }
            case OpKind::kRelu: {
                const Tensor& x = nodes_[n.a].value;
                Tensor& dx = nodes_[n.a].adjoint;
                // subgradient at 0 is taken as 0
                for (std::size_t i = 0; i < x.size(); ++i) {
                    if (x.data[i] > 0.0) dx.data[i] += n.adjoint.data[i];
                }
                break;
            }
            case OpKind::kSoftmaxCrossEntropy: {
                const Tensor& z = nodes_[n.a].value;
                Tensor& dz = nodes_[n.a].adjoint;
                const std::size_t batch = z.rows(), k = z.cols();
                for (std::size_t i = 0; i < batch; ++i) {
                    const double g = n.adjoint.data[i];
                    if (g == 0.0) continue;
                    const double* row = &z.data[i * k];
                    double m = row[0];
                    for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
                    double sum = 0.0;
                    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - m);
                    // d loss / d logit_j = softmax_j - onehot_j
                    for (std::size_t j = 0; j < k; ++j) {
                        double p = std::exp(row[j] - m) / sum;
                        if (j == static_cast<std::size_t>(n.labels[i])) p -= 1.0;
                        dz.data[i * k + j] += g * p;
                    }
                }
                break;
            }
            case OpKind::kLogisticLoss: {
                const Tensor& s = nodes_[n.a].value;
                Tensor& ds = nodes_[n.a].adjoint;
                for (std::size_t i = 0; i < s.rows(); ++i) {
                    const double g = n.adjoint.data[i];
                    if (g == 0.0) continue;
                    // d loss / d s = sigmoid(s) - y
                    const double sig = 1.0 / (1.0 + std::exp(-s.data[i]));
                    ds.data[i] += g * (sig - static_cast<double>(n.labels[i]));
                }
                break;
            }
            case OpKind::kWeightedSum: {
                Tensor& dv = nodes_[n.a].adjoint;
                const double g = n.adjoint.data[0];
                for (std::size_t i = 0; i < n.weights.size(); ++i) {
                    dv.data[i] += g * n.weights[i];
                }
                break;
            }
            case OpKind::kAdd: {
                Tensor& da = nodes_[n.a].adjoint;
                Tensor& db = nodes_[n.b].adjoint;
                for (std::size_t i = 0; i < n.adjoint.size(); ++i) {
                    da.data[i] += n.adjoint.data[i];
                    db.data[i] += n.adjoint.data[i];
                }
                break;
            }
            case OpKind::kScale: {
                Tensor& dx = nodes_[n.a].adjoint;
                for (std::size_t i = 0; i < n.adjoint.size(); ++i) {
                    dx.data[i] += n.weights[0] * n.adjoint.data[i];
                }
                break;
            }
            case OpKind::kSumSquares: {
                const Tensor& x = nodes_[n.a].value;
                Tensor& dx = nodes_[n.a].adjoint;
                const double g = n.adjoint.data[0];
                for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] += g * 2.0 * x.data[i];
                break;
            }
        }
    }
}

}  // namespace csvreg
