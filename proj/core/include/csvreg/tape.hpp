#pragma once

#include <cstdint>
#include <vector>

#include "csvreg/tensor.hpp"

namespace csvreg {

using NodeId = std::uint32_t;

enum class OpKind : std::uint8_t {
    kInput,      // constant leaf
    kParameter,  // leaf with adjoint collected by callers
    kMatmul,     // a (r x k) * b (k x c)
    kAddRowVec,  // m (r x c) + row vector b (c)
    kRelu,
    kSoftmaxCrossEntropy,  // logits (batch x K), labels -> per-example losses (batch)
    kLogisticLoss,         // scores (batch x 1), labels {0,1} -> per-example losses (batch)
    kWeightedSum,          // fixed coefficients dot per-example vector -> scalar
    kAdd,                  // elementwise, same shape
    kScale,                // x * constant
    kSumSquares,           // sum of squares of all entries -> scalar
};

/// Reverse-mode tape over dense tensors. Nodes reference earlier nodes only;
/// the tape is rebuilt every training step.
class Tape {
public:
    NodeId input(Tensor value);
    NodeId parameter(Tensor value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId m, NodeId b);
    NodeId relu(NodeId x);

    /// loss_i = -log softmax(logits_i)[label_i], stabilized by max-subtraction.
    NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);

    /// Binary cross-entropy on a single score column: loss_i = log(1 + exp(-s_i))
    /// for label 1 shifted appropriately for label 0. Equivalent to 2-class
    /// softmax CE with logits (0, s_i).
    NodeId logistic_loss(NodeId scores, std::vector<int> labels);

    NodeId weighted_sum(NodeId vec, std::vector<double> weights);
    NodeId add(NodeId a, NodeId b);
    NodeId scale(NodeId x, double c);
    NodeId sum_squares(NodeId x);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& adjoint(NodeId id) const { return nodes_[id].adjoint; }
    std::size_t size() const { return nodes_.size(); }

    /// Populates adjoints of every node reachable from `root` (must be scalar).
    void backward(NodeId root);

private:
    struct Node {
        OpKind op;
        NodeId a = 0;
        NodeId b = 0;
        Tensor value;
        Tensor adjoint;
        std::vector<int> labels;      // classification ops
        std::vector<double> weights;  // kWeightedSum coefficients / kScale constant
    };

    NodeId push(Node node);
    void check_ref(NodeId id) const;

    std::vector<Node> nodes_;
};

}  // namespace csvreg
