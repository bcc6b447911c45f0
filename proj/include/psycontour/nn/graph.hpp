#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

#include "psycontour/rng.hpp"

namespace psycontour::nn {

using Matrix = Eigen::MatrixXd;

// Tape-based reverse-mode differentiation over row-batched matrices (rows = samples).
// Nodes are appended in evaluation order; backward() walks the tape in reverse.
class Graph {
public:
    using Id = std::size_t;

    Id input(Matrix value);        // constant
    Id param(const Matrix& value); // leaf accumulating a gradient

    const Matrix& value(Id id) const { return nodes_[id].value; }
    // Zero matrix of the node's shape when no gradient reached it.
    Matrix grad(Id id) const;
    std::size_t size() const { return nodes_.size(); }

    Id linear(Id x, Id weight, Id bias);  // x * weight^T + bias (bias is 1 x out)
    Id matmul_t(Id x, Id weight);         // x * weight^T
    Id add(Id a, Id b);
    Id add_row(Id x, Id row);             // broadcast a 1 x cols row over x
    Id mul(Id a, Id b);                   // elementwise
    Id sigmoid(Id x);
    Id tanh(Id x);
    Id prelu(Id x, Id slope);             // slope is 1 x cols
    Id cols(Id x, Eigen::Index start, Eigen::Index count);
    Id concat_cols(const std::vector<Id>& parts);

    // mask * a + (1 - mask) * b with a constant B x 1 mask of zeros and ones.
    Id blend(Id a, Id b, const Eigen::VectorXd& mask);

    // Inverted dropout: surviving entries are scaled by 1/(1-p).
    Id dropout(Id x, double p, Rng& rng);

    // Training-mode batch normalization with biased batch variance. Writes the batch
    // mean and variance when the pointers are non-null.
    Id batch_norm(Id x, Id gamma, Id beta, double eps, Eigen::RowVectorXd* batch_mean = nullptr,
                  Eigen::RowVectorXd* batch_var = nullptr);
    // Inference-mode batch normalization with fixed statistics.
    Id batch_norm_fixed(Id x, Id gamma, Id beta, const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& var,
                        double eps);

    // Per-feature attention over time steps. scores[t] and values[t] are B x D;
    // mask is B x T. For every (b, j) the weights softmax(scores[.](b, j)) over unmasked
    // steps multiply values[t](b, j) and are summed. Returns B x D.
    Id attention_pool(const std::vector<Id>& scores, const std::vector<Id>& values, const Matrix& mask);

    // Mean binary cross-entropy of sigmoid(logits) against targets, computed stably.
    Id bce_with_logits(Id logits, const Matrix& targets);

    void backward(Id scalar);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        std::function<void()> back;
    };

    Id push(Matrix value, bool needs_grad, std::function<void()> back = {});
    bool needs(Id id) const { return nodes_[id].needs_grad; }
    void accumulate(Id id, const Matrix& g);

    std::vector<Node> nodes_;
};

// Column-wise masked softmax weights over time (one B x D matrix per step); masked steps
// receive weight 0. Shared by the graph op and by tests.
std::vector<Matrix> attention_weights(const std::vector<Matrix>& scores, const Matrix& mask);

}  // namespace psycontour::nn
