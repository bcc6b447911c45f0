#pragma once

#include <vector>

#include "psycontour/nn/graph.hpp"

namespace psycontour::nn {

struct AdamWOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with decoupled weight decay and bias-corrected moments. Each parameter carries
// its own learning rate so embedding adapters and the rest can train at different rates.
class AdamW {
public:
    explicit AdamW(AdamWOptions options = {}) : opt_(options) {}

    void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, const std::vector<double>& lrs);

    long steps() const { return t_; }
    std::size_t state_size() const { return m_.size(); }
    const AdamWOptions& options() const { return opt_; }

private:
    AdamWOptions opt_;
    long t_ = 0;
    std::vector<Matrix> m_, v_;
};

}  // namespace psycontour::nn
