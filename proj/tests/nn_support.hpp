#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "psycontour/nn/model.hpp"
#include "psycontour/rng.hpp"

namespace testing {

struct GradCheck {
    double max_relative_error = 0.0;
    std::string worst;
    std::size_t checked = 0;
    std::size_t tensors = 0;
};

inline double training_loss(const psycontour::nn::ContourModel& model,
                            const std::vector<psycontour::nn::ModelInput>& batch, const Eigen::MatrixXd& targets) {
    psycontour::nn::Graph g;
    const auto bound = model.bind(g);
    psycontour::Rng rng(1);
    const auto f = model.forward(g, bound, batch, true, &rng);
    return g.value(g.bce_with_logits(f.logits, targets))(0, 0);
}

// Backward-pass gradients of the training loss against central differences for every
// trainable scalar. Needs dropout 0 so the forward pass is deterministic.
inline GradCheck gradient_check(psycontour::nn::ContourModel& model,
                                const std::vector<psycontour::nn::ModelInput>& batch, const Eigen::MatrixXd& targets,
                                double h = 1e-5) {
    using namespace psycontour::nn;
    Graph g;
    const auto bound = model.bind(g);
    psycontour::Rng rng(1);
    const auto f = model.forward(g, bound, batch, true, &rng);
    const auto loss = g.bce_with_logits(f.logits, targets);
    g.backward(loss);

    GradCheck out;
    auto& tensors = model.params().tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (!tensors[i].trainable) continue;
        ++out.tensors;
        const Matrix analytic = g.grad(bound[i]);
        Matrix& w = tensors[i].value;
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                const double saved = w(r, c);
                w(r, c) = saved + h;
                const double up = training_loss(model, batch, targets);
                w(r, c) = saved - h;
                const double down = training_loss(model, batch, targets);
                w(r, c) = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double a = analytic(r, c);
                const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
                ++out.checked;
                if (err > out.max_relative_error) {
                    out.max_relative_error = err;
                    out.worst = tensors[i].name + "(" + std::to_string(r) + "," + std::to_string(c) + ")";
                }
            }
        }
    }
    return out;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, psycontour::Rng& rng, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    }
    return m;
}

}  // namespace testing
