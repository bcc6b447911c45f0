#include "psycontour/nn/adamw.hpp"

#include <cmath>

#include "psycontour/error.hpp"

namespace psycontour::nn {

void AdamW::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, const std::vector<double>& lrs) {
    if (params.size() != grads.size() || params.size() != lrs.size()) {
        throw UsageError("AdamW: parameter, gradient and rate counts differ");
    }
    if (m_.empty()) {
        for (const auto* p : params) {
            m_.push_back(Matrix::Zero(p->rows(), p->cols()));
            v_.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    if (m_.size() != params.size()) throw UsageError("AdamW: parameter set changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = *params[i];
        const Matrix& g = grads[i];
        if (g.rows() != w.rows() || g.cols() != w.cols()) throw UsageError("AdamW: gradient shape mismatch");
        const double lr = lrs[i];
        if (opt_.weight_decay != 0.0) w *= 1.0 - lr * opt_.weight_decay;
        m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
        v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
        w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.eps);
    }
}

}  // namespace psycontour::nn
