#include "psycontour/nn/graph.hpp"

#include <cmath>
#include <limits>

#include "psycontour/error.hpp"

namespace psycontour::nn {

Graph::Id Graph::push(Matrix value, bool needs_grad, std::function<void()> back) {
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, std::move(back)});
    return nodes_.size() - 1;
}

Graph::Id Graph::input(Matrix value) { return push(std::move(value), false); }

Graph::Id Graph::param(const Matrix& value) { return push(value, true); }

Matrix Graph::grad(Id id) const {
    const auto& n = nodes_[id];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Graph::accumulate(Id id, const Matrix& g) {
    auto& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

namespace {

void check_same(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw UsageError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

}  // namespace

Graph::Id Graph::matmul_t(Id x, Id w) {
    const auto& X = value(x);
    const auto& W = value(w);
    if (X.cols() != W.cols()) throw UsageError("matmul_t: inner dimension mismatch");
    const Id out = push(X * W.transpose(), needs(x) || needs(w));
    nodes_[out].back = [this, x, w, out] {
        const Matrix& g = nodes_[out].grad;
        if (needs(x)) accumulate(x, g * value(w));
        if (needs(w)) accumulate(w, g.transpose() * value(x));
    };
    return out;
}

Graph::Id Graph::add_row(Id x, Id row) {
    const auto& X = value(x);
    const auto& R = value(row);
    if (R.rows() != 1 || R.cols() != X.cols()) throw UsageError("add_row: bias shape mismatch");
    Matrix v = X.rowwise() + R.row(0);
    const Id out = push(std::move(v), needs(x) || needs(row));
    nodes_[out].back = [this, x, row, out] {
        const Matrix& g = nodes_[out].grad;
        if (needs(x)) accumulate(x, g);
        if (needs(row)) accumulate(row, g.colwise().sum());
    };
    return out;
}

Graph::Id Graph::linear(Id x, Id weight, Id bias) { return add_row(matmul_t(x, weight), bias); }

Graph::Id Graph::add(Id a, Id b) {
    check_same(value(a), value(b), "add");
    const Id out = push(value(a) + value(b), needs(a) || needs(b));
    nodes_[out].back = [this, a, b, out] {
        const Matrix& g = nodes_[out].grad;
        accumulate(a, g);
        accumulate(b, g);
    };
    return out;
}

Graph::Id Graph::mul(Id a, Id b) {
    check_same(value(a), value(b), "mul");
    const Id out = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
    nodes_[out].back = [this, a, b, out] {
        const Matrix& g = nodes_[out].grad;
        if (needs(a)) accumulate(a, g.cwiseProduct(value(b)));
        if (needs(b)) accumulate(b, g.cwiseProduct(value(a)));
    };
    return out;
}

Graph::Id Graph::sigmoid(Id x) {
    Matrix v = value(x).unaryExpr([](double z) {
        return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    });
    const Id out = push(std::move(v), needs(x));
    nodes_[out].back = [this, x, out] {
        const Matrix& y = value(out);
        accumulate(x, nodes_[out].grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
    };
    return out;
}

Graph::Id Graph::tanh(Id x) {
    const Id out = push(value(x).array().tanh().matrix(), needs(x));
    nodes_[out].back = [this, x, out] {
        const Matrix& y = value(out);
        accumulate(x, nodes_[out].grad.cwiseProduct((1.0 - y.array().square()).matrix()));
    };
    return out;
}

Graph::Id Graph::prelu(Id x, Id slope) {
    const auto& X = value(x);
    const auto& A = value(slope);
    if (A.rows() != 1 || A.cols() != X.cols()) throw UsageError("prelu: slope shape mismatch");
    Matrix v(X.rows(), X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const double z = X(r, c);
            v(r, c) = z >= 0 ? z : A(0, c) * z;
        }
    }
    const Id out = push(std::move(v), needs(x) || needs(slope));
    nodes_[out].back = [this, x, slope, out] {
        const Matrix& g = nodes_[out].grad;
        const auto& X = value(x);
        const auto& A = value(slope);
        Matrix gx(X.rows(), X.cols());
        Matrix ga = Matrix::Zero(1, X.cols());
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            for (Eigen::Index r = 0; r < X.rows(); ++r) {
                const double z = X(r, c);
                gx(r, c) = z >= 0 ? g(r, c) : A(0, c) * g(r, c);
                if (z < 0) ga(0, c) += g(r, c) * z;
            }
        }
        if (needs(x)) accumulate(x, gx);
        if (needs(slope)) accumulate(slope, ga);
    };
    return out;
}

Graph::Id Graph::cols(Id x, Eigen::Index start, Eigen::Index count) {
    const auto& X = value(x);
    if (start < 0 || count < 0 || start + count > X.cols()) throw UsageError("cols: range out of bounds");
    const Id out = push(X.middleCols(start, count), needs(x));
    nodes_[out].back = [this, x, start, count, out] {
        Matrix g = Matrix::Zero(value(x).rows(), value(x).cols());
        g.middleCols(start, count) = nodes_[out].grad;
        accumulate(x, g);
    };
    return out;
}

Graph::Id Graph::concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw UsageError("concat_cols: no inputs");
    const auto rows = value(parts[0]).rows();
    Eigen::Index total = 0;
    bool ng = false;
    for (auto p : parts) {
        if (value(p).rows() != rows) throw UsageError("concat_cols: row mismatch");
        total += value(p).cols();
        ng = ng || needs(p);
    }
    Matrix v(rows, total);
    Eigen::Index at = 0;
    for (auto p : parts) {
        v.middleCols(at, value(p).cols()) = value(p);
        at += value(p).cols();
    }
    const Id out = push(std::move(v), ng);
    nodes_[out].back = [this, parts, out] {
        Eigen::Index at = 0;
        for (auto p : parts) {
            const auto c = value(p).cols();
            if (needs(p)) accumulate(p, nodes_[out].grad.middleCols(at, c));
            at += c;
        }
    };
    return out;
}

Graph::Id Graph::blend(Id a, Id b, const Eigen::VectorXd& mask) {
    check_same(value(a), value(b), "blend");
    if (mask.size() != value(a).rows()) throw UsageError("blend: mask length mismatch");
    Matrix v = value(b);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        if (mask(r) != 0.0) v.row(r) = value(a).row(r);
    }
    const Id out = push(std::move(v), needs(a) || needs(b));
    nodes_[out].back = [this, a, b, mask, out] {
        const Matrix& g = nodes_[out].grad;
        Matrix ga = Matrix::Zero(g.rows(), g.cols());
        Matrix gb = Matrix::Zero(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            if (mask(r) != 0.0) {
                ga.row(r) = g.row(r);
            } else {
                gb.row(r) = g.row(r);
            }
        }
        if (needs(a)) accumulate(a, ga);
        if (needs(b)) accumulate(b, gb);
    };
    return out;
}

Graph::Id Graph::dropout(Id x, double p, Rng& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw UsageError("dropout rate must be < 1");
    const auto& X = value(x);
    Matrix keep(X.rows(), X.cols());
    const double scale = 1.0 / (1.0 - p);
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        for (Eigen::Index r = 0; r < X.rows(); ++r) keep(r, c) = rng.uniform() >= p ? scale : 0.0;
    }
    const Id out = push(X.cwiseProduct(keep), needs(x));
    nodes_[out].back = [this, x, keep, out] { accumulate(x, nodes_[out].grad.cwiseProduct(keep)); };
    return out;
}

Graph::Id Graph::batch_norm(Id x, Id gamma, Id beta, double eps, Eigen::RowVectorXd* batch_mean,
                            Eigen::RowVectorXd* batch_var) {
    const auto& X = value(x);
    const auto B = static_cast<double>(X.rows());
    if (value(gamma).cols() != X.cols() || value(beta).cols() != X.cols()) {
        throw UsageError("batch_norm: parameter shape mismatch");
    }
    const Eigen::RowVectorXd mean = X.colwise().mean();
    const Matrix centered = X.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / B;
    const Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
    const Matrix xhat = centered.array().rowwise() * inv_std.array();
    if (batch_mean) *batch_mean = mean;
    if (batch_var) *batch_var = var;
    Matrix y = (xhat.array().rowwise() * value(gamma).row(0).array()).rowwise() + value(beta).row(0).array();
    const Id out = push(std::move(y), needs(x) || needs(gamma) || needs(beta));
    nodes_[out].back = [this, x, gamma, beta, xhat, inv_std, B, out] {
        const Matrix& g = nodes_[out].grad;
        if (needs(beta)) accumulate(beta, g.colwise().sum());
        if (needs(gamma)) accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        if (needs(x)) {
            const Matrix dxhat = g.array().rowwise() * value(gamma).row(0).array();
            const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
            const Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
            Matrix dx = (B * dxhat).rowwise() - sum_d;
            dx -= (xhat.array().rowwise() * sum_dx.array()).matrix();
            dx = (dx.array().rowwise() * (inv_std.array() / B)).matrix();
            accumulate(x, dx);
        }
    };
    return out;
}

Graph::Id Graph::batch_norm_fixed(Id x, Id gamma, Id beta, const Eigen::RowVectorXd& mean,
                                  const Eigen::RowVectorXd& var, double eps) {
    const auto& X = value(x);
    if (mean.size() != X.cols() || var.size() != X.cols()) throw UsageError("batch_norm_fixed: stats mismatch");
    const Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
    const Matrix xhat = (X.rowwise() - mean).array().rowwise() * inv_std.array();
    Matrix y = (xhat.array().rowwise() * value(gamma).row(0).array()).rowwise() + value(beta).row(0).array();
    const Id out = push(std::move(y), needs(x) || needs(gamma) || needs(beta));
    nodes_[out].back = [this, x, gamma, beta, xhat, inv_std, out] {
        const Matrix& g = nodes_[out].grad;
        if (needs(beta)) accumulate(beta, g.colwise().sum());
        if (needs(gamma)) accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        if (needs(x)) {
            accumulate(x, (g.array().rowwise() * (value(gamma).row(0).array() * inv_std.array())).matrix());
        }
    };
    return out;
}

std::vector<Matrix> attention_weights(const std::vector<Matrix>& scores, const Matrix& mask) {
    const auto T = static_cast<Eigen::Index>(scores.size());
    if (T == 0) throw UsageError("attention over an empty sequence");
    if (mask.cols() != T || mask.rows() != scores[0].rows()) throw UsageError("attention mask shape mismatch");
    const auto B = scores[0].rows();
    const auto D = scores[0].cols();
    std::vector<Matrix> alpha(scores.size(), Matrix::Zero(B, D));
    for (Eigen::Index b = 0; b < B; ++b) {
        bool any = false;
        for (Eigen::Index t = 0; t < T; ++t) any = any || mask(b, t) != 0.0;
        if (!any) throw UsageError("attention row with every step masked");
        for (Eigen::Index j = 0; j < D; ++j) {
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index t = 0; t < T; ++t) {
                if (mask(b, t) != 0.0) mx = std::max(mx, scores[static_cast<std::size_t>(t)](b, j));
            }
            double z = 0.0;
            for (Eigen::Index t = 0; t < T; ++t) {
                if (mask(b, t) == 0.0) continue;
                const double e = std::exp(scores[static_cast<std::size_t>(t)](b, j) - mx);
                alpha[static_cast<std::size_t>(t)](b, j) = e;
                z += e;
            }
            for (Eigen::Index t = 0; t < T; ++t) alpha[static_cast<std::size_t>(t)](b, j) /= z;
        }
    }
    return alpha;
}

Graph::Id Graph::attention_pool(const std::vector<Id>& scores, const std::vector<Id>& values, const Matrix& mask) {
    if (scores.size() != values.size() || scores.empty()) throw UsageError("attention_pool: step count mismatch");
    std::vector<Matrix> s;
    s.reserve(scores.size());
    bool ng = false;
    for (std::size_t t = 0; t < scores.size(); ++t) {
        check_same(value(scores[t]), value(values[t]), "attention_pool");
        s.push_back(value(scores[t]));
        ng = ng || needs(scores[t]) || needs(values[t]);
    }
    auto alpha = attention_weights(s, mask);
    Matrix v = Matrix::Zero(s[0].rows(), s[0].cols());
    for (std::size_t t = 0; t < s.size(); ++t) v += alpha[t].cwiseProduct(value(values[t]));
    const Id out = push(std::move(v), ng);
    nodes_[out].back = [this, scores, values, alpha = std::move(alpha), out] {
        const Matrix& g = nodes_[out].grad;
        // d alpha_t = g * x_t ; d m_t = alpha_t * (d alpha_t - sum_s alpha_s d alpha_s)
        std::vector<Matrix> dalpha(scores.size());
        Matrix weighted = Matrix::Zero(g.rows(), g.cols());
        for (std::size_t t = 0; t < scores.size(); ++t) {
            dalpha[t] = g.cwiseProduct(value(values[t]));
            weighted += alpha[t].cwiseProduct(dalpha[t]);
        }
        for (std::size_t t = 0; t < scores.size(); ++t) {
            if (needs(scores[t])) accumulate(scores[t], alpha[t].cwiseProduct(dalpha[t] - weighted));
            if (needs(values[t])) accumulate(values[t], g.cwiseProduct(alpha[t]));
        }
    };
    return out;
}

Graph::Id Graph::bce_with_logits(Id logits, const Matrix& targets) {
    const auto& Z = value(logits);
    check_same(Z, targets, "bce_with_logits");
    const double n = static_cast<double>(Z.size());
    double loss = 0.0;
    for (Eigen::Index c = 0; c < Z.cols(); ++c) {
        for (Eigen::Index r = 0; r < Z.rows(); ++r) {
            const double z = Z(r, c);
            loss += std::max(z, 0.0) - z * targets(r, c) + std::log1p(std::exp(-std::abs(z)));
        }
    }
    Matrix v(1, 1);
    v(0, 0) = loss / n;
    const Id out = push(std::move(v), needs(logits));
    nodes_[out].back = [this, logits, targets, n, out] {
        const double g = nodes_[out].grad(0, 0);
        const Matrix p = value(logits).unaryExpr([](double z) {
            return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        });
        accumulate(logits, (p - targets) * (g / n));
    };
    return out;
}

void Graph::backward(Id scalar) {
    if (value(scalar).size() != 1) throw UsageError("backward needs a scalar node");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[scalar].grad = Matrix::Ones(1, 1);
    for (std::size_t i = scalar + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (n.back && n.needs_grad && n.grad.size() != 0) n.back();
    }
}

}  // namespace psycontour::nn
