#include "psycontour/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "psycontour/error.hpp"

namespace psycontour::nn {

std::string encoder_name(EncoderKind k) { return k == EncoderKind::BLSTM ? "BLSTM" : "ATTN"; }

EncoderKind parse_encoder(const std::string& s) {
    if (s == "BLSTM" || s == "blstm") return EncoderKind::BLSTM;
    if (s == "ATTN" || s == "attn") return EncoderKind::ATTN;
    throw UsageError("unknown encoder '" + s + "' (expected BLSTM or ATTN)");
}

std::string fusion_name(Fusion f) { return f == Fusion::None ? "none" : "concat-embedding"; }

Fusion parse_fusion(const std::string& s) {
    if (s == "none") return Fusion::None;
    if (s == "concat-embedding" || s == "concat") return Fusion::ConcatEmbedding;
    throw UsageError("unknown fusion '" + s + "' (expected none or concat-embedding)");
}

std::string embedding_mode_name(EmbeddingMode m) { return m == EmbeddingMode::FeatureBased ? "FB" : "FT"; }

EmbeddingMode parse_embedding_mode(const std::string& s) {
    if (s == "FB" || s == "fb") return EmbeddingMode::FeatureBased;
    if (s == "FT" || s == "ft") return EmbeddingMode::Adapter;
    throw UsageError("unknown embedding mode '" + s + "' (expected FB or FT)");
}

void ModelConfig::validate() const {
    if (layers < 1) throw UsageError("model layers must be >= 1");
    if (hidden < 1) throw UsageError("model hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
    if (classifier_layers < 1) throw UsageError("classifier_layers must be >= 1");
    if (classifier_layers > 1 && classifier_hidden < 1) throw UsageError("classifier_hidden must be >= 1");
    if (max_sentences < 1) throw UsageError("max_sentences must be >= 1");
    if (input_dim < 1) throw UsageError("model input dimension must be >= 1");
    if (outputs < 1) throw UsageError("model needs at least one output");
    if (fusion == Fusion::ConcatEmbedding && embedding_dim < 1) {
        throw UsageError("embedding fusion needs an embedding dimension");
    }
}

nlohmann::json ModelConfig::to_json() const {
    return {{"encoder", encoder_name(encoder)},
            {"layers", layers},
            {"hidden", hidden},
            {"dropout", dropout},
            {"classifier_layers", classifier_layers},
            {"classifier_hidden", classifier_hidden},
            {"fusion", fusion_name(fusion)},
            {"embedding_mode", embedding_mode_name(embedding_mode)},
            {"max_sentences", max_sentences},
            {"seed", seed},
            {"input_dim", input_dim},
            {"embedding_dim", embedding_dim},
            {"outputs", outputs}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.encoder = parse_encoder(j.at("encoder").get<std::string>());
    c.layers = j.at("layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.classifier_layers = j.at("classifier_layers").get<int>();
    c.classifier_hidden = j.at("classifier_hidden").get<int>();
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    c.embedding_mode = parse_embedding_mode(j.at("embedding_mode").get<std::string>());
    c.max_sentences = j.at("max_sentences").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.input_dim = j.at("input_dim").get<int>();
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.outputs = j.at("outputs").get<int>();
    c.validate();
    return c;
}

std::size_t ModelParams::add(std::string name, Matrix value, bool trainable, ParamGroup group) {
    if (by_name_.count(name)) throw UsageError("duplicate tensor name " + name);
    by_name_[name] = tensors_.size();
    tensors_.push_back(Tensor{std::move(name), std::move(value), trainable, group});
    return tensors_.size() - 1;
}

std::size_t ModelParams::index(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw UsageError("unknown tensor " + name);
    return it->second;
}

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
}

void ModelParams::check_finite() const {
    for (const auto& t : tensors_) {
        if (!t.value.allFinite()) throw NumericError("non-finite values in tensor " + t.name);
    }
}

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
    }
    return m;
}

std::string lstm_prefix(int layer, bool backward) {
    return "lstm.l" + std::to_string(layer) + (backward ? ".bw" : ".fw");
}

std::string clf_prefix(int k) { return "clf." + std::to_string(k); }

}  // namespace

ContourModel::ContourModel(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    Rng rng(derive_seed(config_.seed, {0x6d6f64656cULL}));
    const int H = config_.hidden;
    const double bh = 1.0 / std::sqrt(static_cast<double>(H));
    for (int l = 0; l < config_.layers; ++l) {
        const int in = l == 0 ? config_.input_dim : 2 * H;
        for (bool bw : {false, true}) {
            const auto p = lstm_prefix(l, bw);
            params_.add(p + ".w_ih", uniform(4 * H, in, 1.0 / std::sqrt(static_cast<double>(in)), rng));
            params_.add(p + ".w_hh", uniform(4 * H, H, bh, rng));
            Matrix bias = uniform(1, 4 * H, bh, rng);
            bias.middleCols(H, H).setConstant(1.0);  // gate order i, f, g, o
            params_.add(p + ".bias", std::move(bias));
        }
    }
    if (config_.encoder == EncoderKind::ATTN) {
        const int D = config_.input_dim;
        const double ba = 1.0 / std::sqrt(static_cast<double>(2 * H));
        const double bp = 1.0 / std::sqrt(static_cast<double>(D));
        params_.add("attn.w", uniform(D, 2 * H, ba, rng));
        params_.add("attn.b", uniform(1, D, ba, rng));
        params_.add("pool.w", uniform(D, D, bp, rng));
        params_.add("pool.b", uniform(1, D, bp, rng));
    }
    if (config_.fusion == Fusion::ConcatEmbedding && config_.embedding_mode == EmbeddingMode::Adapter) {
        const int E = config_.embedding_dim;
        params_.add("adapter.w", Matrix::Identity(E, E), true, ParamGroup::Embedding);
        params_.add("adapter.b", Matrix::Zero(1, E), true, ParamGroup::Embedding);
    }
    int in = config_.classifier_input_dim();
    for (int k = 0; k + 1 < config_.classifier_layers; ++k) {
        const int out = config_.classifier_hidden;
        const double b = 1.0 / std::sqrt(static_cast<double>(in));
        const auto p = clf_prefix(k);
        params_.add(p + ".w", uniform(out, in, b, rng));
        params_.add(p + ".b", uniform(1, out, b, rng));
        params_.add(p + ".bn_gamma", Matrix::Ones(1, out));
        params_.add(p + ".bn_beta", Matrix::Zero(1, out));
        params_.add(p + ".prelu", Matrix::Constant(1, out, 0.25));
        bn_mean_.push_back(params_.add(p + ".bn_mean", Matrix::Zero(1, out), false));
        bn_var_.push_back(params_.add(p + ".bn_var", Matrix::Ones(1, out), false));
        in = out;
    }
    const double b = 1.0 / std::sqrt(static_cast<double>(in));
    params_.add("clf.out.w", uniform(config_.outputs, in, b, rng));
    params_.add("clf.out.b", uniform(1, config_.outputs, b, rng));
}

std::vector<Graph::Id> ContourModel::bind(Graph& g) const {
    std::vector<Graph::Id> ids;
    ids.reserve(params_.size());
    for (const auto& t : params_.tensors()) ids.push_back(t.trainable ? g.param(t.value) : g.input(t.value));
    return ids;
}

ContourModel::Forward ContourModel::forward(Graph& g, const std::vector<Graph::Id>& bound,
                                            const std::vector<ModelInput>& batch, bool train, Rng* rng) const {
    if (batch.empty()) throw UsageError("forward on an empty batch");
    if (bound.size() != params_.size()) throw UsageError("forward with unbound parameters");
    if (train && config_.dropout > 0.0 && rng == nullptr) throw UsageError("training forward needs an rng");
    const auto B = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index D = config_.input_dim;
    const Eigen::Index H = config_.hidden;
    auto P = [&](const std::string& name) { return bound[params_.index(name)]; };

    std::vector<Eigen::Index> len(batch.size());
    Eigen::Index T = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto* x = batch[b].contour;
        if (x == nullptr || x->rows() == 0) throw DataError("cannot encode a document with no sentences");
        if (x->cols() != D) {
            throw UsageError("contour has " + std::to_string(x->cols()) + " features, model expects " +
                             std::to_string(D));
        }
        len[b] = std::min<Eigen::Index>(x->rows(), config_.max_sentences);
        T = std::max(T, len[b]);
    }

    Matrix mask = Matrix::Zero(B, T);
    std::vector<Eigen::VectorXd> mask_col(static_cast<std::size_t>(T));
    std::vector<Graph::Id> xs(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
        Matrix xt = Matrix::Zero(B, D);
        for (Eigen::Index b = 0; b < B; ++b) {
            if (t < len[static_cast<std::size_t>(b)]) {
                xt.row(b) = batch[static_cast<std::size_t>(b)].contour->row(t);
                mask(b, t) = 1.0;
            }
        }
        mask_col[static_cast<std::size_t>(t)] = mask.col(t);
        xs[static_cast<std::size_t>(t)] = g.input(std::move(xt));
    }

    auto run = [&](const std::string& prefix, const std::vector<Graph::Id>& in, bool reverse) {
        const auto w_ih = P(prefix + ".w_ih");
        const auto w_hh = P(prefix + ".w_hh");
        const auto bias = P(prefix + ".bias");
        auto h = g.input(Matrix::Zero(B, H));
        auto c = g.input(Matrix::Zero(B, H));
        std::vector<Graph::Id> out(in.size());
        for (std::size_t s = 0; s < in.size(); ++s) {
            const std::size_t t = reverse ? in.size() - 1 - s : s;
            const auto z = g.add(g.linear(in[t], w_ih, bias), g.matmul_t(h, w_hh));
            const auto i = g.sigmoid(g.cols(z, 0, H));
            const auto f = g.sigmoid(g.cols(z, H, H));
            const auto cand = g.tanh(g.cols(z, 2 * H, H));
            const auto o = g.sigmoid(g.cols(z, 3 * H, H));
            const auto c_new = g.add(g.mul(f, c), g.mul(i, cand));
            const auto h_new = g.mul(o, g.tanh(c_new));
            c = g.blend(c_new, c, mask_col[t]);
            h = g.blend(h_new, h, mask_col[t]);
            out[t] = h;
        }
        return out;
    };

    std::vector<Graph::Id> in = xs;
    std::vector<Graph::Id> fw, bw;
    for (int l = 0; l < config_.layers; ++l) {
        fw = run(lstm_prefix(l, false), in, false);
        bw = run(lstm_prefix(l, true), in, true);
        if (l + 1 < config_.layers) {
            for (std::size_t t = 0; t < in.size(); ++t) {
                auto h = g.concat_cols({fw[t], bw[t]});
                if (train) h = g.dropout(h, config_.dropout, *rng);
                in[t] = h;
            }
        }
    }

    Forward result{};
    if (config_.encoder == EncoderKind::BLSTM) {
        result.encoded = g.concat_cols({fw.back(), bw.front()});
    } else {
        std::vector<Graph::Id> scores(xs.size());
        const auto wa = P("attn.w");
        const auto ba = P("attn.b");
        for (std::size_t t = 0; t < xs.size(); ++t) {
            scores[t] = g.tanh(g.linear(g.concat_cols({fw[t], bw[t]}), wa, ba));
        }
        const auto v = g.attention_pool(scores, xs, mask);
        result.encoded = g.tanh(g.linear(v, P("pool.w"), P("pool.b")));
    }

    auto x = result.encoded;
    if (config_.fusion == Fusion::ConcatEmbedding) {
        const Eigen::Index E = config_.embedding_dim;
        Matrix emb(B, E);
        for (Eigen::Index b = 0; b < B; ++b) {
            const auto* e = batch[static_cast<std::size_t>(b)].embedding;
            if (e == nullptr) throw DataError("embedding fusion requires an embedding for every document");
            if (e->size() != E) throw DataError("embedding dimension does not match the model");
            emb.row(b) = e->transpose();
        }
        auto eid = g.input(std::move(emb));
        if (config_.embedding_mode == EmbeddingMode::Adapter) eid = g.linear(eid, P("adapter.w"), P("adapter.b"));
        x = g.concat_cols({x, eid});
    }

    for (int k = 0; k + 1 < config_.classifier_layers; ++k) {
        const auto p = clf_prefix(k);
        x = g.linear(x, P(p + ".w"), P(p + ".b"));
        if (train) {
            Eigen::RowVectorXd m, v;
            x = g.batch_norm(x, P(p + ".bn_gamma"), P(p + ".bn_beta"), 1e-5, &m, &v);
            result.bn_stats.emplace_back(std::move(m), std::move(v));
        } else {
            x = g.batch_norm_fixed(x, P(p + ".bn_gamma"), P(p + ".bn_beta"), params_.at(p + ".bn_mean").row(0),
                                   params_.at(p + ".bn_var").row(0), 1e-5);
        }
        x = g.prelu(x, P(p + ".prelu"));
        if (train) x = g.dropout(x, config_.dropout, *rng);
    }
    result.logits = g.linear(x, P("clf.out.w"), P("clf.out.b"));
    return result;
}

void ContourModel::update_running_stats(const Forward& f, std::size_t batch_size, double momentum) {
    if (f.bn_stats.size() != bn_mean_.size()) throw UsageError("batch-norm statistics do not match the model");
    const double n = static_cast<double>(batch_size);
    const double unbias = batch_size > 1 ? n / (n - 1.0) : 1.0;
    for (std::size_t k = 0; k < bn_mean_.size(); ++k) {
        auto& m = params_[bn_mean_[k]].value;
        auto& v = params_[bn_var_[k]].value;
        m = (1.0 - momentum) * m + momentum * Matrix(f.bn_stats[k].first);
        v = (1.0 - momentum) * v + momentum * unbias * Matrix(f.bn_stats[k].second);
    }
}

Eigen::MatrixXd ContourModel::predict(const std::vector<ModelInput>& batch) const {
    Graph g;
    const auto bound = bind(g);
    const auto f = forward(g, bound, batch, false, nullptr);
    Eigen::MatrixXd p = g.value(f.logits).unaryExpr([](double z) {
        return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    });
    if (!p.allFinite()) throw NumericError("non-finite model output");
    return p;
}

Eigen::VectorXd ContourModel::encode(const Eigen::MatrixXd& contour) const {
    Graph g;
    const auto bound = bind(g);
    const auto f = forward(g, bound, {ModelInput{&contour, nullptr}}, false, nullptr);
    return g.value(f.encoded).row(0).transpose();
}

nlohmann::json ContourModel::to_json() const {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : params_.tensors()) {
        std::vector<double> data(static_cast<std::size_t>(t.value.size()));
        for (Eigen::Index r = 0, k = 0; r < t.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) data[static_cast<std::size_t>(k++)] = t.value(r, c);
        }
        tensors.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"data", data}});
    }
    return {{"config", config_.to_json()}, {"tensors", tensors}};
}

ContourModel ContourModel::from_json(const nlohmann::json& j) {
    ContourModel m(ModelConfig::from_json(j.at("config")));
    const auto& tensors = j.at("tensors");
    if (tensors.size() != m.params_.size()) throw DataError("checkpoint tensor count does not match its config");
    for (const auto& t : tensors) {
        const auto name = t.at("name").get<std::string>();
        if (!m.params_.contains(name)) throw DataError("checkpoint has unexpected tensor " + name);
        auto& dst = m.params_.at(name);
        const auto rows = t.at("rows").get<Eigen::Index>();
        const auto cols = t.at("cols").get<Eigen::Index>();
        const auto& data = t.at("data");
        if (rows != dst.rows() || cols != dst.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
            throw DataError("checkpoint tensor " + name + " has the wrong shape");
        }
        for (Eigen::Index r = 0, k = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) dst(r, c) = data[static_cast<std::size_t>(k++)].get<double>();
        }
    }
    m.params_.check_finite();
    return m;
}

}  // namespace psycontour::nn
