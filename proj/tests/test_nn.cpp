#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "psycontour/error.hpp"
#include "psycontour/nn/adamw.hpp"
#include "psycontour/nn/graph.hpp"
#include "psycontour/nn/model.hpp"
#include "psycontour/nn/train.hpp"
#include "psycontour/pipeline.hpp"
#include "nn_support.hpp"
#include "support.hpp"

using namespace psycontour;
using namespace psycontour::nn;

namespace {

ModelConfig tiny(EncoderKind enc, int input_dim = 5) {
    ModelConfig c;
    c.encoder = enc;
    c.layers = 1;
    c.hidden = 4;
    c.dropout = 0.0;
    c.classifier_layers = 2;
    c.classifier_hidden = 6;
    c.input_dim = input_dim;
    c.seed = 3;
    return c;
}

// Gradient of a scalar built from one op, compared with central differences on its inputs.
double op_gradient_error(const std::vector<Matrix>& inputs,
                         const std::function<Graph::Id(Graph&, const std::vector<Graph::Id>&)>& op) {
    Rng rng(17);
    Matrix projection;
    auto loss_of = [&](const std::vector<Matrix>& xs, Graph& g, std::vector<Graph::Id>& ids) {
        ids.clear();
        for (const auto& x : xs) ids.push_back(g.param(x));
        const auto out = op(g, ids);
        if (projection.size() == 0) projection = testing::random_matrix(1, g.value(out).cols(), rng);
        const auto z = g.matmul_t(out, g.input(projection));
        return g.bce_with_logits(z, Matrix::Constant(g.value(z).rows(), 1, 1.0));
    };
    Graph g;
    std::vector<Graph::Id> ids;
    const auto loss = loss_of(inputs, g, ids);
    g.backward(loss);
    double worst = 0.0;
    auto xs = inputs;
    const double h = 1e-6;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const Matrix analytic = g.grad(ids[k]);
        for (Eigen::Index i = 0; i < xs[k].size(); ++i) {
            const double saved = xs[k](i);
            xs[k](i) = saved + h;
            Graph gu;
            std::vector<Graph::Id> iu;
            const double up = gu.value(loss_of(xs, gu, iu))(0, 0);
            xs[k](i) = saved - h;
            Graph gd;
            std::vector<Graph::Id> id;
            const double down = gd.value(loss_of(xs, gd, id))(0, 0);
            xs[k](i) = saved;
            const double numeric = (up - down) / (2 * h);
            const double a = analytic(i);
            worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
        }
    }
    return worst;
}

std::vector<ModelInput> inputs_of(const std::vector<Eigen::MatrixXd>& xs) {
    std::vector<ModelInput> out;
    for (const auto& x : xs) out.push_back({&x, nullptr});
    return out;
}

}  // namespace

TEST_CASE("graph op gradients match central differences") {
    Rng rng(2);
    const auto A = testing::random_matrix(3, 4, rng);
    const auto B = testing::random_matrix(3, 4, rng);
    const auto W = testing::random_matrix(2, 4, rng);
    const auto b = testing::random_matrix(1, 2, rng);
    const auto row = testing::random_matrix(1, 4, rng);
    const auto slope = testing::random_matrix(1, 4, rng, 0.3);
    Eigen::VectorXd mask(3);
    mask << 1, 0, 1;
    const double tol = 1e-5;
    CHECK(op_gradient_error({A, W, b}, [](Graph& g, auto& x) { return g.linear(x[0], x[1], x[2]); }) < tol);
    CHECK(op_gradient_error({A, W}, [](Graph& g, auto& x) { return g.matmul_t(x[0], x[1]); }) < tol);
    CHECK(op_gradient_error({A, B}, [](Graph& g, auto& x) { return g.add(x[0], x[1]); }) < tol);
    CHECK(op_gradient_error({A, row}, [](Graph& g, auto& x) { return g.add_row(x[0], x[1]); }) < tol);
    CHECK(op_gradient_error({A, B}, [](Graph& g, auto& x) { return g.mul(x[0], x[1]); }) < tol);
    CHECK(op_gradient_error({A}, [](Graph& g, auto& x) { return g.sigmoid(x[0]); }) < tol);
    CHECK(op_gradient_error({A}, [](Graph& g, auto& x) { return g.tanh(x[0]); }) < tol);
    CHECK(op_gradient_error({A, slope}, [](Graph& g, auto& x) { return g.prelu(x[0], x[1]); }) < tol);
    CHECK(op_gradient_error({A}, [](Graph& g, auto& x) { return g.cols(x[0], 1, 2); }) < tol);
    CHECK(op_gradient_error({A, B}, [](Graph& g, auto& x) { return g.concat_cols({x[0], x[1]}); }) < tol);
    CHECK(op_gradient_error({A, B}, [&](Graph& g, auto& x) { return g.blend(x[0], x[1], mask); }) < tol);
    CHECK(op_gradient_error({A, row, slope}, [](Graph& g, auto& x) { return g.batch_norm(x[0], x[1], x[2], 1e-5); }) <
          1e-4);
    const Eigen::RowVectorXd m = testing::random_matrix(1, 4, rng), v = testing::random_matrix(1, 4, rng).cwiseAbs();
    CHECK(op_gradient_error({A, row, slope},
                            [&](Graph& g, auto& x) { return g.batch_norm_fixed(x[0], x[1], x[2], m, v, 1e-5); }) < tol);
    Matrix amask(3, 2);
    amask << 1, 1, 1, 0, 1, 1;
    const auto S0 = testing::random_matrix(3, 4, rng), S1 = testing::random_matrix(3, 4, rng);
    CHECK(op_gradient_error({S0, S1, A, B},
                            [&](Graph& g, auto& x) { return g.attention_pool({x[0], x[1]}, {x[2], x[3]}, amask); }) <
          tol);
}

TEST_CASE("attention with one step returns the input") {
    Rng rng(4);
    Matrix x = testing::random_matrix(1, 4, rng);
    Matrix s = testing::random_matrix(1, 4, rng);
    const auto alpha = attention_weights({s}, Matrix::Ones(1, 1));
    CHECK(alpha[0].isOnes(0.0));
    Graph g;
    const auto v = g.attention_pool({g.input(s)}, {g.input(x)}, Matrix::Ones(1, 1));
    CHECK(g.value(v).isApprox(x, 1e-15));
}

TEST_CASE("uniform scores give uniform weights") {
    std::vector<Matrix> scores(4, Matrix::Constant(2, 3, 0.7));
    for (const auto& a : attention_weights(scores, Matrix::Ones(2, 4))) {
        CHECK(a.isApprox(Matrix::Constant(2, 3, 0.25), 1e-15));
    }
}

TEST_CASE("attention pooling matches a scalar loop") {
    Rng rng(8);
    const Eigen::Index n = 3, d = 4;
    std::vector<Matrix> scores, values;
    for (Eigen::Index i = 0; i < n; ++i) {
        scores.push_back(testing::random_matrix(1, d, rng));
        values.push_back(testing::random_matrix(1, d, rng));
    }
    Graph g;
    std::vector<Graph::Id> si, vi;
    for (Eigen::Index i = 0; i < n; ++i) {
        si.push_back(g.input(scores[static_cast<std::size_t>(i)]));
        vi.push_back(g.input(values[static_cast<std::size_t>(i)]));
    }
    const auto v = g.value(g.attention_pool(si, vi, Matrix::Ones(1, n)));
    for (Eigen::Index j = 0; j < d; ++j) {
        double z = 0.0, acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) z += std::exp(scores[static_cast<std::size_t>(i)](0, j));
        for (Eigen::Index i = 0; i < n; ++i) {
            acc += std::exp(scores[static_cast<std::size_t>(i)](0, j)) / z * values[static_cast<std::size_t>(i)](0, j);
        }
        CHECK(v(0, j) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("masked attention columns sum to one and ignore padding") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.below(6));
        std::vector<Matrix> scores;
        for (Eigen::Index t = 0; t < T; ++t) scores.push_back(testing::random_matrix(3, 5, rng, 5.0));
        Matrix mask = Matrix::Ones(3, T);
        for (Eigen::Index b = 0; b < 3; ++b) {
            const auto keep = 1 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(T)));
            for (Eigen::Index t = keep; t < T; ++t) mask(b, t) = 0.0;
        }
        const auto alpha = attention_weights(scores, mask);
        Matrix sum = Matrix::Zero(3, 5);
        for (Eigen::Index t = 0; t < T; ++t) {
            sum += alpha[static_cast<std::size_t>(t)];
            for (Eigen::Index b = 0; b < 3; ++b) {
                if (mask(b, t) == 0.0) CHECK(alpha[static_cast<std::size_t>(t)].row(b).isZero(0.0));
            }
        }
        CHECK((sum.array() - 1.0).abs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(attention_weights({}, Matrix::Ones(1, 0)), UsageError);
    CHECK_THROWS_AS(attention_weights({Matrix::Zero(1, 2)}, Matrix::Zero(1, 1)), UsageError);
}

TEST_CASE("PReLU, sigmoid and cross-entropy values") {
    Graph g;
    const auto y = g.prelu(g.input(Matrix::Constant(1, 1, -2.0)), g.input(Matrix::Constant(1, 1, 0.25)));
    CHECK(g.value(y)(0, 0) == doctest::Approx(-0.5));
    CHECK(g.value(g.sigmoid(g.input(Matrix::Zero(1, 1))))(0, 0) == 0.5);
    CHECK(g.value(g.bce_with_logits(g.input(Matrix::Zero(1, 1)), Matrix::Ones(1, 1)))(0, 0) ==
          doctest::Approx(std::log(2.0)));
    CHECK(g.value(g.bce_with_logits(g.input(Matrix::Constant(1, 1, 40.0)), Matrix::Ones(1, 1)))(0, 0) < 1e-15);
    CHECK(std::isfinite(g.value(g.bce_with_logits(g.input(Matrix::Constant(1, 1, -800.0)), Matrix::Ones(1, 1)))(0, 0)));
}

TEST_CASE("zero logits give probability one half") {
    ContourModel model(tiny(EncoderKind::ATTN));
    model.params().at("clf.out.w").setZero();
    model.params().at("clf.out.b").setZero();
    Rng rng(1);
    const Eigen::MatrixXd x = testing::random_matrix(3, 5, rng);
    CHECK(model.predict(inputs_of({x}))(0, 0) == 0.5);
}

TEST_CASE("AdamW update rules") {
    AdamW opt({0.9, 0.999, 1e-8, 0.0});
    Matrix w = Matrix::Ones(1, 1);
    opt.step({&w}, {Matrix::Ones(1, 1)}, {0.1});
    CHECK(w(0, 0) == doctest::Approx(0.9).epsilon(1e-6));

    AdamW still({0.9, 0.999, 1e-8, 0.0});
    Matrix u = testing::random_matrix(2, 3, *std::make_unique<Rng>(3));
    const Matrix before = u;
    for (int i = 0; i < 3; ++i) still.step({&u}, {Matrix::Zero(2, 3)}, {0.1});
    CHECK(u == before);

    AdamW decay({0.9, 0.999, 1e-8, 0.01});
    Matrix d = Matrix::Constant(1, 1, 2.0);
    decay.step({&d}, {Matrix::Zero(1, 1)}, {0.1});
    CHECK(d(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
    CHECK(decay.steps() == 1);
    CHECK_THROWS(decay.step({&d}, {Matrix::Zero(2, 2)}, {0.1}));
}

TEST_CASE("BLSTM with zero parameters encodes to zero") {
    ContourModel model(tiny(EncoderKind::BLSTM));
    for (auto& t : model.params().tensors()) t.value.setZero();
    const auto p = model.encode(Eigen::MatrixXd::Zero(4, 5));
    CHECK(p.size() == 8);
    CHECK(p.isZero(0.0));
    CHECK(model.encode(Eigen::MatrixXd::Ones(1, 5)).isZero(0.0));
}

TEST_CASE("BLSTM direction symmetry") {
    ContourModel a(tiny(EncoderKind::BLSTM));
    ContourModel b = a;
    for (const auto* part : {".w_ih", ".w_hh", ".bias"}) {
        b.params().at(std::string("lstm.l0.fw") + part) = a.params().at(std::string("lstm.l0.bw") + part);
        b.params().at(std::string("lstm.l0.bw") + part) = a.params().at(std::string("lstm.l0.fw") + part);
    }
    Rng rng(6);
    const Eigen::MatrixXd x = testing::random_matrix(5, 5, rng);
    const Eigen::MatrixXd rev = x.colwise().reverse();
    const auto p = a.encode(x);
    const auto q = b.encode(rev);
    CHECK(p.head(4).isApprox(q.tail(4), 1e-14));
    CHECK(p.tail(4).isApprox(q.head(4), 1e-14));
}

TEST_CASE("padding and batch composition do not change eval outputs") {
    for (auto enc : {EncoderKind::BLSTM, EncoderKind::ATTN}) {
        auto cfg = tiny(enc);
        cfg.layers = 2;
        ContourModel model(cfg);
        Rng rng(7);
        for (auto& t : model.params().tensors()) {
            if (t.name.find("bn_") != std::string::npos) continue;
            t.value = testing::random_matrix(t.value.rows(), t.value.cols(), rng, 0.4);
        }
        const std::vector<Eigen::MatrixXd> xs = {testing::random_matrix(2, 5, rng), testing::random_matrix(7, 5, rng),
                                                 testing::random_matrix(4, 5, rng)};
        const auto batched = model.predict(inputs_of(xs));
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto single = model.predict(inputs_of({xs[i]}));
            CHECK(single(0, 0) == doctest::Approx(batched(static_cast<Eigen::Index>(i), 0)).epsilon(1e-13));
            Graph g;
            const auto bound = model.bind(g);
            const auto f = model.forward(g, bound, inputs_of(xs), false, nullptr);
            CHECK(g.value(f.encoded).row(static_cast<Eigen::Index>(i)).transpose().isApprox(model.encode(xs[i]), 1e-13));
        }
    }
}

TEST_CASE("contours longer than max_sentences are truncated") {
    auto cfg = tiny(EncoderKind::ATTN);
    cfg.max_sentences = 3;
    ContourModel model(cfg);
    Rng rng(9);
    const Eigen::MatrixXd x = testing::random_matrix(6, 5, rng);
    const Eigen::MatrixXd head = x.topRows(3);
    CHECK(model.encode(x) == model.encode(head));
    CHECK_THROWS_AS(model.encode(Eigen::MatrixXd(0, 5)), DataError);
    CHECK_THROWS_AS(model.encode(Eigen::MatrixXd::Zero(2, 4)), UsageError);
}

TEST_CASE("inverted dropout matches eval mode in expectation") {
    Rng rng(10);
    {
        Graph g;
        const Matrix x = testing::random_matrix(1, 6, rng);
        const auto id = g.input(x);
        Matrix mean = Matrix::Zero(1, 6);
        const int n = 20000;
        for (int i = 0; i < n; ++i) mean += g.value(g.dropout(id, 0.3, rng));
        mean /= n;
        CHECK((mean - x).cwiseAbs().maxCoeff() < 0.05);
    }
    auto cfg = tiny(EncoderKind::ATTN);
    cfg.dropout = 0.4;
    ContourModel model(cfg);
    const std::vector<Eigen::MatrixXd> xs = {testing::random_matrix(3, 5, rng), testing::random_matrix(4, 5, rng),
                                             testing::random_matrix(2, 5, rng), testing::random_matrix(5, 5, rng)};
    const auto batch = inputs_of(xs);
    {
        Graph g;
        const auto f = model.forward(g, model.bind(g), batch, true, &rng);
        model.params().at("clf.0.bn_mean") = f.bn_stats[0].first;
        model.params().at("clf.0.bn_var") = f.bn_stats[0].second;
    }
    Graph ge;
    const Matrix eval = ge.value(model.forward(ge, model.bind(ge), batch, false, nullptr).logits);
    const int n = 4000;
    Matrix sum = Matrix::Zero(eval.rows(), 1), sq = Matrix::Zero(eval.rows(), 1);
    for (int i = 0; i < n; ++i) {
        Graph g;
        const Matrix z = g.value(model.forward(g, model.bind(g), batch, true, &rng).logits);
        sum += z;
        sq += z.cwiseProduct(z);
    }
    const Matrix mean = sum / n;
    for (Eigen::Index r = 0; r < eval.rows(); ++r) {
        const double sd = std::sqrt(std::max(sq(r, 0) / n - mean(r, 0) * mean(r, 0), 0.0));
        CHECK(std::abs(mean(r, 0) - eval(r, 0)) <= 5.0 * sd / std::sqrt(double(n)) + 1e-12);
    }
}

TEST_CASE("model gradients match finite differences for every tensor") {
    for (auto enc : {EncoderKind::BLSTM, EncoderKind::ATTN}) {
        auto cfg = tiny(enc, 4);
        cfg.layers = 2;
        cfg.hidden = 3;
        cfg.classifier_hidden = 5;
        cfg.outputs = 2;
        ContourModel model(cfg);
        Rng rng(12);
        const std::vector<Eigen::MatrixXd> xs = {testing::random_matrix(3, 4, rng), testing::random_matrix(2, 4, rng),
                                                 testing::random_matrix(4, 4, rng), testing::random_matrix(1, 4, rng)};
        Matrix y(4, 2);
        y << 1, 0, 0, 1, 1, 1, 0, 0;
        const auto r = testing::gradient_check(model, inputs_of(xs), y);
        CAPTURE(r.worst);
        CHECK(r.max_relative_error < 1e-3);
        CHECK(r.checked > 100);
    }
}

TEST_CASE("model JSON round trip preserves predictions") {
    auto cfg = tiny(EncoderKind::ATTN);
    cfg.fusion = Fusion::ConcatEmbedding;
    cfg.embedding_mode = EmbeddingMode::Adapter;
    cfg.embedding_dim = 3;
    ContourModel model(cfg);
    Rng rng(13);
    const Eigen::MatrixXd x = testing::random_matrix(3, 5, rng);
    const Eigen::VectorXd e = testing::random_matrix(3, 1, rng);
    const ContourModel back = ContourModel::from_json(model.to_json());
    const std::vector<ModelInput> in = {{&x, &e}};
    CHECK(back.predict(in) == model.predict(in));
    CHECK(back.params().at("adapter.w") == Matrix::Identity(3, 3));
    CHECK(back.params()[back.params().index("adapter.w")].group == ParamGroup::Embedding);
    CHECK(ModelConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
    const std::vector<ModelInput> missing = {{&x, nullptr}};
    CHECK_THROWS_AS(model.predict(missing), DataError);
}

TEST_CASE("config validation and names") {
    CHECK(parse_encoder("BLSTM") == EncoderKind::BLSTM);
    CHECK_THROWS_AS(parse_encoder("GRU"), UsageError);
    CHECK(parse_fusion("concat-embedding") == Fusion::ConcatEmbedding);
    CHECK(parse_embedding_mode("FT") == EmbeddingMode::Adapter);
    auto c = tiny(EncoderKind::ATTN);
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    TrainConfig t;
    t.folds = 1;
    CHECK_THROWS_AS(t.validate(), UsageError);
}

TEST_CASE("stratified folds balance classes") {
    std::vector<int> labels;
    for (int i = 0; i < 53; ++i) labels.push_back(i % 5 == 0 ? 1 : 0);
    const auto folds = stratified_folds(labels, 10, 4, "O");
    REQUIRE(folds.size() == labels.size());
    std::map<int, std::array<int, 2>> counts;
    for (std::size_t i = 0; i < labels.size(); ++i) counts[folds[i]][static_cast<std::size_t>(labels[i])]++;
    CHECK(counts.size() == 10);
    int lo1 = 100, hi1 = 0, lo0 = 100, hi0 = 0;
    for (const auto& [f, c] : counts) {
        lo0 = std::min(lo0, c[0]);
        hi0 = std::max(hi0, c[0]);
        lo1 = std::min(lo1, c[1]);
        hi1 = std::max(hi1, c[1]);
    }
    CHECK(hi0 - lo0 <= 1);
    CHECK(hi1 - lo1 <= 1);
    CHECK(stratified_folds(labels, 10, 4, "O") == folds);
    CHECK(stratified_folds(labels, 10, 5, "O") != folds);
}

TEST_CASE("infeasible stratification names the trait") {
    std::vector<int> few = {0, 0, 0, 0, 1, 1};
    try {
        stratified_folds(few, 3, 1, "cNEU");
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("cNEU") != std::string::npos);
    }
    CHECK_THROWS_AS(stratified_folds(std::vector<int>(20, 1), 2, 1, "O"), DataError);
}

TEST_CASE("accuracy thresholds at one half inclusive") {
    Eigen::MatrixXd p(4, 1), y(4, 1);
    p << 0.5, 0.49, 0.9, 0.1;
    y << 1, 0, 0, 0;
    CHECK(accuracy(p, y) == 0.75);
}

TEST_CASE("training is deterministic and reduces the loss") {
    const auto corpus = testing::planted_corpus(70, 4, 21);
    auto cfg = tiny(EncoderKind::ATTN, 4);
    cfg.dropout = 0.1;
    std::vector<TrainSample> samples;
    for (const auto& d : corpus.docs) {
        samples.push_back({&d.values, nullptr, Eigen::RowVectorXd::Constant(1, d.labels.at("O"))});
    }
    TrainConfig t;
    t.epochs = 12;
    t.batch_size = 23;  // leaves a trailing batch of one
    t.learning_rate = 5e-3;
    ContourModel a(cfg), b(cfg);
    Rng ra(5), rb(5);
    const auto ha = fit(a, samples, t, ra);
    const auto hb = fit(b, samples, t, rb);
    CHECK(ha.loss == hb.loss);
    CHECK(a.to_json() == b.to_json());
    CHECK(ha.epochs_run == 12);
    CHECK(ha.loss.back() < ha.loss.front());
}

TEST_CASE("early stop at a training accuracy") {
    const auto corpus = testing::planted_corpus(60, 3, 22);
    std::vector<TrainSample> samples;
    for (const auto& d : corpus.docs) {
        samples.push_back({&d.values, nullptr, Eigen::RowVectorXd::Constant(1, d.labels.at("E"))});
    }
    TrainConfig t;
    t.epochs = 100;
    t.learning_rate = 1e-2;
    t.stop_at_train_accuracy = 0.6;
    ContourModel m(tiny(EncoderKind::ATTN, 3));
    Rng rng(1);
    const auto h = fit(m, samples, t, rng);
    CHECK(h.epochs_run < 100);
    CHECK(h.train_accuracy.back() >= 0.6);
}

TEST_CASE("loss falls over the first ten epochs for most seeds") {
    int monotone = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto corpus = testing::planted_corpus(120, 4, 100 + seed);
        std::vector<TrainSample> samples;
        for (const auto& d : corpus.docs) {
            samples.push_back({&d.values, nullptr, Eigen::RowVectorXd::Constant(1, d.labels.at("O"))});
        }
        auto cfg = tiny(EncoderKind::ATTN, 4);
        cfg.hidden = 8;
        cfg.classifier_hidden = 16;
        cfg.dropout = 0.1;
        cfg.seed = seed;
        ContourModel m(cfg);
        TrainConfig t;
        t.epochs = 10;
        t.learning_rate = 2e-3;
        Rng rng(seed);
        const auto h = fit(m, samples, t, rng);
        bool ok = true;
        for (std::size_t e = 1; e < h.loss.size(); ++e) ok = ok && h.loss[e] < h.loss[e - 1];
        monotone += ok ? 1 : 0;
    }
    CHECK(monotone >= 9);
}

TEST_CASE("cross-validation report shape and reproducibility") {
    const auto corpus = testing::planted_corpus(40, 3, 30);
    auto cfg = tiny(EncoderKind::ATTN, 3);
    TrainConfig t;
    t.epochs = 2;
    t.folds = 4;
    t.repetitions = 2;
    t.seed = 99;
    const auto r1 = cross_validate(cfg, t, corpus, {}, 1);
    const auto r2 = cross_validate(cfg, t, corpus, {}, 3);
    CHECK(r1.dump() == r2.dump());
    CHECK(r1.traits == std::vector<std::string>{"O", "C", "E", "A", "N"});
    CHECK(r1.folds.size() == 5 * 4 * 2);
    CHECK(r1.mean_accuracy.size() == 5);
    CHECK(r1.model == "ATTN-PSYLING");
    const auto back = FoldReport::from_json(nlohmann::json::parse(r1.dump()));
    CHECK(back.dump() == r1.dump());
    CHECK(r1.table().find("Avg") != std::string::npos);
    for (const auto& f : r1.folds) CHECK(f.train_size + f.dev_size == 40);
    t.seed = 100;
    CHECK(cross_validate(cfg, t, corpus, {}, 1).config_hash != r1.config_hash);
}

TEST_CASE("single-class training subset names the trait") {
    auto corpus = testing::planted_corpus(12, 3, 31);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        if (corpus.docs[i].labels.at("A") == 1) idx.push_back(i);
    }
    REQUIRE(!idx.empty());
    try {
        train_subset(tiny(EncoderKind::ATTN, 3), TrainConfig{}, corpus, {}, {"A"}, idx, 1);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("A") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip and evaluation") {
    testing::TempDir dir("checkpoint");
    const auto corpus = testing::planted_corpus(30, 3, 32);
    TrainConfig t;
    t.epochs = 2;
    const auto cp = pipeline::train_final(tiny(EncoderKind::ATTN, 3), t, corpus, {});
    pipeline::save_checkpoint(dir / "cp.json", cp);
    const auto back = pipeline::load_checkpoint(dir / "cp.json");
    CHECK(pipeline::evaluate(back, corpus, {}).dump() == pipeline::evaluate(cp, corpus, {}).dump());
    auto other = corpus;
    other.registry = testing::synthetic_registry({3, 1, 0, 0});
    CHECK_THROWS_AS(pipeline::evaluate(back, other, {}), DataError);
    auto text = testing::read_file(dir / "cp.json");
    const auto pos = text.find(cp.config_hash);
    REQUIRE(pos != std::string::npos);
    text[pos] = text[pos] == '0' ? '1' : '0';
    testing::write_file(dir / "bad.json", text);
    CHECK_THROWS_AS(pipeline::load_checkpoint(dir / "bad.json"), DataError);
}
