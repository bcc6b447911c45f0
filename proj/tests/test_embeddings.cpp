#include <doctest.h>

#include <sstream>

#include "psycontour/embeddings.hpp"
#include "psycontour/error.hpp"
#include "psycontour/nn/train.hpp"
#include "psycontour/pipeline.hpp"
#include "nn_support.hpp"
#include "support.hpp"

using namespace psycontour;

namespace {

std::string vector_line(const std::string& id, int dim, double value) {
    std::string s = "{\"doc_id\":\"" + id + "\",\"vector\":[";
    for (int i = 0; i < dim; ++i) s += (i ? "," : "") + std::to_string(value + i * 1e-3);
    return s + "]}\n";
}

std::string header(int dim) {
    return "{\"dimension\":" + std::to_string(dim) + ",\"source\":\"bert-base-uncased\",\"layer\":-1,\"pooling\":\"cls\"}\n";
}

}  // namespace

TEST_CASE("three documents of dimension 768") {
    std::istringstream in(header(768) + vector_line("a", 768, 0.1) + vector_line("b", 768, 0.2) +
                          vector_line("c", 768, 0.3));
    const auto e = EmbeddingFile::read(in);
    CHECK(e.size() == 3);
    CHECK(e.dimension() == 768);
    CHECK(e.meta().source == "bert-base-uncased");
    CHECK(e.meta().pooling == "cls");
    CHECK(e.at("b")(0) == doctest::Approx(0.2));
    CHECK(e.ids() == std::vector<std::string>{"a", "b", "c"});
    std::ostringstream out;
    e.write(out);
    std::istringstream again(out.str());
    const auto back = EmbeddingFile::read(again);
    for (const auto& id : e.ids()) CHECK(back.at(id) == e.at(id));
}

TEST_CASE("a short row is rejected with its doc id and line") {
    std::istringstream in(header(768) + vector_line("a", 768, 0.1) + vector_line("short-doc", 767, 0.1));
    try {
        EmbeddingFile::read(in, "emb.jsonl");
        FAIL("expected an error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("short-doc") != std::string::npos);
        CHECK(msg.find("emb.jsonl:3") != std::string::npos);
    }
}

TEST_CASE("malformed embedding files") {
    std::istringstream dup(header(2) + vector_line("a", 2, 0.1) + vector_line("a", 2, 0.2));
    CHECK_THROWS_AS(EmbeddingFile::read(dup), DataError);
    std::istringstream none("");
    CHECK_THROWS_AS(EmbeddingFile::read(none), DataError);
    std::istringstream no_header(vector_line("a", 2, 0.1));
    CHECK_THROWS_AS(EmbeddingFile::read(no_header), DataError);
    std::istringstream junk(header(2) + "[1,2]\n");
    CHECK_THROWS_AS(EmbeddingFile::read(junk), DataError);
    EmbeddingFile f({2, "x", 0, "mean"});
    CHECK_THROWS_AS(f.add("n", Eigen::Vector2d(1.0, std::nan(""))), DataError);
    CHECK_THROWS_AS(load_embeddings("/nonexistent/emb.jsonl"), DataError);
}

TEST_CASE("fusion concatenates with the contour block first") {
    EmbeddingFile f({768, "bert", -1, "cls"});
    Rng rng(1);
    f.add("d", testing::random_matrix(768, 1, rng));
    f.add("z", Eigen::VectorXd::Zero(768));
    const Eigen::VectorXd p = testing::random_matrix(512, 1, rng);
    const auto fused = fuse(p, "d", f);
    CHECK(fused.size() == 1280);
    CHECK(fused.head(512) == p);
    CHECK(fused.tail(768) == f.at("d"));
    const auto zero = fuse(p, "z", f);
    CHECK(zero.head(512) == p);
    CHECK(zero.tail(768).isZero(0.0));
    CHECK_THROWS_AS(fuse(p, "missing", f), DataError);
}

TEST_CASE("alignment requires every document") {
    const auto corpus = testing::planted_corpus(3, 2, 1);
    EmbeddingFile f({2, "x", 0, "mean"});
    f.add("doc0", Eigen::Vector2d(1, 2));
    f.add("doc2", Eigen::Vector2d(3, 4));
    CHECK_THROWS_AS(align_embeddings(corpus, f), DataError);
    f.add("doc1", Eigen::Vector2d(5, 6));
    const auto refs = align_embeddings(corpus, f);
    REQUIRE(refs.size() == 3);
    CHECK((*refs[1])(0) == 5.0);
}

TEST_CASE("feature-based fusion keeps embeddings constant") {
    testing::TempDir dir("fb");
    const auto corpus = testing::planted_corpus(24, 3, 2);
    EmbeddingFile f({4, "x", 0, "mean"});
    Rng rng(3);
    for (const auto& d : corpus.docs) f.add(d.doc_id, testing::random_matrix(4, 1, rng));
    {
        std::ofstream out(dir / "e.jsonl");
        f.write(out);
    }
    const auto before = testing::read_file(dir / "e.jsonl");
    const auto loaded = load_embeddings(dir / "e.jsonl");
    const auto refs = align_embeddings(corpus, loaded);
    std::vector<Eigen::VectorXd> copies;
    for (const auto* r : refs) copies.push_back(*r);

    nn::ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 4;
    cfg.classifier_layers = 2;
    cfg.classifier_hidden = 6;
    cfg.fusion = nn::Fusion::ConcatEmbedding;
    cfg.embedding_mode = nn::EmbeddingMode::FeatureBased;
    nn::TrainConfig t;
    t.epochs = 3;
    const auto cp = pipeline::train_final(cfg, t, corpus, refs);
    const auto& model = cp.models.at(0).model;
    for (const auto& tensor : model.params().tensors()) CHECK(tensor.group == nn::ParamGroup::Base);
    CHECK_FALSE(model.params().contains("adapter.w"));
    CHECK(model.config().classifier_input_dim() == 3 + 4);
    CHECK(testing::read_file(dir / "e.jsonl") == before);
    for (std::size_t i = 0; i < refs.size(); ++i) CHECK(*refs[i] == copies[i]);

    cfg.embedding_mode = nn::EmbeddingMode::Adapter;
    const auto ft = pipeline::train_final(cfg, t, corpus, refs);
    CHECK(ft.models.at(0).model.params()[ft.models.at(0).model.params().index("adapter.w")].group ==
          nn::ParamGroup::Embedding);
}

TEST_CASE("fused model learns an embedding-only signal") {
    auto corpus = testing::planted_corpus(120, 3, 40);
    EmbeddingFile f({6, "x", 0, "mean"});
    Rng rng(41);
    for (auto& d : corpus.docs) {
        Eigen::VectorXd e = testing::random_matrix(6, 1, rng);
        const int label = e(0) > 0.0 ? 1 : 0;
        for (auto& [trait, value] : d.labels) value = label;
        f.add(d.doc_id, e);
    }
    const auto refs = align_embeddings(corpus, f);
    nn::ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 4;
    cfg.classifier_layers = 2;
    cfg.classifier_hidden = 16;
    cfg.dropout = 0.0;
    nn::TrainConfig t;
    t.epochs = 40;
    t.learning_rate = 5e-3;
    t.folds = 4;
    t.repetitions = 1;
    t.multi_head = true;
    const auto base = nn::cross_validate(cfg, t, corpus, {}, 1);
    cfg.fusion = nn::Fusion::ConcatEmbedding;
    const auto fused = nn::cross_validate(cfg, t, corpus, refs, 1);
    CHECK(fused.model == "ATTN-PSYLING+EMB-FB");
    MESSAGE("psyling-only " << base.average << ", fused " << fused.average);
    CHECK(fused.average > base.average + 0.15);
    CHECK(fused.average > 0.8);
}
