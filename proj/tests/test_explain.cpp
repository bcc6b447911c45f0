#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "psycontour/error.hpp"
#include "psycontour/explain.hpp"
#include "nn_support.hpp"
#include "support.hpp"

using namespace psycontour;
using namespace psycontour::explain;

namespace {

const FeatureRegistry& reference_registry() {
    static const auto reg = testing::synthetic_registry(kReferenceGroupSizes);
    return reg;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double group_mean(const Eigen::MatrixXd& x, const FeatureRegistry& reg, FeatureGroup g) {
    const auto cols = reg.columns(g);
    if (cols.empty()) return 0.0;
    double s = 0.0;
    for (auto c : cols) s += x.col(static_cast<Eigen::Index>(c)).mean();
    return s / static_cast<double>(cols.size());
}

}  // namespace

TEST_CASE("perturbation identities") {
    const auto& reg = reference_registry();
    Rng rng(1);
    const Eigen::MatrixXd x = testing::random_matrix(5, static_cast<Eigen::Index>(reg.dimension()), rng);
    CHECK(perturb(x, {1, 1, 1, 1}, reg) == x);
    CHECK(perturb(x, {0, 0, 0, 0}, reg).isZero(0.0));
    const auto y = perturb(x, {1, 0, 1, 1}, reg);
    int zeroed = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (y.col(c).isZero(0.0)) {
            ++zeroed;
            CHECK(reg[static_cast<std::size_t>(c)].group == FeatureGroup::Lexical);
        } else {
            CHECK(y.col(c) == x.col(c));
        }
    }
    CHECK(zeroed == 77);
    for (const auto& m : enumerate_masks(4)) CHECK(perturb(perturb(x, m, reg), m, reg) == perturb(x, m, reg));
    ContourMatrix cm;
    cm.doc_id = "d";
    cm.values = x;
    const auto pm = perturb(cm, {0, 1, 1, 1}, reg);
    CHECK(pm.doc_id == "d");
    CHECK(pm.values.leftCols(19).isZero(0.0));
}

TEST_CASE("explain groups skip empty groups") {
    const auto reg = testing::synthetic_registry({2, 0, 3, 1});
    const auto groups = explain_groups(reg);
    CHECK(groups == std::vector<FeatureGroup>{FeatureGroup::MorphSyn, FeatureGroup::Readability, FeatureGroup::SentiEmo});
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 6);
    CHECK(perturb(x, {1, 0, 1}, reg).col(2).isZero(0.0));
    CHECK_THROWS(perturb(x, {1, 0, 1, 1}, reg));
}

TEST_CASE("kernel weights") {
    CHECK(kernel_weight({1, 1, 1, 1}) == 1.0);
    CHECK(kernel_weight({1, 0, 1, 1}) == doctest::Approx(0.6412).epsilon(1e-4 / 0.6412));
    CHECK(kernel_weight({1, 0, 1, 1}) == doctest::Approx(std::exp(-1.0 / 2.25)));
    double prev = 2.0;
    for (int h = 0; h <= 4; ++h) {
        GroupMask m(4, 1);
        for (int i = 0; i < h; ++i) m[static_cast<std::size_t>(i)] = 0;
        const double w = kernel_weight(m);
        CHECK(w < prev);
        prev = w;
    }
}

TEST_CASE("mask enumeration and sampling") {
    const auto all = enumerate_masks(4);
    CHECK(all.size() == 16);
    CHECK(all.front() == GroupMask{1, 1, 1, 1});
    CHECK(std::set<GroupMask>(all.begin(), all.end()).size() == 16);
    const auto s = sample_masks(20, 50, 3);
    CHECK(s.size() == 51);
    CHECK(s.front() == GroupMask(20, 1));
    CHECK(sample_masks(20, 50, 3) == s);
    CHECK(sample_masks(20, 50, 4) != s);
}

TEST_CASE("constant model has no attributions") {
    const auto& reg = reference_registry();
    Rng rng(2);
    const Eigen::MatrixXd x = testing::random_matrix(3, static_cast<Eigen::Index>(reg.dimension()), rng);
    const auto e = explain_instance([](const Eigen::MatrixXd&) { return 0.37; }, x, reg);
    CHECK(e.coefficients.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(e.intercept == doctest::Approx(0.37));
}

TEST_CASE("a model of one group attributes to that group only") {
    const auto& reg = reference_registry();
    Rng rng(3);
    Eigen::MatrixXd x = testing::random_matrix(4, static_cast<Eigen::Index>(reg.dimension()), rng);
    x.array() += 1.0;
    const ProbabilityFn model = [&](const Eigen::MatrixXd& m) {
        double s = 0.0;
        for (auto c : reg.columns(FeatureGroup::Lexical)) s += m.col(static_cast<Eigen::Index>(c)).sum();
        return sigmoid(0.01 * s);
    };
    const auto e = explain_instance(model, x, reg);
    CHECK(std::abs(e.coefficients(1)) > 0.05);
    CHECK(std::abs(e.coefficients(0)) < 1e-10);
    CHECK(std::abs(e.coefficients(2)) < 1e-10);
    CHECK(std::abs(e.coefficients(3)) < 1e-10);
    const auto again = explain_instance(model, x, reg);
    CHECK((again.coefficients - e.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("additive targets are recovered exactly") {
    const auto masks = enumerate_masks(4);
    std::vector<double> t;
    for (const auto& m : masks) t.push_back(0.1 + 0.3 * m[0] - 0.2 * m[2] + 0.05 * m[3]);
    const auto e = fit_surrogate(masks, t);
    CHECK(e.intercept == doctest::Approx(0.1));
    CHECK(e.coefficients(0) == doctest::Approx(0.3));
    CHECK(std::abs(e.coefficients(1)) < 1e-12);
    CHECK(e.coefficients(2) == doctest::Approx(-0.2));
    CHECK(e.coefficients(3) == doctest::Approx(0.05));
}

TEST_CASE("duplicate masks leave the fit unchanged") {
    const auto masks = enumerate_masks(4);
    std::vector<double> t;
    Rng rng(4);
    for (std::size_t i = 0; i < masks.size(); ++i) t.push_back(rng.uniform());
    const auto base = fit_surrogate(masks, t);
    auto dm = masks;
    auto dt = t;
    for (std::size_t i : {3u, 3u, 7u, 0u}) {
        dm.push_back(masks[i]);
        dt.push_back(t[i]);
    }
    const auto dup = fit_surrogate(dm, dt);
    CHECK((dup.coefficients - base.coefficients).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(dup.intercept - base.intercept) < 1e-12);
    CHECK_THROWS_AS(fit_surrogate({{1, 1}, {1, 0}}, {0.2, 0.3}), NumericError);
}

TEST_CASE("global importance is the root of summed absolute coefficients") {
    LocalExplanation e;
    e.coefficients = Eigen::Vector4d(4, 1, 0, 0);
    const auto i = global_importance(std::vector<LocalExplanation>{e});
    CHECK(i == Eigen::Vector4d(2, 1, 0, 0));
    LocalExplanation f;
    f.coefficients = Eigen::Vector4d(-5, 3, 0, 1);
    CHECK(global_importance(std::vector<LocalExplanation>{e, f}) == Eigen::Vector4d(3, 2, 0, 1));
    CHECK(ranking(Eigen::Vector4d(3, 2, 0, 2)) == std::vector<std::size_t>{0, 1, 3, 2});
}

TEST_CASE("importance does not depend on document order") {
    const auto reg = testing::synthetic_registry({3, 4, 2, 5});
    Rng rng(5);
    std::vector<Eigen::MatrixXd> docs;
    for (int d = 0; d < 12; ++d) docs.push_back(testing::random_matrix(3, 14, rng));
    const Eigen::VectorXd w = testing::random_matrix(14, 1, rng);
    const ProbabilityFn model = [&](const Eigen::MatrixXd& m) {
        return sigmoid((m.colwise().mean() * w)(0, 0));
    };
    const auto a = global_importance(model, docs, reg, 1);
    auto rev = docs;
    std::reverse(rev.begin(), rev.end());
    const auto b = global_importance(model, rev, reg, 3);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("planted group ordering is recovered") {
    const auto& reg = reference_registry();
    // sentiemo > lexical > morphsyn > readability
    const std::array<double, 4> strength = {1.0, 2.0, 0.5, 3.0};
    const ProbabilityFn model = [&](const Eigen::MatrixXd& m) {
        double z = 0.0;
        for (auto g : kAllGroups) z += strength[static_cast<std::size_t>(g)] * group_mean(m, reg, g);
        return sigmoid(z);
    };
    Rng rng(6);
    std::vector<Eigen::MatrixXd> docs;
    for (int d = 0; d < 20; ++d) {
        Eigen::MatrixXd x = testing::random_matrix(4, static_cast<Eigen::Index>(reg.dimension()), rng, 0.3);
        x.array() += 0.5;
        docs.push_back(x);
    }
    const auto imp = global_importance(model, docs, reg);
    CHECK(ranking(imp) == std::vector<std::size_t>{3, 1, 0, 2});
}

TEST_CASE("class differences of standardized features") {
    const auto reg = testing::synthetic_registry({2, 1, 1, 1});
    Rng rng(7);
    std::vector<Eigen::MatrixXd> docs;
    std::vector<int> labels;
    const int n = 400;
    for (int d = 0; d < n; ++d) {
        const int y = d % 2;
        Eigen::MatrixXd x = testing::random_matrix(3, 5, rng);
        x.col(1).array() += y;
        x.col(4).setConstant(0.25);
        docs.push_back(x);
        labels.push_back(y);
    }
    const auto r = trait_feature_diffs(docs, labels, reg, "O");
    CHECK(std::abs(r.diff[1] - 1.0) < 2.0 / std::sqrt(double(n)));
    CHECK(r.diff[4] == 0.0);
    CHECK(std::abs(r.diff[0]) < 2.0 / std::sqrt(double(n)));
    REQUIRE(r.top_by_group.size() == 4);
    CHECK(r.top_by_group[0].front().feature == 1);
    CHECK(r.top_by_group[0].front().name == "morphsyn.f1");
    CHECK_THROWS_AS(trait_feature_diffs(docs, std::vector<int>(n, 1), reg, "O"), DataError);
}

TEST_CASE("top features per group are sorted and capped") {
    const auto& reg = reference_registry();
    Rng rng(8);
    std::vector<Eigen::MatrixXd> docs;
    std::vector<int> labels;
    for (int d = 0; d < 30; ++d) {
        docs.push_back(testing::random_matrix(2, static_cast<Eigen::Index>(reg.dimension()), rng));
        labels.push_back(d % 3 == 0);
    }
    const auto r = trait_feature_diffs(docs, labels, reg, "E");
    const std::array<std::size_t, 4> expect = {19, 20, 14, 20};
    for (std::size_t g = 0; g < 4; ++g) {
        const auto& top = r.top_by_group[g];
        CHECK(top.size() == expect[g]);
        for (std::size_t i = 1; i < top.size(); ++i) CHECK(std::abs(top[i - 1].diff) >= std::abs(top[i].diff));
        for (const auto& f : top) CHECK(reg[f.feature].group == kAllGroups[g]);
    }
    CHECK(trait_feature_diffs(docs, labels, reg, "E", 5).top_by_group[3].size() == 5);
}

TEST_CASE("importance outputs") {
    testing::TempDir dir("importance");
    ImportanceReport rep;
    rep.groups = {kAllGroups.begin(), kAllGroups.end()};
    rep.traits = {"O", "C"};
    rep.importance = {Eigen::Vector4d(1, 2, 3, 4), Eigen::Vector4d(0.5, 0, 0, 0)};
    write_importance_csv(dir / "i.csv", rep);
    const auto csv = testing::read_file(dir / "i.csv");
    CHECK(csv.rfind("trait,group,importance,rank\n", 0) == 0);
    CHECK(csv.find("O,sentiemo,4.000000,1\n") != std::string::npos);
    CHECK(csv.find("C,morphsyn,0.500000,1\n") != std::string::npos);
    write_importance_plot(dir / "p.json", rep);
    const auto j = nlohmann::json::parse(testing::read_file(dir / "p.json"));
    CHECK(j.at("groups").size() == 4);
    CHECK(j.at("traits").at("O").at("ranking").at(0) == "sentiemo");
}
