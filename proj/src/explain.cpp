#include "psycontour/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>

#include "psycontour/error.hpp"
#include "psycontour/nn/train.hpp"
#include "psycontour/rng.hpp"

namespace psycontour::explain {

std::vector<FeatureGroup> explain_groups(const FeatureRegistry& registry) {
    std::vector<FeatureGroup> out;
    const auto counts = registry.group_counts();
    for (auto g : kAllGroups) {
        if (counts[static_cast<std::size_t>(g)] > 0) out.push_back(g);
    }
    return out;
}

Eigen::MatrixXd perturb(const Eigen::MatrixXd& values, const GroupMask& mask, const FeatureRegistry& registry) {
    const auto groups = explain_groups(registry);
    if (mask.size() != groups.size()) {
        throw UsageError("mask has " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(groups.size()) + " feature groups");
    }
    if (values.cols() != static_cast<Eigen::Index>(registry.dimension())) {
        throw UsageError("contour width does not match the registry");
    }
    Eigen::MatrixXd out = values;
    for (std::size_t j = 0; j < groups.size(); ++j) {
        if (mask[j] != 0 && mask[j] != 1) throw UsageError("mask entries must be 0 or 1");
        if (mask[j] == 1) continue;
        for (auto c : registry.columns(groups[j])) out.col(static_cast<Eigen::Index>(c)).setZero();
    }
    return out;
}

ContourMatrix perturb(const ContourMatrix& matrix, const GroupMask& mask, const FeatureRegistry& registry) {
    ContourMatrix out = matrix;
    out.values = perturb(matrix.values, mask, registry);
    return out;
}

double kernel_weight(const GroupMask& mask) {
    if (mask.empty()) throw UsageError("empty mask");
    std::size_t h = 0;
    for (int z : mask) {
        if (z != 0 && z != 1) throw UsageError("mask entries must be 0 or 1");
        h += z == 0 ? 1 : 0;
    }
    const double sigma = 0.75 * std::sqrt(static_cast<double>(mask.size()));
    const double hd = static_cast<double>(h);
    return std::exp(-(hd * hd) / (sigma * sigma));
}

std::vector<GroupMask> enumerate_masks(std::size_t d) {
    if (d == 0 || d > 20) throw UsageError("cannot enumerate masks for d = " + std::to_string(d));
    const std::size_t n = std::size_t{1} << d;
    std::vector<GroupMask> out;
    out.reserve(n);
    for (std::size_t code = n; code-- > 0;) {
        GroupMask m(d);
        for (std::size_t j = 0; j < d; ++j) m[j] = static_cast<int>((code >> (d - 1 - j)) & 1U);
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<GroupMask> sample_masks(std::size_t d, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GroupMask> out;
    out.push_back(GroupMask(d, 1));
    for (std::size_t i = 0; i < n; ++i) {
        GroupMask m(d);
        for (auto& z : m) z = static_cast<int>(rng.below(2));
        out.push_back(std::move(m));
    }
    return out;
}

LocalExplanation fit_surrogate(const std::vector<GroupMask>& masks, const std::vector<double>& targets) {
    if (masks.size() != targets.size() || masks.empty()) throw UsageError("surrogate fit: bad sample set");
    std::vector<std::size_t> keep;
    std::set<GroupMask> seen;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (seen.insert(masks[i]).second) keep.push_back(i);
    }
    const auto d = static_cast<Eigen::Index>(masks.front().size());
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd a(m, d + 1);
    Eigen::VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto& mask = masks[keep[static_cast<std::size_t>(r)]];
        if (static_cast<Eigen::Index>(mask.size()) != d) throw UsageError("surrogate fit: masks differ in length");
        const double sw = std::sqrt(kernel_weight(mask));
        a(r, 0) = sw;
        for (Eigen::Index j = 0; j < d; ++j) a(r, j + 1) = sw * mask[static_cast<std::size_t>(j)];
        b(r) = sw * targets[keep[static_cast<std::size_t>(r)]];
    }
    if (!b.allFinite()) throw NumericError("non-finite surrogate targets");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < d + 1) throw NumericError("singular surrogate design; too few distinct masks");
    const Eigen::VectorXd beta = qr.solve(b);
    LocalExplanation e;
    e.intercept = beta(0);
    e.coefficients = beta.tail(d);
    return e;
}

LocalExplanation explain_instance(const ProbabilityFn& model, const Eigen::MatrixXd& contour,
                                  const FeatureRegistry& registry, std::size_t n_samples, std::uint64_t seed) {
    const auto d = explain_groups(registry).size();
    const auto masks = (n_samples == 0 || d <= 16) ? enumerate_masks(d) : sample_masks(d, n_samples, seed);
    std::vector<double> targets;
    targets.reserve(masks.size());
    for (const auto& m : masks) targets.push_back(model(perturb(contour, m, registry)));
    return fit_surrogate(masks, targets);
}

Eigen::VectorXd global_importance(const std::vector<LocalExplanation>& explanations) {
    if (explanations.empty()) throw UsageError("no explanations to aggregate");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(explanations.front().coefficients.size());
    for (const auto& e : explanations) {
        if (e.coefficients.size() != sum.size()) throw UsageError("explanations differ in group count");
        sum += e.coefficients.cwiseAbs();
    }
    return sum.cwiseSqrt();
}

Eigen::VectorXd global_importance(const ProbabilityFn& model, const std::vector<Eigen::MatrixXd>& contours,
                                  const FeatureRegistry& registry, int jobs) {
    std::vector<LocalExplanation> e(contours.size());
    nn::parallel_for(contours.size(), jobs,
                     [&](std::size_t i) { e[i] = explain_instance(model, contours[i], registry); });
    return global_importance(e);
}

std::vector<std::size_t> ranking(const Eigen::VectorXd& importance) {
    std::vector<std::size_t> order(static_cast<std::size_t>(importance.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return importance(static_cast<Eigen::Index>(a)) > importance(static_cast<Eigen::Index>(b));
    });
    return order;
}

void write_importance_csv(const std::filesystem::path& path, const ImportanceReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "trait,group,importance,rank\n";
    char buf[64];
    for (std::size_t t = 0; t < report.traits.size(); ++t) {
        const auto& imp = report.importance[t];
        const auto order = ranking(imp);
        std::vector<std::size_t> rank(order.size());
        for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
        for (std::size_t j = 0; j < report.groups.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.6f", imp(static_cast<Eigen::Index>(j)));
            out << report.traits[t] << ',' << group_name(report.groups[j]) << ',' << buf << ',' << rank[j] << '\n';
        }
    }
}

void write_importance_plot(const std::filesystem::path& path, const ImportanceReport& report) {
    nlohmann::json groups = nlohmann::json::array();
    for (auto g : report.groups) groups.push_back(std::string(group_name(g)));
    nlohmann::json traits = nlohmann::json::object();
    for (std::size_t t = 0; t < report.traits.size(); ++t) {
        const auto& imp = report.importance[t];
        std::vector<double> values(imp.data(), imp.data() + imp.size());
        nlohmann::json order = nlohmann::json::array();
        for (auto j : ranking(imp)) order.push_back(std::string(group_name(report.groups[j])));
        traits[report.traits[t]] = {{"importance", values}, {"ranking", order}};
    }
    nlohmann::json j = {{"kind", "group-importance"},
                        {"groups", groups},
                        {"traits", traits},
                        {"seed", report.seed},
                        {"config_hash", report.config_hash},
                        {"registry_hash", report.registry_hash}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

TraitDiffs trait_feature_diffs(const std::vector<Eigen::MatrixXd>& standardized, const std::vector<int>& labels,
                               const FeatureRegistry& registry, const std::string& trait, std::size_t top_k) {
    if (standardized.size() != labels.size()) throw UsageError("diffs: documents and labels differ in count");
    const auto dim = static_cast<Eigen::Index>(registry.dimension());
    Eigen::VectorXd sum[2] = {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim)};
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < standardized.size(); ++i) {
        const auto& z = standardized[i];
        if (z.cols() != dim) throw UsageError("diffs: contour width does not match the registry");
        if (z.rows() == 0) continue;
        const int c = labels[i] != 0 ? 1 : 0;
        sum[c] += z.colwise().mean().transpose();
        ++count[c];
    }
    if (count[0] == 0 || count[1] == 0) throw DataError("trait " + trait + " has a single class; no differences");
    TraitDiffs out;
    out.trait = trait;
    const Eigen::VectorXd diff = sum[1] / static_cast<double>(count[1]) - sum[0] / static_cast<double>(count[0]);
    out.diff.assign(diff.data(), diff.data() + diff.size());
    for (auto g : explain_groups(registry)) {
        std::vector<FeatureDiff> items;
        for (auto c : registry.columns(g)) items.push_back({c, registry[c].name, out.diff[c]});
        std::stable_sort(items.begin(), items.end(),
                         [](const FeatureDiff& a, const FeatureDiff& b) { return std::abs(a.diff) > std::abs(b.diff); });
        if (items.size() > top_k) items.resize(top_k);
        out.top_by_group.push_back(std::move(items));
    }
    return out;
}

void write_diffs_plot(const std::filesystem::path& path, const std::vector<TraitDiffs>& diffs,
                      const FeatureRegistry& registry, std::uint64_t seed) {
    const auto groups = explain_groups(registry);
    nlohmann::json traits = nlohmann::json::object();
    for (const auto& d : diffs) {
        nlohmann::json by_group = nlohmann::json::object();
        for (std::size_t j = 0; j < groups.size(); ++j) {
            nlohmann::json items = nlohmann::json::array();
            for (const auto& f : d.top_by_group[j]) items.push_back({{"feature", f.name}, {"diff", f.diff}});
            by_group[std::string(group_name(groups[j]))] = items;
        }
        traits[d.trait] = by_group;
    }
    nlohmann::json j = {{"kind", "feature-differences"},
                        {"traits", traits},
                        {"seed", seed},
                        {"registry_hash", registry.hash()}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace psycontour::explain
