#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "psycontour/contours.hpp"
#include "psycontour/registry.hpp"

namespace psycontour::explain {

// z_j = 1 keeps group j, 0 zeroes it. Positions follow explain_groups().
using GroupMask = std::vector<int>;

// Feature groups with at least one registry column, in registry group order.
std::vector<FeatureGroup> explain_groups(const FeatureRegistry& registry);

// Zeroes the columns of absent groups; other columns are copied bit for bit.
Eigen::MatrixXd perturb(const Eigen::MatrixXd& values, const GroupMask& mask, const FeatureRegistry& registry);
ContourMatrix perturb(const ContourMatrix& matrix, const GroupMask& mask, const FeatureRegistry& registry);

// exp(-h^2 / sigma^2), h = Hamming distance to the all-ones mask, sigma = 0.75 sqrt(d).
double kernel_weight(const GroupMask& mask);

// All 2^d masks, all-ones first.
std::vector<GroupMask> enumerate_masks(std::size_t d);
// n random masks plus the all-ones mask.
std::vector<GroupMask> sample_masks(std::size_t d, std::size_t n, std::uint64_t seed);

struct LocalExplanation {
    Eigen::VectorXd coefficients;  // one per group
    double intercept = 0.0;
};

// Weighted least squares of targets on mask bits with an intercept. Repeated masks
// count once.
LocalExplanation fit_surrogate(const std::vector<GroupMask>& masks, const std::vector<double>& targets);

// Probability of the explained class for a standardized contour.
using ProbabilityFn = std::function<double(const Eigen::MatrixXd&)>;

// Full enumeration when d <= 16 or n_samples == 0; otherwise n_samples sampled masks.
LocalExplanation explain_instance(const ProbabilityFn& model, const Eigen::MatrixXd& contour,
                                  const FeatureRegistry& registry, std::size_t n_samples = 0,
                                  std::uint64_t seed = 0);

// I_j = sqrt(sum_i |W_ij|).
Eigen::VectorXd global_importance(const std::vector<LocalExplanation>& explanations);

Eigen::VectorXd global_importance(const ProbabilityFn& model, const std::vector<Eigen::MatrixXd>& contours,
                                  const FeatureRegistry& registry, int jobs = 1);

// Group positions sorted by decreasing importance (ties by group order).
std::vector<std::size_t> ranking(const Eigen::VectorXd& importance);

struct ImportanceReport {
    std::vector<FeatureGroup> groups;
    std::vector<std::string> traits;
    std::vector<Eigen::VectorXd> importance;  // per trait
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string registry_hash;
};

// CSV rows trait,group,importance,rank.
void write_importance_csv(const std::filesystem::path& path, const ImportanceReport& report);
// {"groups": [...], "traits": {trait: {"importance": [...], "ranking": [...]}}, ...}
void write_importance_plot(const std::filesystem::path& path, const ImportanceReport& report);

struct FeatureDiff {
    std::size_t feature = 0;
    std::string name;
    double diff = 0.0;
};

struct TraitDiffs {
    std::string trait;
    std::vector<double> diff;                            // per registry feature
    std::vector<std::vector<FeatureDiff>> top_by_group;  // per explain group, descending |diff|
};

// Per feature: mean over class-1 documents of the document's mean z-score minus the same
// for class 0.
TraitDiffs trait_feature_diffs(const std::vector<Eigen::MatrixXd>& standardized, const std::vector<int>& labels,
                               const FeatureRegistry& registry, const std::string& trait, std::size_t top_k = 20);

void write_diffs_plot(const std::filesystem::path& path, const std::vector<TraitDiffs>& diffs,
                      const FeatureRegistry& registry, std::uint64_t seed);

}  // namespace psycontour::explain
