#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "psycontour/contours.hpp"
#include "psycontour/nn/train.hpp"

namespace psycontour::ensemble {

// Out-of-fold probabilities for one trait: column j comes from repetition j.
struct StageOneMatrix {
    std::string trait;
    std::vector<std::string> doc_ids;
    Eigen::MatrixXd probabilities;  // documents x repetitions
    std::vector<int> labels;
    // Audit trail: fold of every document per repetition, and the exact training
    // indices handed to the model of each (repetition, fold).
    std::vector<std::vector<int>> fold_of;
    std::vector<std::vector<std::vector<std::size_t>>> train_sets;

    std::size_t documents() const { return doc_ids.size(); }
    std::size_t repetitions() const { return static_cast<std::size_t>(probabilities.cols()); }
    void validate() const;
};

// Trains on train_idx and returns one probability per dev_idx entry.
using FoldTrainer = std::function<std::vector<double>(const std::vector<std::size_t>& train_idx,
                                                      const std::vector<std::size_t>& dev_idx, std::uint64_t seed)>;

// Generic collection: for each repetition draw stratified folds and fill the dev
// predictions of every fold's model into column `repetition`.
StageOneMatrix collect_stage_one(const std::string& trait, const std::vector<std::string>& doc_ids,
                                 const std::vector<int>& labels, int repetitions, int folds, std::uint64_t seed,
                                 const FoldTrainer& trainer, int jobs = 1);

// Collection with the neural contour model as base learner.
StageOneMatrix collect_stage_one(const nn::ModelConfig& model_config, const nn::TrainConfig& train_config,
                                 const ContourCorpus& corpus, const std::string& trait,
                                 const nn::EmbeddingRefs& embeddings = {}, int jobs = 1);

// Number of (document, repetition) pairs whose predicting model saw the document
// during training. Zero for a correct collection.
std::size_t leakage_pairs(const StageOneMatrix& s);

struct LogisticOptions {
    double l2 = 1e-4;          // penalty (l2/2)|w|^2 on the weights, not the bias
    double tolerance = 1e-6;   // gradient norm at convergence
    int max_iterations = 200000;
};

struct LogisticModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;

    double predict(const Eigen::RowVectorXd& x) const;
};

// Mean logistic loss plus the penalty, minimized by full-batch gradient descent with
// Barzilai-Borwein steps and Armijo backtracking. Throws NumericError on non-convergence.
LogisticModel fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y, const LogisticOptions& options = {});

struct MetaModel {
    std::vector<std::string> traits;
    std::vector<LogisticModel> models;
};

MetaModel train_meta(const std::vector<StageOneMatrix>& stage_one, const LogisticOptions& options = {});
double predict_meta(const LogisticModel& model, const Eigen::RowVectorXd& row);

// Accuracy of thresholding one stage-one column at 0.5.
double column_accuracy(const StageOneMatrix& s, std::size_t column);

// Fresh stratified k-fold evaluation of the meta-model per trait.
nn::FoldReport evaluate_meta(const std::vector<StageOneMatrix>& stage_one, int folds, std::uint64_t seed,
                             const LogisticOptions& options = {});

// CSV with columns doc_id, trait, rep_0..rep_{R-1}, label.
void write_stage_one(const std::filesystem::path& path, const std::vector<StageOneMatrix>& stage_one);
std::vector<StageOneMatrix> read_stage_one(const std::filesystem::path& path);

}  // namespace psycontour::ensemble
