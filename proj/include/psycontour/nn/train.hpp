#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "psycontour/contours.hpp"
#include "psycontour/nn/model.hpp"

namespace psycontour::nn {

struct TrainConfig {
    double learning_rate = 8e-4;
    double embedding_learning_rate = 2e-5;  // adapter tensors in FT mode
    double weight_decay = 1e-4;
    int epochs = 30;
    int batch_size = 32;
    int folds = 10;
    int repetitions = 10;
    std::uint64_t seed = 0;
    // When > 0, training stops after the first epoch whose eval-mode training accuracy
    // reaches this value.
    double stop_at_train_accuracy = 0.0;
    bool track_accuracy = false;
    bool multi_head = false;  // one shared model with a head per trait

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainSample {
    const Eigen::MatrixXd* contour = nullptr;
    const Eigen::VectorXd* embedding = nullptr;
    Eigen::RowVectorXd targets;  // one 0/1 entry per model output
};

struct FitHistory {
    std::vector<double> loss;            // mean training loss per epoch
    std::vector<double> train_accuracy;  // eval-mode, when tracked
    int epochs_run = 0;
};

FitHistory fit(ContourModel& model, const std::vector<TrainSample>& samples, const TrainConfig& config, Rng& rng);

// Share of entries where (p >= 0.5) equals the target.
double accuracy(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& targets);

// Fold index per document. Each class is shuffled and dealt round-robin so fold class
// counts differ by at most one. Fails when a class has fewer than k members.
std::vector<int> stratified_folds(const std::vector<int>& labels, int k, std::uint64_t seed,
                                  const std::string& trait);

// A model trained on a subset of a corpus together with the standardizer fitted on
// that subset.
struct TrainedModel {
    ContourModel model;
    Standardizer standardizer;
    std::vector<std::string> traits;
    FitHistory history;
};

// Per-document embeddings aligned with corpus.docs (empty when no fusion).
using EmbeddingRefs = std::vector<const Eigen::VectorXd*>;

ModelConfig resolve_config(ModelConfig config, const ContourCorpus& corpus, const EmbeddingRefs& embeddings,
                           std::size_t outputs);

TrainedModel train_subset(const ModelConfig& model_config, const TrainConfig& train_config,
                          const ContourCorpus& corpus, const EmbeddingRefs& embeddings,
                          const std::vector<std::string>& traits, const std::vector<std::size_t>& train_idx,
                          std::uint64_t seed);

// Probabilities (docs x traits) for the selected documents.
Eigen::MatrixXd predict_subset(const TrainedModel& trained, const ContourCorpus& corpus,
                               const EmbeddingRefs& embeddings, const std::vector<std::size_t>& idx);

struct FoldScore {
    int repetition = 0;
    int fold = 0;
    std::string trait;
    std::size_t train_size = 0;
    std::size_t dev_size = 0;
    double train_accuracy = 0.0;
    double dev_accuracy = 0.0;
    double final_loss = 0.0;
    int epochs = 0;
};

// Per-trait, per-fold accuracies and their means in the column order of the schema.
struct FoldReport {
    std::string kind = "cross-validation";
    std::string model;
    std::string schema;
    std::vector<std::string> traits;
    std::vector<FoldScore> folds;
    std::vector<double> mean_accuracy;  // per trait, fraction in [0, 1]
    double average = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string registry_hash;

    void finalize();  // recompute means from folds
    nlohmann::json to_json() const;
    static FoldReport from_json(const nlohmann::json& j);
    std::string dump() const;
    // Header of trait columns plus Avg; values are percentages with two decimals.
    std::string table() const;
};

std::string config_hash(const ModelConfig& model_config, const TrainConfig& train_config);

// k-fold cross-validation with repetitions. Fold assignments are redrawn for every
// repetition; all randomness derives from train_config.seed. jobs > 1 trains folds on
// worker threads without changing results.
FoldReport cross_validate(const ModelConfig& model_config, const TrainConfig& train_config,
                          const ContourCorpus& corpus, const EmbeddingRefs& embeddings = {}, int jobs = 1);

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace psycontour::nn
