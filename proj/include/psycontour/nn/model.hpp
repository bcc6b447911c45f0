#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psycontour/nn/graph.hpp"
#include "psycontour/rng.hpp"

namespace psycontour::nn {

enum class EncoderKind { BLSTM, ATTN };
enum class Fusion { None, ConcatEmbedding };
// FB: stored embeddings enter the classifier unchanged.
// FT: a trainable affine adapter (identity-initialized) maps them first.
enum class EmbeddingMode { FeatureBased, Adapter };

std::string encoder_name(EncoderKind k);
EncoderKind parse_encoder(const std::string& s);
std::string fusion_name(Fusion f);
Fusion parse_fusion(const std::string& s);
std::string embedding_mode_name(EmbeddingMode m);
EmbeddingMode parse_embedding_mode(const std::string& s);

struct ModelConfig {
    EncoderKind encoder = EncoderKind::ATTN;
    int layers = 3;
    int hidden = 512;
    double dropout = 0.1;
    int classifier_layers = 3;  // Linear layers, the last one producing logits
    int classifier_hidden = 512;
    Fusion fusion = Fusion::None;
    EmbeddingMode embedding_mode = EmbeddingMode::FeatureBased;
    int max_sentences = 64;
    std::uint64_t seed = 0;

    // Shapes supplied by the data.
    int input_dim = 0;
    int embedding_dim = 0;
    int outputs = 1;

    void validate() const;
    int encoder_dim() const { return encoder == EncoderKind::BLSTM ? 2 * hidden : input_dim; }
    int classifier_input_dim() const { return encoder_dim() + (fusion == Fusion::ConcatEmbedding ? embedding_dim : 0); }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

enum class ParamGroup { Base, Embedding };

struct Tensor {
    std::string name;
    Matrix value;
    bool trainable = true;  // false for batch-norm running statistics
    ParamGroup group = ParamGroup::Base;
};

// Named tensors in a fixed creation order.
class ModelParams {
public:
    std::size_t add(std::string name, Matrix value, bool trainable = true, ParamGroup group = ParamGroup::Base);
    std::size_t index(const std::string& name) const;
    bool contains(const std::string& name) const { return by_name_.count(name) != 0; }
    Tensor& operator[](std::size_t i) { return tensors_[i]; }
    const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
    Matrix& at(const std::string& name) { return tensors_[index(name)].value; }
    const Matrix& at(const std::string& name) const { return tensors_[index(name)].value; }
    std::size_t size() const { return tensors_.size(); }
    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::size_t scalar_count() const;
    void check_finite() const;

private:
    std::vector<Tensor> tensors_;
    std::map<std::string, std::size_t> by_name_;
};

// One document as seen by the model: a (standardized) contour and an optional embedding.
struct ModelInput {
    const Eigen::MatrixXd* contour = nullptr;
    const Eigen::VectorXd* embedding = nullptr;
};

class ContourModel {
public:
    explicit ContourModel(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }

    // Graph leaves for every tensor (running statistics become constants).
    std::vector<Graph::Id> bind(Graph& g) const;

    struct Forward {
        Graph::Id logits;
        Graph::Id encoded;  // P, before fusion
        // Batch statistics per batch-norm layer, for running-average updates.
        std::vector<std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>> bn_stats;
    };
    // train=true: dropout active (needs rng) and batch-norm uses batch statistics.
    Forward forward(Graph& g, const std::vector<Graph::Id>& bound, const std::vector<ModelInput>& batch, bool train,
                    Rng* rng) const;

    // Running-average update with the statistics of a training forward pass.
    void update_running_stats(const Forward& f, std::size_t batch_size, double momentum = 0.1);

    // Eval-mode probabilities, one row per input.
    Eigen::MatrixXd predict(const std::vector<ModelInput>& batch) const;
    // Eval-mode encoder output P for one contour.
    Eigen::VectorXd encode(const Eigen::MatrixXd& contour) const;

    nlohmann::json to_json() const;
    static ContourModel from_json(const nlohmann::json& j);

private:
    ModelConfig config_;
    ModelParams params_;
    std::vector<std::size_t> bn_mean_, bn_var_;
};

}  // namespace psycontour::nn
