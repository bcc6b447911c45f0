#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "psycontour/contours.hpp"
#include "psycontour/embeddings.hpp"
#include "psycontour/ingest.hpp"
#include "psycontour/nn/train.hpp"

namespace psycontour::pipeline {

struct AnalyzeOptions {
    std::filesystem::path dataset;
    DatasetFormat format = DatasetFormat::EssaysCsv;
    Schema schema = Schema::BigFive;
    std::filesystem::path manifest;         // optional resource manifest
    std::filesystem::path registry_config;  // optional
    std::filesystem::path conllu;           // optional parses
    std::filesystem::path columns;          // optional essays column mapping
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct CorpusSummary {
    std::size_t documents = 0;
    std::size_t sentences = 0;
    std::size_t words = 0;
    double mean_words = 0.0;
    double mean_sentences = 0.0;
    std::size_t features = 0;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
    std::string text() const;
};

struct AnalyzeResult {
    ContourCorpus corpus;
    CorpusSummary summary;
};

// Loads, segments and measures every document. Nothing is written.
AnalyzeResult analyze(const AnalyzeOptions& options);

// Writes contours.jsonl, registry.json and summary.json into out_dir.
void write_analysis(const std::filesystem::path& out_dir, const AnalyzeResult& result, std::uint64_t seed);

// Trained per-trait (or multi-head) models plus the metadata needed to reuse them.
struct Checkpoint {
    nn::ModelConfig model_config;
    nn::TrainConfig train_config;
    std::string schema;
    std::string registry_hash;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<nn::TrainedModel> models;

    // Model and output column for a trait.
    std::pair<const nn::TrainedModel*, std::size_t> find(const std::string& trait) const;
};

// Fits final models on the whole corpus.
Checkpoint train_final(const nn::ModelConfig& model_config, const nn::TrainConfig& train_config,
                       const ContourCorpus& corpus, const nn::EmbeddingRefs& embeddings, int jobs = 1);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Accuracy of checkpoint models on a corpus. Refuses corpora measured with a different registry.
nn::FoldReport evaluate(const Checkpoint& checkpoint, const ContourCorpus& corpus,
                        const nn::EmbeddingRefs& embeddings);

// Writes text atomically enough for CLI use (temp file + rename).
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace psycontour::pipeline
