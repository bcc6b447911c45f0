#include "psycontour/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "psycontour/error.hpp"
#include "psycontour/features.hpp"
#include "psycontour/resources.hpp"
#include "psycontour/text.hpp"

namespace psycontour::pipeline {

nlohmann::json CorpusSummary::to_json() const {
    return {{"documents", documents},   {"sentences", sentences},           {"words", words},
            {"mean_words", mean_words}, {"mean_sentences", mean_sentences}, {"features", features},
            {"warnings", warnings}};
}

std::string CorpusSummary::text() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "documents: %zu\nsentences: %zu\nwords: %zu\nmean words per text: %.1f\n"
                  "mean sentences per text: %.1f\nfeatures: %zu\n",
                  documents, sentences, words, mean_words, mean_sentences, features);
    return buf;
}

AnalyzeResult analyze(const AnalyzeOptions& options) {
    const EssaysColumns columns = options.columns.empty() ? EssaysColumns{} : EssaysColumns::from_file(options.columns);
    const auto docs = load_dataset(options.dataset, options.schema, options.format, columns);
    if (docs.empty()) throw DataError(options.dataset.string() + ": dataset contains no documents");

    const ResourceStore store = options.manifest.empty() ? ResourceStore{} : load_store(options.manifest);
    const RegistryConfig reg_config =
        options.registry_config.empty() ? RegistryConfig{} : RegistryConfig::from_file(options.registry_config);
    const FeatureExtractor extractor(store, build_registry(store, reg_config), reg_config);

    ParseMap parses;
    if (!options.conllu.empty()) parses = load_conllu(options.conllu);

    AnalyzeResult result;
    result.corpus.schema = options.schema;
    result.corpus.registry = extractor.registry();
    result.corpus.docs.resize(docs.size());
    std::vector<std::size_t> sentence_counts(docs.size()), word_counts(docs.size());
    const AbbreviationList abbreviations;
    nn::parallel_for(docs.size(), options.jobs, [&](std::size_t i) {
        const auto& doc = docs[i];
        std::vector<Sentence> sentences;
        if (const auto it = parses.find(doc.id); it != parses.end()) {
            sentences = it->second;
        } else {
            sentences = segment(doc, abbreviations);
        }
        std::size_t words = 0;
        for (const auto& s : sentences) {
            for (const auto& t : s.tokens) words += is_word(t.surface) ? 1 : 0;
        }
        sentence_counts[i] = sentences.size();
        word_counts[i] = words;
        result.corpus.docs[i] = build_contours(doc, sentences, extractor);
    });

    auto& s = result.summary;
    s.documents = docs.size();
    for (std::size_t i = 0; i < docs.size(); ++i) {
        s.sentences += sentence_counts[i];
        s.words += word_counts[i];
    }
    s.mean_words = static_cast<double>(s.words) / static_cast<double>(s.documents);
    s.mean_sentences = static_cast<double>(s.sentences) / static_cast<double>(s.documents);
    s.features = extractor.registry().dimension();
    if (!options.conllu.empty()) s.warnings = unmatched_parse_ids(docs, parses);
    return result;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + path.string());
        out << text;
        if (!out) throw DataError("failed writing " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_analysis(const std::filesystem::path& out_dir, const AnalyzeResult& result, std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    write_contours(out_dir / "contours.jsonl", result.corpus.docs);
    write_registry_sidecar(out_dir / "registry.json", result.corpus.registry, result.corpus.schema, seed);
    auto j = result.summary.to_json();
    j["schema"] = schema_name(result.corpus.schema);
    j["registry_hash"] = result.corpus.registry.hash();
    j["seed"] = seed;
    write_text(out_dir / "summary.json", j.dump(2) + "\n");
}

std::pair<const nn::TrainedModel*, std::size_t> Checkpoint::find(const std::string& trait) const {
    for (const auto& m : models) {
        for (std::size_t j = 0; j < m.traits.size(); ++j) {
            if (m.traits[j] == trait) return {&m, j};
        }
    }
    throw DataError("checkpoint has no model for trait " + trait);
}

Checkpoint train_final(const nn::ModelConfig& model_config, const nn::TrainConfig& train_config,
                       const ContourCorpus& corpus, const nn::EmbeddingRefs& embeddings, int jobs) {
    Checkpoint cp;
    cp.model_config = model_config;
    cp.train_config = train_config;
    cp.schema = schema_name(corpus.schema);
    cp.registry_hash = corpus.registry.hash();
    cp.config_hash = nn::config_hash(model_config, train_config);
    cp.seed = train_config.seed;
    const auto& traits = trait_names(corpus.schema);
    std::vector<std::vector<std::string>> groups;
    if (train_config.multi_head) {
        groups.push_back(traits);
    } else {
        for (const auto& t : traits) groups.push_back({t});
    }
    std::vector<std::size_t> all(corpus.docs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<std::optional<nn::TrainedModel>> trained(groups.size());
    nn::parallel_for(groups.size(), jobs, [&](std::size_t g) {
        trained[g] = nn::train_subset(model_config, train_config, corpus, embeddings, groups[g], all,
                                      derive_seed(train_config.seed, {0xf1a1ULL, g}));
    });
    for (auto& t : trained) cp.models.push_back(std::move(*t));
    return cp;
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vector(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : cp.models) {
        models.push_back({{"traits", m.traits},
                          {"standardizer", {{"mean", vector_json(m.standardizer.mean())},
                                            {"std", vector_json(m.standardizer.stddev())}}},
                          {"epochs_run", m.history.epochs_run},
                          {"model", m.model.to_json()}});
    }
    nlohmann::json j = {{"format", "psycontour-checkpoint"},
                        {"version", 1},
                        {"schema", cp.schema},
                        {"registry_hash", cp.registry_hash},
                        {"config_hash", cp.config_hash},
                        {"seed", cp.seed},
                        {"model_config", cp.model_config.to_json()},
                        {"train_config", cp.train_config.to_json()},
                        {"models", models}};
    write_text(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.at("format").get<std::string>() != "psycontour-checkpoint" || j.at("version").get<int>() != 1) {
            throw DataError(path.string() + ": not a version 1 checkpoint");
        }
        Checkpoint cp;
        cp.schema = j.at("schema").get<std::string>();
        cp.registry_hash = j.at("registry_hash").get<std::string>();
        cp.config_hash = j.at("config_hash").get<std::string>();
        cp.seed = j.at("seed").get<std::uint64_t>();
        cp.model_config = nn::ModelConfig::from_json(j.at("model_config"));
        cp.train_config = nn::TrainConfig::from_json(j.at("train_config"));
        if (nn::config_hash(cp.model_config, cp.train_config) != cp.config_hash) {
            throw DataError(path.string() + ": config hash does not match the stored configuration");
        }
        for (const auto& m : j.at("models")) {
            nn::TrainedModel tm{nn::ContourModel::from_json(m.at("model")),
                                Standardizer(json_vector(m.at("standardizer").at("mean")),
                                             json_vector(m.at("standardizer").at("std"))),
                                m.at("traits").get<std::vector<std::string>>(),
                                {}};
            tm.history.epochs_run = m.at("epochs_run").get<int>();
            cp.models.push_back(std::move(tm));
        }
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed checkpoint: " + e.what());
    }
}

nn::FoldReport evaluate(const Checkpoint& cp, const ContourCorpus& corpus, const nn::EmbeddingRefs& embeddings) {
    if (corpus.registry.hash() != cp.registry_hash) {
        throw DataError("registry hash mismatch: checkpoint " + cp.registry_hash + ", contours " +
                        corpus.registry.hash());
    }
    if (schema_name(corpus.schema) != cp.schema) throw DataError("checkpoint schema differs from the corpus");
    nn::FoldReport report;
    report.kind = "evaluation";
    report.model = encoder_name(cp.model_config.encoder) + "-PSYLING";
    if (cp.model_config.fusion == nn::Fusion::ConcatEmbedding) {
        report.model += "+EMB-" + embedding_mode_name(cp.model_config.embedding_mode);
    }
    report.schema = cp.schema;
    report.traits = trait_names(corpus.schema);
    report.seed = cp.seed;
    report.config_hash = cp.config_hash;
    report.registry_hash = cp.registry_hash;
    std::vector<std::size_t> all(corpus.docs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (const auto& m : cp.models) {
        const auto p = nn::predict_subset(m, corpus, embeddings, all);
        for (std::size_t j = 0; j < m.traits.size(); ++j) {
            const auto labels = corpus.labels(m.traits[j]);
            Eigen::MatrixXd y(static_cast<Eigen::Index>(labels.size()), 1);
            for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = labels[i] != 0;
            nn::FoldScore s;
            s.trait = m.traits[j];
            s.dev_size = labels.size();
            s.dev_accuracy = nn::accuracy(p.col(static_cast<Eigen::Index>(j)), y);
            s.epochs = m.history.epochs_run;
            report.folds.push_back(s);
        }
    }
    report.finalize();
    return report;
}

}  // namespace psycontour::pipeline
