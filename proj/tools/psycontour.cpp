#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include "psycontour/contours.hpp"
#include "psycontour/embeddings.hpp"
#include "psycontour/ensemble.hpp"
#include "psycontour/error.hpp"
#include "psycontour/explain.hpp"
#include "psycontour/pipeline.hpp"
#include "psycontour/text.hpp"

namespace fs = std::filesystem;
using namespace psycontour;

namespace {

struct ModelFlags {
    std::string encoder = "ATTN";
    int layers = 3;
    int hidden = 512;
    double dropout = 0.1;
    int classifier_layers = 3;
    int classifier_hidden = 512;
    int max_sentences = 0;  // 0: 64 for Big Five, 128 for MBTI
    std::string fusion = "none";
    std::string embedding_mode = "FB";
    std::string embeddings;
    double lr = 0.0;  // 0: 8e-4, or 8e-5 with an FT adapter
    double embedding_lr = 2e-5;
    double weight_decay = 1e-4;
    int epochs = 30;
    int batch_size = 32;
    int folds = 10;
    int repetitions = 10;
    bool multi_head = false;
};

struct RunConfig {
    std::uint64_t seed = 0;
    int jobs = 0;  // 0: all cores for analyze, 1 otherwise
    std::string out = "out";
    std::string config;

    std::string data, format = "essays-csv", schema, manifest, registry_config, conllu, columns;
    std::string input, checkpoint, stage_one;
    int meta_folds = 10;
    bool diffs = false;
    int top_k = 20;
    ModelFlags model;
};

void add_model_flags(CLI::App* cmd, ModelFlags& m) {
    cmd->add_option("--encoder", m.encoder, "BLSTM or ATTN");
    cmd->add_option("--layers", m.layers, "stacked BLSTM layers");
    cmd->add_option("--hidden", m.hidden, "hidden size per direction");
    cmd->add_option("--dropout", m.dropout);
    cmd->add_option("--classifier-layers", m.classifier_layers, "linear layers in the classifier");
    cmd->add_option("--classifier-hidden", m.classifier_hidden);
    cmd->add_option("--max-sentences", m.max_sentences, "truncation length (default 64 Big Five, 128 MBTI)");
    cmd->add_option("--fusion", m.fusion, "none or concat-embedding");
    cmd->add_option("--embedding-mode", m.embedding_mode, "FB (frozen) or FT (trainable adapter)");
    cmd->add_option("--embeddings", m.embeddings, "embedding JSON-lines file");
    cmd->add_option("--lr", m.lr, "learning rate (default 8e-4; 8e-5 with an FT adapter)");
    cmd->add_option("--embedding-lr", m.embedding_lr, "adapter learning rate");
    cmd->add_option("--weight-decay", m.weight_decay);
    cmd->add_option("--epochs", m.epochs);
    cmd->add_option("--batch-size", m.batch_size);
    cmd->add_option("--folds", m.folds);
    cmd->add_option("--repetitions", m.repetitions);
    cmd->add_flag("--multi-head", m.multi_head, "one shared model with a head per trait");
}

// Values from the config file replace flag values. Keys are long option names without
// dashes; [section] headers are ignored.
void apply_config_file(const std::string& path, CLI::App& app) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#' || t.front() == ';' || t.front() == '[') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(trim(t.substr(0, eq)));
        std::string value(trim(t.substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        CLI::Option* opt = nullptr;
        for (auto* sub : app.get_subcommands()) {
            try {
                opt = sub->get_option("--" + key);
                break;
            } catch (const CLI::OptionNotFound&) {
            }
        }
        if (opt == nullptr) {
            try {
                opt = app.get_option("--" + key);
            } catch (const CLI::OptionNotFound&) {
                throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        }
        opt->clear();
        opt->add_result(value);
        opt->run_callback();
    }
}

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.out); }

ContourCorpus load_input(const RunConfig& cfg) {
    if (cfg.input.empty()) throw UsageError("--input (an analyze output directory) is required");
    const fs::path dir(cfg.input);
    return load_corpus(dir / "contours.jsonl", dir / "registry.json");
}

struct ModelSetup {
    nn::ModelConfig model;
    nn::TrainConfig train;
    std::optional<EmbeddingFile> embeddings;
    nn::EmbeddingRefs refs;
};

ModelSetup model_setup(const RunConfig& cfg, const ContourCorpus& corpus) {
    const auto& m = cfg.model;
    ModelSetup s;
    s.model.encoder = nn::parse_encoder(m.encoder);
    s.model.layers = m.layers;
    s.model.hidden = m.hidden;
    s.model.dropout = m.dropout;
    s.model.classifier_layers = m.classifier_layers;
    s.model.classifier_hidden = m.classifier_hidden;
    s.model.max_sentences = m.max_sentences > 0 ? m.max_sentences : (corpus.schema == Schema::MBTI ? 128 : 64);
    s.model.fusion = nn::parse_fusion(m.fusion);
    s.model.embedding_mode = nn::parse_embedding_mode(m.embedding_mode);
    s.model.seed = cfg.seed;
    const bool adapter =
        s.model.fusion == nn::Fusion::ConcatEmbedding && s.model.embedding_mode == nn::EmbeddingMode::Adapter;
    s.train.learning_rate = m.lr > 0.0 ? m.lr : (adapter ? 8e-5 : 8e-4);
    s.train.embedding_learning_rate = m.embedding_lr;
    s.train.weight_decay = m.weight_decay;
    s.train.epochs = m.epochs;
    s.train.batch_size = m.batch_size;
    s.train.folds = m.folds;
    s.train.repetitions = m.repetitions;
    s.train.seed = cfg.seed;
    s.train.multi_head = m.multi_head;
    s.train.validate();
    if (s.model.fusion == nn::Fusion::ConcatEmbedding) {
        if (m.embeddings.empty()) throw UsageError("--fusion concat-embedding needs --embeddings");
        s.embeddings = load_embeddings(m.embeddings);
        s.refs = align_embeddings(corpus, *s.embeddings);
    }
    s.model = nn::resolve_config(s.model, corpus, s.refs, m.multi_head ? trait_names(corpus.schema).size() : 1);
    return s;
}

int jobs_for(const RunConfig& cfg, bool analyze) {
    if (cfg.jobs > 0) return cfg.jobs;
    if (!analyze) return 1;
    return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

void cmd_analyze(const RunConfig& cfg) {
    if (cfg.data.empty()) throw UsageError("--data is required");
    pipeline::AnalyzeOptions o;
    o.dataset = cfg.data;
    o.format = parse_format(cfg.format);
    o.schema = cfg.schema.empty() ? (o.format == DatasetFormat::MbtiCsv ? Schema::MBTI : Schema::BigFive)
                                  : parse_schema(cfg.schema);
    o.manifest = cfg.manifest;
    o.registry_config = cfg.registry_config;
    o.conllu = cfg.conllu;
    o.columns = cfg.columns;
    o.seed = cfg.seed;
    o.jobs = jobs_for(cfg, true);
    const auto result = pipeline::analyze(o);
    pipeline::write_analysis(out_dir(cfg), result, cfg.seed);
    for (const auto& w : result.summary.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << result.summary.text();
}

void cmd_train(const RunConfig& cfg) {
    const auto corpus = load_input(cfg);
    const auto setup = model_setup(cfg, corpus);
    const int jobs = jobs_for(cfg, false);
    const auto report = nn::cross_validate(setup.model, setup.train, corpus, setup.refs, jobs);
    const auto checkpoint = pipeline::train_final(setup.model, setup.train, corpus, setup.refs, jobs);
    fs::create_directories(out_dir(cfg));
    pipeline::write_text(out_dir(cfg) / "fold_report.json", report.dump());
    pipeline::write_text(out_dir(cfg) / "fold_report.txt", report.table());
    pipeline::save_checkpoint(out_dir(cfg) / "checkpoint.json", checkpoint);
    std::cout << report.table();
}

void cmd_eval(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw UsageError("--checkpoint is required");
    const auto corpus = load_input(cfg);
    const auto checkpoint = pipeline::load_checkpoint(cfg.checkpoint);
    std::optional<EmbeddingFile> emb;
    nn::EmbeddingRefs refs;
    if (checkpoint.model_config.fusion == nn::Fusion::ConcatEmbedding) {
        if (cfg.model.embeddings.empty()) throw UsageError("this checkpoint needs --embeddings");
        emb = load_embeddings(cfg.model.embeddings);
        refs = align_embeddings(corpus, *emb);
    }
    const auto report = pipeline::evaluate(checkpoint, corpus, refs);
    fs::create_directories(out_dir(cfg));
    pipeline::write_text(out_dir(cfg) / "eval_report.json", report.dump());
    pipeline::write_text(out_dir(cfg) / "eval_report.txt", report.table());
    std::cout << report.table();
}

void cmd_stack(const RunConfig& cfg) {
    std::vector<ensemble::StageOneMatrix> stage_one;
    nlohmann::json provenance;
    if (!cfg.stage_one.empty()) {
        stage_one = ensemble::read_stage_one(cfg.stage_one);
        fs::path sidecar = cfg.stage_one;
        sidecar.replace_extension(".json");
        if (!fs::exists(sidecar)) throw DataError("missing stage-one provenance file " + sidecar.string());
        std::ifstream in(sidecar);
        try {
            provenance = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(sidecar.string() + ": " + e.what());
        }
    } else {
        const auto corpus = load_input(cfg);
        const auto setup = model_setup(cfg, corpus);
        for (const auto& trait : trait_names(corpus.schema)) {
            stage_one.push_back(ensemble::collect_stage_one(setup.model, setup.train, corpus, trait, setup.refs,
                                                            jobs_for(cfg, false)));
            if (const auto leaks = ensemble::leakage_pairs(stage_one.back()); leaks != 0) {
                throw NumericError("out-of-fold audit found " + std::to_string(leaks) + " leaking predictions");
            }
        }
        provenance = {{"schema", schema_name(corpus.schema)},
                      {"registry_hash", corpus.registry.hash()},
                      {"config_hash", nn::config_hash(setup.model, setup.train)},
                      {"seed", cfg.seed}};
        fs::create_directories(out_dir(cfg));
        ensemble::write_stage_one(out_dir(cfg) / "stage_one.csv", stage_one);
        pipeline::write_text(out_dir(cfg) / "stage_one.json", provenance.dump(2) + "\n");
    }
    auto report = ensemble::evaluate_meta(stage_one, cfg.meta_folds, cfg.seed);
    report.schema = provenance.value("schema", "");
    report.registry_hash = provenance.value("registry_hash", "");
    report.config_hash = provenance.value("config_hash", "");
    fs::create_directories(out_dir(cfg));
    pipeline::write_text(out_dir(cfg) / "meta_report.json", report.dump());
    pipeline::write_text(out_dir(cfg) / "meta_report.txt", report.table());
    std::cout << report.table();
}

void cmd_explain(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw UsageError("--checkpoint is required");
    if (cfg.top_k < 1) throw UsageError("--top-k must be >= 1");
    const auto corpus = load_input(cfg);
    const auto checkpoint = pipeline::load_checkpoint(cfg.checkpoint);
    if (corpus.registry.hash() != checkpoint.registry_hash) {
        throw DataError("registry hash mismatch between checkpoint and contours");
    }
    std::optional<EmbeddingFile> emb;
    nn::EmbeddingRefs refs;
    if (checkpoint.model_config.fusion == nn::Fusion::ConcatEmbedding) {
        if (cfg.model.embeddings.empty()) throw UsageError("this checkpoint needs --embeddings");
        emb = load_embeddings(cfg.model.embeddings);
        refs = align_embeddings(corpus, *emb);
    }
    explain::ImportanceReport report;
    report.groups = explain::explain_groups(corpus.registry);
    report.seed = cfg.seed;
    report.config_hash = checkpoint.config_hash;
    report.registry_hash = checkpoint.registry_hash;
    const int jobs = jobs_for(cfg, false);
    for (const auto& trait : trait_names(corpus.schema)) {
        const auto [trained, column] = checkpoint.find(trait);
        std::vector<explain::LocalExplanation> local(corpus.docs.size());
        nn::parallel_for(corpus.docs.size(), jobs, [&, trained = trained, column = column](std::size_t i) {
            const auto* e = refs.empty() ? nullptr : refs[i];
            explain::ProbabilityFn fn = [&](const Eigen::MatrixXd& z) {
                return trained->model.predict({nn::ModelInput{&z, e}})(0, static_cast<Eigen::Index>(column));
            };
            const auto z = trained->standardizer.apply(corpus.docs[i].values);
            local[i] = explain::explain_instance(fn, z, corpus.registry);
        });
        report.traits.push_back(trait);
        report.importance.push_back(explain::global_importance(local));
    }
    fs::create_directories(out_dir(cfg));
    explain::write_importance_csv(out_dir(cfg) / "importance.csv", report);
    explain::write_importance_plot(out_dir(cfg) / "importance_plot.json", report);
    if (cfg.diffs) {
        const auto standardizer = Standardizer::fit(corpus.docs);
        std::vector<Eigen::MatrixXd> z;
        for (const auto& d : corpus.docs) z.push_back(standardizer.apply(d.values));
        std::vector<explain::TraitDiffs> diffs;
        for (const auto& trait : trait_names(corpus.schema)) {
            diffs.push_back(explain::trait_feature_diffs(z, corpus.labels(trait), corpus.registry, trait,
                                                         static_cast<std::size_t>(cfg.top_k)));
        }
        explain::write_diffs_plot(out_dir(cfg) / "feature_diffs.json", diffs, corpus.registry, cfg.seed);
    }
    std::ifstream csv(out_dir(cfg) / "importance.csv");
    std::cout << csv.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Psycholinguistic text contours: analyze, train, evaluate, stack and explain"};
    app.require_subcommand(1);
    RunConfig cfg;
    app.add_option("--seed", cfg.seed, "random seed recorded in every artifact");
    app.add_option("--jobs", cfg.jobs, "worker threads (default: all cores for analyze, 1 otherwise)");
    app.add_option("--out", cfg.out, "output directory");
    app.add_option("--config", cfg.config, "key = value file whose entries override flags");

    auto* analyze = app.add_subcommand("analyze", "measure sentence-level feature contours");
    analyze->add_option("--data", cfg.data, "dataset CSV");
    analyze->add_option("--format", cfg.format, "essays-csv or mbti-csv");
    analyze->add_option("--schema", cfg.schema, "bigfive or mbti (default from format)");
    analyze->add_option("--manifest", cfg.manifest, "resource manifest");
    analyze->add_option("--registry-config", cfg.registry_config, "feature registry config");
    analyze->add_option("--conllu", cfg.conllu, "dependency parses in CoNLL-U");
    analyze->add_option("--columns", cfg.columns, "essays column mapping");

    auto* train = app.add_subcommand("train", "cross-validate and fit final models");
    train->add_option("--input", cfg.input, "analyze output directory");
    add_model_flags(train, cfg.model);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on analyzed contours");
    eval->add_option("--input", cfg.input, "analyze output directory");
    eval->add_option("--checkpoint", cfg.checkpoint, "checkpoint.json from train");
    eval->add_option("--embeddings", cfg.model.embeddings, "embedding file for fused checkpoints");

    auto* stack = app.add_subcommand("stack", "two-stage stacking over repeated cross-validation");
    stack->add_option("--input", cfg.input, "analyze output directory");
    stack->add_option("--stage-one", cfg.stage_one, "reuse a stage-one CSV instead of retraining");
    stack->add_option("--meta-folds", cfg.meta_folds, "folds for the meta-model evaluation");
    add_model_flags(stack, cfg.model);

    auto* expl = app.add_subcommand("explain", "feature-group importance and feature differences");
    expl->add_option("--input", cfg.input, "analyze output directory");
    expl->add_option("--checkpoint", cfg.checkpoint, "checkpoint.json from train");
    expl->add_option("--embeddings", cfg.model.embeddings, "embedding file for fused checkpoints");
    expl->add_flag("--diffs", cfg.diffs, "also write per-feature class differences");
    expl->add_option("--top-k", cfg.top_k, "features per group in the differences output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        if (!cfg.config.empty()) apply_config_file(cfg.config, app);
        if (analyze->parsed()) cmd_analyze(cfg);
        if (train->parsed()) cmd_train(cfg);
        if (eval->parsed()) cmd_eval(cfg);
        if (stack->parsed()) cmd_stack(cfg);
        if (expl->parsed()) cmd_explain(cfg);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
