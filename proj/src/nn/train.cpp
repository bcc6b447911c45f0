#include "psycontour/nn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "psycontour/error.hpp"
#include "psycontour/hash.hpp"
#include "psycontour/nn/adamw.hpp"

namespace psycontour::nn {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
    if (!(embedding_learning_rate > 0.0)) throw UsageError("embedding learning rate must be > 0");
    if (weight_decay < 0.0) throw UsageError("weight_decay must be >= 0");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (folds < 2) throw UsageError("folds must be >= 2");
    if (repetitions < 1) throw UsageError("repetitions must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"embedding_learning_rate", embedding_learning_rate},
            {"weight_decay", weight_decay},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"folds", folds},
            {"repetitions", repetitions},
            {"seed", seed},
            {"stop_at_train_accuracy", stop_at_train_accuracy},
            {"multi_head", multi_head}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.embedding_learning_rate = j.at("embedding_learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.folds = j.at("folds").get<int>();
    c.repetitions = j.at("repetitions").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.stop_at_train_accuracy = j.value("stop_at_train_accuracy", 0.0);
    c.multi_head = j.value("multi_head", false);
    c.validate();
    return c;
}

double accuracy(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& targets) {
    if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols()) {
        throw UsageError("accuracy: shape mismatch");
    }
    if (probabilities.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
        for (Eigen::Index r = 0; r < targets.rows(); ++r) {
            const int predicted = probabilities(r, c) >= 0.5 ? 1 : 0;
            hits += predicted == static_cast<int>(targets(r, c)) ? 1 : 0;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(probabilities.size());
}

FitHistory fit(ContourModel& model, const std::vector<TrainSample>& samples, const TrainConfig& config, Rng& rng) {
    config.validate();
    if (samples.empty()) throw DataError("no training samples");
    const auto outputs = model.config().outputs;
    for (const auto& s : samples) {
        if (s.targets.size() != outputs) throw UsageError("training target width does not match model outputs");
    }
    auto& params = model.params();
    std::vector<std::size_t> trainable;
    std::vector<Matrix*> ptrs;
    std::vector<double> lrs;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        trainable.push_back(i);
        ptrs.push_back(&params[i].value);
        lrs.push_back(params[i].group == ParamGroup::Embedding ? config.embedding_learning_rate : config.learning_rate);
    }
    AdamWOptions opt;
    opt.weight_decay = config.weight_decay;
    AdamW optimizer(opt);

    const std::size_t n = samples.size();
    std::vector<ModelInput> all(n);
    Eigen::MatrixXd all_targets(static_cast<Eigen::Index>(n), outputs);
    for (std::size_t i = 0; i < n; ++i) {
        all[i] = ModelInput{samples[i].contour, samples[i].embedding};
        all_targets.row(static_cast<Eigen::Index>(i)) = samples[i].targets;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const auto bs = static_cast<std::size_t>(config.batch_size);

    FitHistory history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        std::vector<std::pair<std::size_t, std::size_t>> batches;
        for (std::size_t start = 0; start < n; start += bs) batches.emplace_back(start, std::min(n, start + bs));
        // Batch normalization needs at least two rows.
        if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
            batches[batches.size() - 2].second = n;
            batches.pop_back();
        }
        double epoch_loss = 0.0;
        for (const auto& [start, end] : batches) {
            const auto B = end - start;
            std::vector<ModelInput> batch(B);
            Eigen::MatrixXd targets(static_cast<Eigen::Index>(B), outputs);
            for (std::size_t i = 0; i < B; ++i) {
                const auto& s = samples[order[start + i]];
                batch[i] = ModelInput{s.contour, s.embedding};
                targets.row(static_cast<Eigen::Index>(i)) = s.targets;
            }
            Graph g;
            const auto bound = model.bind(g);
            const auto f = model.forward(g, bound, batch, true, &rng);
            const auto loss = g.bce_with_logits(f.logits, targets);
            const double lv = g.value(loss)(0, 0);
            if (!std::isfinite(lv)) throw NumericError("training loss became non-finite");
            g.backward(loss);
            std::vector<Matrix> grads;
            grads.reserve(trainable.size());
            for (auto i : trainable) grads.push_back(g.grad(bound[i]));
            optimizer.step(ptrs, grads, lrs);
            model.update_running_stats(f, B);
            epoch_loss += lv * static_cast<double>(B);
        }
        params.check_finite();
        history.loss.push_back(epoch_loss / static_cast<double>(n));
        history.epochs_run = epoch + 1;
        if (config.track_accuracy || config.stop_at_train_accuracy > 0.0) {
            const double acc = accuracy(model.predict(all), all_targets);
            history.train_accuracy.push_back(acc);
            if (config.stop_at_train_accuracy > 0.0 && acc >= config.stop_at_train_accuracy) break;
        }
    }
    return history;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int k, std::uint64_t seed,
                                  const std::string& trait) {
    if (k < 2) throw UsageError("stratified folds need k >= 2");
    std::map<int, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
    if (classes.size() < 2) throw DataError("trait " + trait + " has a single class; cannot train a classifier");
    for (const auto& [label, members] : classes) {
        if (members.size() < static_cast<std::size_t>(k)) {
            throw DataError("trait " + trait + ": class " + std::to_string(label) + " has " +
                            std::to_string(members.size()) + " documents, fewer than " + std::to_string(k) +
                            " folds");
        }
    }
    Rng rng(seed);
    std::vector<int> fold(labels.size(), 0);
    std::size_t offset = 0;
    for (auto& [label, members] : classes) {
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i) {
            fold[members[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
        }
        offset += members.size();
    }
    return fold;
}

ModelConfig resolve_config(ModelConfig config, const ContourCorpus& corpus, const EmbeddingRefs& embeddings,
                           std::size_t outputs) {
    if (corpus.docs.empty()) throw DataError("empty corpus");
    config.input_dim = static_cast<int>(corpus.docs.front().values.cols());
    config.outputs = static_cast<int>(outputs);
    if (config.fusion == Fusion::ConcatEmbedding) {
        if (embeddings.size() != corpus.docs.size()) throw DataError("embedding fusion requires embeddings for every document");
        for (std::size_t i = 0; i < embeddings.size(); ++i) {
            if (embeddings[i] == nullptr) throw DataError("no embedding for document " + corpus.docs[i].doc_id);
        }
        config.embedding_dim = static_cast<int>(embeddings.front()->size());
    }
    config.validate();
    return config;
}

namespace {

Eigen::RowVectorXd targets_for(const ContourMatrix& doc, const std::vector<std::string>& traits) {
    Eigen::RowVectorXd t(static_cast<Eigen::Index>(traits.size()));
    for (std::size_t j = 0; j < traits.size(); ++j) {
        const auto it = doc.labels.find(traits[j]);
        if (it == doc.labels.end()) throw DataError("document '" + doc.doc_id + "' lacks label '" + traits[j] + "'");
        t(static_cast<Eigen::Index>(j)) = it->second != 0 ? 1.0 : 0.0;
    }
    return t;
}

const Eigen::VectorXd* embedding_at(const EmbeddingRefs& e, std::size_t i) {
    return e.empty() ? nullptr : e[i];
}

}  // namespace

TrainedModel train_subset(const ModelConfig& model_config, const TrainConfig& train_config,
                          const ContourCorpus& corpus, const EmbeddingRefs& embeddings,
                          const std::vector<std::string>& traits, const std::vector<std::size_t>& train_idx,
                          std::uint64_t seed) {
    if (train_idx.empty()) throw DataError("empty training set");
    for (std::size_t j = 0; j < traits.size(); ++j) {
        int seen[2] = {0, 0};
        for (auto i : train_idx) {
            const auto t = targets_for(corpus.docs[i], {traits[j]});
            ++seen[t(0) != 0.0 ? 1 : 0];
        }
        if (seen[0] == 0 || seen[1] == 0) {
            throw DataError("trait " + traits[j] + " has a single class in a training fold");
        }
    }
    std::vector<const ContourMatrix*> ptrs;
    ptrs.reserve(train_idx.size());
    for (auto i : train_idx) ptrs.push_back(&corpus.docs[i]);
    Standardizer standardizer = Standardizer::fit(ptrs);

    std::vector<Eigen::MatrixXd> z;
    z.reserve(train_idx.size());
    for (auto i : train_idx) z.push_back(standardizer.apply(corpus.docs[i].values));
    std::vector<TrainSample> samples(train_idx.size());
    for (std::size_t s = 0; s < train_idx.size(); ++s) {
        samples[s].contour = &z[s];
        samples[s].embedding = embedding_at(embeddings, train_idx[s]);
        samples[s].targets = targets_for(corpus.docs[train_idx[s]], traits);
    }
    ModelConfig cfg = resolve_config(model_config, corpus, embeddings, traits.size());
    cfg.seed = derive_seed(seed, {1});
    TrainedModel out{ContourModel(cfg), std::move(standardizer), traits, {}};
    Rng rng(derive_seed(seed, {2}));
    out.history = fit(out.model, samples, train_config, rng);
    return out;
}

Eigen::MatrixXd predict_subset(const TrainedModel& trained, const ContourCorpus& corpus,
                               const EmbeddingRefs& embeddings, const std::vector<std::size_t>& idx) {
    constexpr std::size_t kChunk = 256;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), trained.model.config().outputs);
    for (std::size_t start = 0; start < idx.size(); start += kChunk) {
        const auto end = std::min(idx.size(), start + kChunk);
        std::vector<Eigen::MatrixXd> z;
        z.reserve(end - start);
        for (std::size_t s = start; s < end; ++s) z.push_back(trained.standardizer.apply(corpus.docs[idx[s]].values));
        std::vector<ModelInput> batch(end - start);
        for (std::size_t s = start; s < end; ++s) {
            batch[s - start] = ModelInput{&z[s - start], embedding_at(embeddings, idx[s])};
        }
        out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
            trained.model.predict(batch);
    }
    return out;
}

void FoldReport::finalize() {
    mean_accuracy.assign(traits.size(), 0.0);
    std::vector<std::size_t> count(traits.size(), 0);
    for (const auto& f : folds) {
        const auto it = std::find(traits.begin(), traits.end(), f.trait);
        if (it == traits.end()) throw UsageError("fold score for unknown trait " + f.trait);
        const auto j = static_cast<std::size_t>(it - traits.begin());
        mean_accuracy[j] += f.dev_accuracy;
        ++count[j];
    }
    average = 0.0;
    for (std::size_t j = 0; j < traits.size(); ++j) {
        if (count[j] > 0) mean_accuracy[j] /= static_cast<double>(count[j]);
        average += mean_accuracy[j];
    }
    if (!traits.empty()) average /= static_cast<double>(traits.size());
}

nlohmann::json FoldReport::to_json() const {
    nlohmann::json fj = nlohmann::json::array();
    for (const auto& f : folds) {
        fj.push_back({{"repetition", f.repetition},
                      {"fold", f.fold},
                      {"trait", f.trait},
                      {"train_size", f.train_size},
                      {"dev_size", f.dev_size},
                      {"train_accuracy", f.train_accuracy},
                      {"dev_accuracy", f.dev_accuracy},
                      {"final_loss", f.final_loss},
                      {"epochs", f.epochs}});
    }
    nlohmann::json means = nlohmann::json::object();
    for (std::size_t j = 0; j < traits.size(); ++j) means[traits[j]] = mean_accuracy[j];
    return {{"kind", kind},
            {"model", model},
            {"schema", schema},
            {"traits", traits},
            {"mean_accuracy", means},
            {"average", average},
            {"seed", seed},
            {"config_hash", config_hash},
            {"registry_hash", registry_hash},
            {"folds", fj}};
}

FoldReport FoldReport::from_json(const nlohmann::json& j) {
    FoldReport r;
    r.kind = j.at("kind").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.schema = j.at("schema").get<std::string>();
    r.traits = j.at("traits").get<std::vector<std::string>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.registry_hash = j.at("registry_hash").get<std::string>();
    for (const auto& f : j.at("folds")) {
        FoldScore s;
        s.repetition = f.at("repetition").get<int>();
        s.fold = f.at("fold").get<int>();
        s.trait = f.at("trait").get<std::string>();
        s.train_size = f.at("train_size").get<std::size_t>();
        s.dev_size = f.at("dev_size").get<std::size_t>();
        s.train_accuracy = f.at("train_accuracy").get<double>();
        s.dev_accuracy = f.at("dev_accuracy").get<double>();
        s.final_loss = f.at("final_loss").get<double>();
        s.epochs = f.at("epochs").get<int>();
        r.folds.push_back(s);
    }
    r.finalize();
    return r;
}

std::string FoldReport::dump() const { return to_json().dump(2) + "\n"; }

std::string FoldReport::table() const {
    std::string header = "Model";
    std::string row = model.empty() ? "-" : model;
    const std::size_t width = std::max<std::size_t>(row.size(), 5) + 2;
    header.resize(width, ' ');
    row.resize(width, ' ');
    char buf[32];
    for (std::size_t j = 0; j < traits.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%8s", traits[j].c_str());
        header += buf;
        std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * mean_accuracy[j]);
        row += buf;
    }
    std::snprintf(buf, sizeof buf, "%8s", "Avg");
    header += buf;
    std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * average);
    row += buf;
    return header + "\n" + row + "\n";
}

std::string config_hash(const ModelConfig& model_config, const TrainConfig& train_config) {
    const std::string text = model_config.to_json().dump() + "|" + train_config.to_json().dump();
    return hex64(fnv1a(text, fnv1a("psycontour-config-v1")));
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const auto i = next.fetch_add(1);
                if (i >= n) return;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (failure) return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

std::string model_label(const ModelConfig& c) {
    std::string s = encoder_name(c.encoder) + "-PSYLING";
    if (c.fusion == Fusion::ConcatEmbedding) s += "+EMB-" + embedding_mode_name(c.embedding_mode);
    return s;
}

}  // namespace

FoldReport cross_validate(const ModelConfig& model_config, const TrainConfig& train_config,
                          const ContourCorpus& corpus, const EmbeddingRefs& embeddings, int jobs) {
    train_config.validate();
    const auto& traits = trait_names(corpus.schema);
    std::vector<std::vector<std::string>> groups;
    if (train_config.multi_head) {
        groups.push_back(traits);
    } else {
        for (const auto& t : traits) groups.push_back({t});
    }
    resolve_config(model_config, corpus, embeddings, groups.front().size());

    struct Task {
        int rep;
        int fold;
        std::size_t group;
        std::vector<std::size_t> train, dev;
    };
    std::vector<Task> tasks;
    const int k = train_config.folds;
    for (int rep = 0; rep < train_config.repetitions; ++rep) {
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            // Multi-head models stratify on their first trait.
            const auto& strat_trait = groups[gi].front();
            const auto folds = stratified_folds(corpus.labels(strat_trait), k,
                                                derive_seed(train_config.seed, {static_cast<std::uint64_t>(rep), gi,
                                                                                0xf01dULL}),
                                                strat_trait);
            for (int f = 0; f < k; ++f) {
                Task t{rep, f, gi, {}, {}};
                for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? t.dev : t.train).push_back(i);
                tasks.push_back(std::move(t));
            }
        }
    }

    std::vector<std::vector<FoldScore>> scores(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t ti) {
        const auto& t = tasks[ti];
        const auto& tr = groups[t.group];
        const auto seed = derive_seed(train_config.seed, {static_cast<std::uint64_t>(t.rep),
                                                          static_cast<std::uint64_t>(t.fold), t.group});
        const auto trained = train_subset(model_config, train_config, corpus, embeddings, tr, t.train, seed);
        const auto p_train = predict_subset(trained, corpus, embeddings, t.train);
        const auto p_dev = predict_subset(trained, corpus, embeddings, t.dev);
        for (std::size_t j = 0; j < tr.size(); ++j) {
            Eigen::MatrixXd y_train(static_cast<Eigen::Index>(t.train.size()), 1);
            Eigen::MatrixXd y_dev(static_cast<Eigen::Index>(t.dev.size()), 1);
            for (std::size_t s = 0; s < t.train.size(); ++s) {
                y_train(static_cast<Eigen::Index>(s), 0) = corpus.docs[t.train[s]].labels.at(tr[j]) != 0;
            }
            for (std::size_t s = 0; s < t.dev.size(); ++s) {
                y_dev(static_cast<Eigen::Index>(s), 0) = corpus.docs[t.dev[s]].labels.at(tr[j]) != 0;
            }
            FoldScore s;
            s.repetition = t.rep;
            s.fold = t.fold;
            s.trait = tr[j];
            s.train_size = t.train.size();
            s.dev_size = t.dev.size();
            s.train_accuracy = accuracy(p_train.col(static_cast<Eigen::Index>(j)), y_train);
            s.dev_accuracy = accuracy(p_dev.col(static_cast<Eigen::Index>(j)), y_dev);
            s.final_loss = trained.history.loss.empty() ? 0.0 : trained.history.loss.back();
            s.epochs = trained.history.epochs_run;
            scores[ti].push_back(s);
        }
    });

    FoldReport report;
    report.model = model_label(model_config);
    report.schema = schema_name(corpus.schema);
    report.traits = traits;
    report.seed = train_config.seed;
    report.config_hash = config_hash(model_config, train_config);
    report.registry_hash = corpus.registry.hash();
    for (auto& s : scores) {
        for (auto& f : s) report.folds.push_back(std::move(f));
    }
    report.finalize();
    return report;
}

}  // namespace psycontour::nn
