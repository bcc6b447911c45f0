#include "psycontour/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "psycontour/csv.hpp"
#include "psycontour/error.hpp"

namespace psycontour::ensemble {

void StageOneMatrix::validate() const {
    if (probabilities.rows() != static_cast<Eigen::Index>(doc_ids.size()) || labels.size() != doc_ids.size()) {
        throw DataError("stage-one matrix for " + trait + " has inconsistent row counts");
    }
    for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
        for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
            const double p = probabilities(r, c);
            if (!std::isfinite(p)) {
                throw DataError("stage-one matrix for " + trait + " lacks a prediction for document '" +
                                doc_ids[static_cast<std::size_t>(r)] + "' in repetition " + std::to_string(c));
            }
            if (p < 0.0 || p > 1.0) throw DataError("stage-one probability outside [0, 1] for " + trait);
        }
    }
}

StageOneMatrix collect_stage_one(const std::string& trait, const std::vector<std::string>& doc_ids,
                                 const std::vector<int>& labels, int repetitions, int folds, std::uint64_t seed,
                                 const FoldTrainer& trainer, int jobs) {
    if (repetitions < 1) throw UsageError("stage one needs at least one repetition");
    if (doc_ids.size() != labels.size()) throw UsageError("stage one: ids and labels differ in length");
    StageOneMatrix s;
    s.trait = trait;
    s.doc_ids = doc_ids;
    s.labels = labels;
    const auto n = static_cast<Eigen::Index>(doc_ids.size());
    s.probabilities = Eigen::MatrixXd::Constant(n, repetitions, std::numeric_limits<double>::quiet_NaN());
    s.fold_of.resize(static_cast<std::size_t>(repetitions));
    s.train_sets.resize(static_cast<std::size_t>(repetitions));

    struct Task {
        int rep;
        int fold;
        std::vector<std::size_t> dev;
    };
    std::vector<Task> tasks;
    for (int rep = 0; rep < repetitions; ++rep) {
        auto& fold_of = s.fold_of[static_cast<std::size_t>(rep)];
        fold_of = nn::stratified_folds(labels, folds, derive_seed(seed, {static_cast<std::uint64_t>(rep), 0xf01dULL}),
                                       trait);
        auto& sets = s.train_sets[static_cast<std::size_t>(rep)];
        sets.assign(static_cast<std::size_t>(folds), {});
        for (int f = 0; f < folds; ++f) {
            Task t{rep, f, {}};
            for (std::size_t i = 0; i < fold_of.size(); ++i) {
                (fold_of[i] == f ? t.dev : sets[static_cast<std::size_t>(f)]).push_back(i);
            }
            tasks.push_back(std::move(t));
        }
    }
    nn::parallel_for(tasks.size(), jobs, [&](std::size_t ti) {
        const auto& t = tasks[ti];
        const auto& train = s.train_sets[static_cast<std::size_t>(t.rep)][static_cast<std::size_t>(t.fold)];
        const auto p = trainer(train, t.dev,
                               derive_seed(seed, {static_cast<std::uint64_t>(t.rep), static_cast<std::uint64_t>(t.fold)}));
        if (p.size() != t.dev.size()) throw UsageError("fold trainer returned the wrong number of predictions");
        for (std::size_t j = 0; j < t.dev.size(); ++j) {
            s.probabilities(static_cast<Eigen::Index>(t.dev[j]), t.rep) = p[j];
        }
    });
    s.validate();
    return s;
}

StageOneMatrix collect_stage_one(const nn::ModelConfig& model_config, const nn::TrainConfig& train_config,
                                 const ContourCorpus& corpus, const std::string& trait,
                                 const nn::EmbeddingRefs& embeddings, int jobs) {
    std::vector<std::string> ids;
    for (const auto& d : corpus.docs) ids.push_back(d.doc_id);
    const auto labels = corpus.labels(trait);
    FoldTrainer trainer = [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& dev,
                              std::uint64_t seed) {
        const auto trained = nn::train_subset(model_config, train_config, corpus, embeddings, {trait}, train, seed);
        const auto p = nn::predict_subset(trained, corpus, embeddings, dev);
        return std::vector<double>(p.data(), p.data() + p.rows());
    };
    return collect_stage_one(trait, ids, labels, train_config.repetitions, train_config.folds, train_config.seed,
                             trainer, jobs);
}

std::size_t leakage_pairs(const StageOneMatrix& s) {
    std::size_t leaks = 0;
    for (std::size_t rep = 0; rep < s.fold_of.size(); ++rep) {
        const auto& fold_of = s.fold_of[rep];
        for (std::size_t doc = 0; doc < fold_of.size(); ++doc) {
            const auto& train = s.train_sets[rep][static_cast<std::size_t>(fold_of[doc])];
            if (std::find(train.begin(), train.end(), doc) != train.end()) ++leaks;
        }
    }
    return leaks;
}

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

struct Objective {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    double l2;

    // theta = [w; b]
    double value(const Eigen::VectorXd& theta) const {
        const auto d = x.cols();
        const Eigen::VectorXd z = (x * theta.head(d)).array() + theta(d);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            loss += std::max(z(i), 0.0) + std::log1p(std::exp(-std::abs(z(i)))) - y(i) * z(i);
        }
        return loss / static_cast<double>(z.size()) + 0.5 * l2 * theta.head(d).squaredNorm();
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
        const auto d = x.cols();
        const Eigen::VectorXd z = (x * theta.head(d)).array() + theta(d);
        Eigen::VectorXd r(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - y(i);
        const double n = static_cast<double>(z.size());
        Eigen::VectorXd g(d + 1);
        g.head(d) = x.transpose() * r / n + l2 * theta.head(d);
        g(d) = r.sum() / n;
        return g;
    }
};

}  // namespace

double LogisticModel::predict(const Eigen::RowVectorXd& x) const {
    if (x.size() != weights.size()) throw UsageError("logistic model input width mismatch");
    return sigmoid(x.dot(weights) + bias);
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y, const LogisticOptions& options) {
    if (x.rows() != static_cast<Eigen::Index>(y.size()) || y.empty()) throw UsageError("logistic fit: bad shapes");
    bool has[2] = {false, false};
    Eigen::VectorXd yv(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        has[y[i] != 0 ? 1 : 0] = true;
        yv(static_cast<Eigen::Index>(i)) = y[i] != 0 ? 1.0 : 0.0;
    }
    if (!has[0] || !has[1]) throw DataError("logistic regression needs both classes");
    if (!x.allFinite()) throw NumericError("logistic regression input contains non-finite values");

    const Objective obj{x, yv, options.l2};
    const auto d = x.cols();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
    double f = obj.value(theta);
    Eigen::VectorXd g = obj.gradient(theta);
    double step = 1.0;
    constexpr int kMemory = 10;
    std::vector<double> recent{f};
    LogisticModel model;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const double gn = g.norm();
        if (gn < options.tolerance) break;
        const double ref = *std::max_element(recent.begin(), recent.end());
        const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(ref));
        double alpha = step;
        Eigen::VectorXd next;
        double f_next = 0.0;
        for (int bt = 0;; ++bt) {
            next = theta - alpha * g;
            f_next = obj.value(next);
            if (f_next <= ref - 1e-4 * alpha * gn * gn + slack) break;
            alpha *= 0.5;
            if (bt > 60) throw NumericError("logistic regression line search failed");
        }
        const Eigen::VectorXd g_next = obj.gradient(next);
        const Eigen::VectorXd s = next - theta;
        const Eigen::VectorXd dg = g_next - g;
        const double sy = s.dot(dg);
        step = sy > 0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : 1.0;
        theta = next;
        f = f_next;
        g = g_next;
        recent.push_back(f);
        if (recent.size() > kMemory) recent.erase(recent.begin());
    }
    model.weights = theta.head(d);
    model.bias = theta(d);
    model.iterations = it;
    model.gradient_norm = g.norm();
    if (!(model.gradient_norm < options.tolerance)) {
        throw NumericError("logistic regression did not converge (gradient norm " +
                           std::to_string(model.gradient_norm) + ")");
    }
    if (!model.weights.allFinite() || !std::isfinite(model.bias)) throw NumericError("non-finite logistic weights");
    return model;
}

MetaModel train_meta(const std::vector<StageOneMatrix>& stage_one, const LogisticOptions& options) {
    MetaModel m;
    for (const auto& s : stage_one) {
        s.validate();
        m.traits.push_back(s.trait);
        m.models.push_back(fit_logistic(s.probabilities, s.labels, options));
    }
    return m;
}

double predict_meta(const LogisticModel& model, const Eigen::RowVectorXd& row) { return model.predict(row); }

double column_accuracy(const StageOneMatrix& s, std::size_t column) {
    if (column >= s.repetitions()) throw UsageError("stage-one column out of range");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < s.documents(); ++i) {
        const int p = s.probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(column)) >= 0.5;
        hits += p == (s.labels[i] != 0) ? 1 : 0;
    }
    return s.documents() ? static_cast<double>(hits) / static_cast<double>(s.documents()) : 0.0;
}

nn::FoldReport evaluate_meta(const std::vector<StageOneMatrix>& stage_one, int folds, std::uint64_t seed,
                             const LogisticOptions& options) {
    nn::FoldReport report;
    report.kind = "stacking";
    report.model = "Ensemble";
    report.seed = seed;
    for (std::size_t t = 0; t < stage_one.size(); ++t) {
        const auto& s = stage_one[t];
        s.validate();
        report.traits.push_back(s.trait);
        const auto fold_of = nn::stratified_folds(s.labels, folds, derive_seed(seed, {t, 0x6d657461ULL}), s.trait);
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> tr, dv;
            for (std::size_t i = 0; i < fold_of.size(); ++i) {
                (fold_of[i] == f ? dv : tr).push_back(static_cast<Eigen::Index>(i));
            }
            Eigen::MatrixXd x_tr = s.probabilities(tr, Eigen::all);
            std::vector<int> y_tr;
            for (auto i : tr) y_tr.push_back(s.labels[static_cast<std::size_t>(i)]);
            const auto model = fit_logistic(x_tr, y_tr, options);
            auto acc_of = [&](const std::vector<Eigen::Index>& rows) {
                std::size_t hits = 0;
                for (auto i : rows) {
                    const int p = model.predict(s.probabilities.row(i)) >= 0.5;
                    hits += p == (s.labels[static_cast<std::size_t>(i)] != 0) ? 1 : 0;
                }
                return rows.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(rows.size());
            };
            nn::FoldScore score;
            score.fold = f;
            score.trait = s.trait;
            score.train_size = tr.size();
            score.dev_size = dv.size();
            score.train_accuracy = acc_of(tr);
            score.dev_accuracy = acc_of(dv);
            score.epochs = model.iterations;
            report.folds.push_back(score);
        }
    }
    report.finalize();
    return report;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError("stage-one CSV line " + std::to_string(line) + ": bad number '" + s + "'");
    }
    return v;
}

}  // namespace

void write_stage_one(const std::filesystem::path& path, const std::vector<StageOneMatrix>& stage_one) {
    if (stage_one.empty()) throw UsageError("nothing to write");
    const auto reps = stage_one.front().repetitions();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "doc_id,trait";
    for (std::size_t j = 0; j < reps; ++j) out << ",rep_" << j;
    out << ",label\n";
    for (const auto& s : stage_one) {
        if (s.repetitions() != reps) throw UsageError("stage-one matrices differ in repetition count");
        for (std::size_t i = 0; i < s.documents(); ++i) {
            out << csv_field(s.doc_ids[i]) << ',' << csv_field(s.trait);
            for (std::size_t j = 0; j < reps; ++j) {
                out << ',' << format_double(s.probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
            out << ',' << s.labels[i] << '\n';
        }
    }
}

std::vector<StageOneMatrix> read_stage_one(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    CsvReader reader(in);
    CsvRow row;
    if (!reader.next(row)) throw DataError(path.string() + ": empty stage-one file");
    const auto& h = row.fields;
    if (h.size() < 4 || h[0] != "doc_id" || h[1] != "trait" || h.back() != "label") {
        throw DataError(path.string() + ": header must be doc_id,trait,rep_0..,label");
    }
    const std::size_t reps = h.size() - 3;
    for (std::size_t j = 0; j < reps; ++j) {
        if (h[2 + j] != "rep_" + std::to_string(j)) throw DataError(path.string() + ": unexpected column " + h[2 + j]);
    }
    std::vector<StageOneMatrix> out;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<std::vector<double>>> values;
    while (reader.next(row)) {
        if (row.fields.size() == 1 && row.fields[0].empty()) continue;
        if (row.fields.size() != h.size()) {
            throw DataError(path.string() + ":" + std::to_string(row.line) + ": expected " +
                            std::to_string(h.size()) + " fields");
        }
        const auto& trait = row.fields[1];
        auto it = index.find(trait);
        if (it == index.end()) {
            it = index.emplace(trait, out.size()).first;
            out.emplace_back();
            out.back().trait = trait;
            values.emplace_back();
        }
        auto& s = out[it->second];
        s.doc_ids.push_back(row.fields[0]);
        std::vector<double> v(reps);
        for (std::size_t j = 0; j < reps; ++j) v[j] = parse_double(row.fields[2 + j], row.line);
        values[it->second].push_back(std::move(v));
        const auto& label = row.fields.back();
        if (label != "0" && label != "1") {
            throw DataError(path.string() + ":" + std::to_string(row.line) + ": label must be 0 or 1");
        }
        s.labels.push_back(label == "1");
    }
    for (std::size_t t = 0; t < out.size(); ++t) {
        auto& s = out[t];
        s.probabilities.resize(static_cast<Eigen::Index>(s.doc_ids.size()), static_cast<Eigen::Index>(reps));
        for (std::size_t i = 0; i < s.doc_ids.size(); ++i) {
            for (std::size_t j = 0; j < reps; ++j) {
                s.probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[t][i][j];
            }
        }
        s.validate();
    }
    return out;
}

}  // namespace psycontour::ensemble
