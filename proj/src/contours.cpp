#include "psycontour/contours.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "psycontour/error.hpp"

namespace psycontour {

ContourMatrix build_contours(const Document& doc, const std::vector<Sentence>& sentences,
                             const FeatureExtractor& extractor) {
    if (sentences.empty()) throw DataError("document '" + doc.id + "' has no sentences");
    const auto rows = extractor.document_rows(sentences);
    ContourMatrix m;
    m.doc_id = doc.id;
    m.labels = doc.labels;
    m.registry_hash = extractor.registry().hash();
    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(extractor.registry().dimension()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev) : mean_(std::move(mean)), std_(std::move(stddev)) {
    if (mean_.size() != std_.size()) throw UsageError("standardizer mean/std size mismatch");
}

Standardizer Standardizer::fit(const std::vector<ContourMatrix>& matrices) {
    std::vector<const ContourMatrix*> ptrs;
    for (const auto& m : matrices) ptrs.push_back(&m);
    return fit(ptrs);
}

Standardizer Standardizer::fit(const std::vector<const ContourMatrix*>& matrices) {
    if (matrices.empty()) throw UsageError("cannot fit a standardizer on an empty set");
    const auto d = matrices.front()->values.cols();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    double n = 0;
    for (const auto* m : matrices) {
        if (m->values.cols() != d) throw UsageError("standardizer fit set has inconsistent dimensions");
        sum += m->values.colwise().sum().transpose();
        n += static_cast<double>(m->values.rows());
    }
    if (n == 0) throw UsageError("standardizer fit set has no sentences");
    Eigen::VectorXd mean = sum / n;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
    for (const auto* m : matrices) {
        sq += (m->values.rowwise() - mean.transpose()).array().square().matrix().colwise().sum().transpose();
    }
    Eigen::VectorXd stddev = (sq / n).array().sqrt();
    return Standardizer(std::move(mean), std::move(stddev));
}

bool Standardizer::constant(std::size_t feature) const { return std_(static_cast<Eigen::Index>(feature)) < 1e-12; }

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& values) const {
    if (!fitted()) throw UsageError("standardizer applied before fit");
    if (values.cols() != mean_.size()) throw UsageError("standardizer dimension mismatch");
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        if (std_(c) < 1e-12) {
            out.col(c).setZero();
        } else {
            out.col(c) = (values.col(c).array() - mean_(c)) / std_(c);
        }
    }
    return out;
}

ContourMatrix Standardizer::apply(const ContourMatrix& m) const {
    ContourMatrix out = m;
    out.values = apply(m.values);
    return out;
}

Standardizer fit_standardizer(const std::vector<ContourMatrix>& matrices) { return Standardizer::fit(matrices); }

ContourMatrix apply_standardizer(const ContourMatrix& matrix, const Standardizer& standardizer) {
    return standardizer.apply(matrix);
}

std::vector<int> ContourCorpus::labels(const std::string& trait) const {
    std::vector<int> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
        const auto it = d.labels.find(trait);
        if (it == d.labels.end()) throw DataError("document '" + d.doc_id + "' lacks label '" + trait + "'");
        out.push_back(it->second);
    }
    return out;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

}  // namespace

void write_contour_line(std::ostream& out, const ContourMatrix& m) {
    std::string line;
    line.reserve(static_cast<std::size_t>(m.values.size()) * 12 + 128);
    line += "{\"doc_id\":";
    line += nlohmann::json(m.doc_id).dump();
    line += ",\"n_sentences\":";
    line += std::to_string(m.values.rows());
    line += ",\"features\":[";
    bool first = true;
    for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
            if (!first) line.push_back(',');
            first = false;
            append_double(line, m.values(r, c));
        }
    }
    line += "],\"labels\":{";
    first = true;
    for (const auto& [k, v] : m.labels) {
        if (!first) line.push_back(',');
        first = false;
        line += nlohmann::json(k).dump();
        line.push_back(':');
        line += std::to_string(v);
    }
    line += "}}\n";
    out << line;
}

void write_contours(const std::filesystem::path& path, const std::vector<ContourMatrix>& docs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& d : docs) write_contour_line(out, d);
}

std::vector<ContourMatrix> read_contours(const std::filesystem::path& path, std::size_t dimension,
                                         const std::string& registry_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open contours: " + path.string());
    std::vector<ContourMatrix> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(n) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + e.what());
        }
        ContourMatrix m;
        m.registry_hash = registry_hash;
        try {
            m.doc_id = j.at("doc_id").get<std::string>();
            const auto rows = j.at("n_sentences").get<std::size_t>();
            const auto& feats = j.at("features");
            if (feats.size() != rows * dimension) {
                throw DataError(where + "expected " + std::to_string(rows * dimension) + " values, got " +
                                std::to_string(feats.size()));
            }
            if (rows == 0) throw DataError(where + "document has no sentences");
            m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dimension));
            std::size_t k = 0;
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < dimension; ++c) {
                    const double v = feats[k++].get<double>();
                    if (!std::isfinite(v)) throw NumericError(where + "non-finite feature value");
                    m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
                }
            }
            if (j.contains("labels")) {
                for (const auto& [k2, v] : j["labels"].items()) m.labels[k2] = v.get<int>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + e.what());
        }
        out.push_back(std::move(m));
    }
    return out;
}

void write_registry_sidecar(const std::filesystem::path& path, const FeatureRegistry& registry, Schema schema,
                            std::uint64_t seed) {
    auto j = nlohmann::ordered_json::parse(registry.to_json());
    j["schema"] = schema_name(schema);
    j["seed"] = seed;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

RegistrySidecar read_registry_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open registry sidecar: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    RegistrySidecar s;
    s.registry = FeatureRegistry::from_json(ss.str());
    const auto j = nlohmann::json::parse(ss.str());
    s.schema = parse_schema(j.value("schema", std::string("bigfive")));
    return s;
}

ContourCorpus load_corpus(const std::filesystem::path& contours, const std::filesystem::path& registry_sidecar) {
    auto sidecar = read_registry_sidecar(registry_sidecar);
    ContourCorpus corpus;
    corpus.schema = sidecar.schema;
    corpus.registry = std::move(sidecar.registry);
    corpus.docs = read_contours(contours, corpus.registry.dimension(), corpus.registry.hash());
    return corpus;
}

}  // namespace psycontour
