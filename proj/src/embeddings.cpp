#include "psycontour/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "psycontour/error.hpp"

namespace psycontour {

void EmbeddingFile::add(const std::string& doc_id, Eigen::VectorXd vector) {
    if (vector.size() != meta_.dimension) {
        throw DataError("embedding for '" + doc_id + "' has " + std::to_string(vector.size()) +
                        " values, expected " + std::to_string(meta_.dimension));
    }
    if (!vector.allFinite()) throw DataError("embedding for '" + doc_id + "' contains non-finite values");
    if (entries_.count(doc_id)) throw DataError("duplicate embedding for '" + doc_id + "'");
    ids_.push_back(doc_id);
    entries_.emplace(doc_id, std::move(vector));
}

const Eigen::VectorXd* EmbeddingFile::find(const std::string& doc_id) const {
    const auto it = entries_.find(doc_id);
    return it == entries_.end() ? nullptr : &it->second;
}

const Eigen::VectorXd& EmbeddingFile::at(const std::string& doc_id) const {
    const auto* v = find(doc_id);
    if (v == nullptr) throw DataError("no embedding for document '" + doc_id + "'");
    return *v;
}

EmbeddingFile EmbeddingFile::read(std::istream& in, const std::string& source_name) {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        return DataError(source_name + ":" + std::to_string(line_no) + ": " + msg);
    };
    EmbeddingFile file;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("invalid JSON: ") + e.what());
        }
        try {
            if (!have_header) {
                EmbeddingMeta meta;
                meta.dimension = j.at("dimension").get<int>();
                meta.source = j.at("source").get<std::string>();
                meta.layer = j.at("layer").get<int>();
                meta.pooling = j.at("pooling").get<std::string>();
                if (meta.dimension < 1) throw fail("embedding dimension must be positive");
                file = EmbeddingFile(std::move(meta));
                have_header = true;
                continue;
            }
            const auto id = j.at("doc_id").get<std::string>();
            const auto& arr = j.at("vector");
            if (!arr.is_array()) throw fail("vector for '" + id + "' is not an array");
            Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
            for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
            file.add(id, std::move(v));
        } catch (const DataError& e) {
            const std::string what = e.what();
            if (what.rfind(source_name + ":", 0) == 0) throw;
            throw fail(what);
        } catch (const nlohmann::json::exception& e) {
            throw fail(e.what());
        }
    }
    if (!have_header) throw DataError(source_name + ": missing embedding header line");
    return file;
}

void EmbeddingFile::write(std::ostream& out) const {
    nlohmann::json header = {{"dimension", meta_.dimension},
                             {"source", meta_.source},
                             {"layer", meta_.layer},
                             {"pooling", meta_.pooling}};
    out << header.dump() << '\n';
    for (const auto& id : ids_) {
        const auto& v = entries_.at(id);
        std::vector<double> values(v.data(), v.data() + v.size());
        out << nlohmann::json{{"doc_id", id}, {"vector", values}}.dump() << '\n';
    }
}

EmbeddingFile load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embedding file " + path.string());
    return EmbeddingFile::read(in, path.string());
}

Eigen::VectorXd fuse(const Eigen::VectorXd& p, const std::string& doc_id, const EmbeddingFile& embeddings) {
    const auto& e = embeddings.at(doc_id);
    Eigen::VectorXd out(p.size() + e.size());
    out << p, e;
    return out;
}

std::vector<const Eigen::VectorXd*> align_embeddings(const ContourCorpus& corpus, const EmbeddingFile& embeddings) {
    std::vector<const Eigen::VectorXd*> out;
    out.reserve(corpus.docs.size());
    for (const auto& d : corpus.docs) out.push_back(&embeddings.at(d.doc_id));
    return out;
}

}  // namespace psycontour
