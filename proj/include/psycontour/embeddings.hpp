#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "psycontour/contours.hpp"

namespace psycontour {

struct EmbeddingMeta {
    int dimension = 0;
    std::string source;
    int layer = 0;
    std::string pooling;
};

// Document vectors read from a JSON-lines file: a header line
// {"dimension", "source", "layer", "pooling"} followed by {"doc_id", "vector"} lines.
class EmbeddingFile {
public:
    EmbeddingFile() = default;
    explicit EmbeddingFile(EmbeddingMeta meta) : meta_(std::move(meta)) {}

    const EmbeddingMeta& meta() const { return meta_; }
    int dimension() const { return meta_.dimension; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    void add(const std::string& doc_id, Eigen::VectorXd vector);
    const Eigen::VectorXd* find(const std::string& doc_id) const;
    const Eigen::VectorXd& at(const std::string& doc_id) const;

    static EmbeddingFile read(std::istream& in, const std::string& source_name = "<stream>");
    void write(std::ostream& out) const;

private:
    EmbeddingMeta meta_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, Eigen::VectorXd> entries_;
};

EmbeddingFile load_embeddings(const std::filesystem::path& path);

// [p | embedding of doc_id]; the contour block always comes first.
Eigen::VectorXd fuse(const Eigen::VectorXd& p, const std::string& doc_id, const EmbeddingFile& embeddings);

// Embedding pointers aligned with corpus.docs; every document must be covered.
std::vector<const Eigen::VectorXd*> align_embeddings(const ContourCorpus& corpus, const EmbeddingFile& embeddings);

}  // namespace psycontour
