#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psycontour/features.hpp"
#include "psycontour/ingest.hpp"
#include "psycontour/registry.hpp"

namespace psycontour {

// Sentences x features for one document. Raw values unless standardized.
struct ContourMatrix {
    std::string doc_id;
    Eigen::MatrixXd values;
    std::map<std::string, int> labels;
    std::string registry_hash;

    std::size_t sentences() const { return static_cast<std::size_t>(values.rows()); }
};

ContourMatrix build_contours(const Document& doc, const std::vector<Sentence>& sentences,
                             const FeatureExtractor& extractor);

// Per-feature z-scores with population standard deviation, pooled over every sentence
// of the fit set. Constant features (std below 1e-12) map to 0.
class Standardizer {
public:
    Standardizer() = default;
    Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev);

    static Standardizer fit(const std::vector<ContourMatrix>& matrices);
    static Standardizer fit(const std::vector<const ContourMatrix*>& matrices);

    bool fitted() const { return mean_.size() > 0; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& stddev() const { return std_; }
    bool constant(std::size_t feature) const;

    ContourMatrix apply(const ContourMatrix& m) const;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const;

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_;
};

Standardizer fit_standardizer(const std::vector<ContourMatrix>& matrices);
ContourMatrix apply_standardizer(const ContourMatrix& matrix, const Standardizer& standardizer);

struct ContourCorpus {
    Schema schema = Schema::BigFive;
    FeatureRegistry registry;
    std::vector<ContourMatrix> docs;

    std::vector<int> labels(const std::string& trait) const;
};

// JSON-lines: {"doc_id", "n_sentences", "features": row-major array, "labels": {...}}.
void write_contour_line(std::ostream& out, const ContourMatrix& m);
void write_contours(const std::filesystem::path& path, const std::vector<ContourMatrix>& docs);
std::vector<ContourMatrix> read_contours(const std::filesystem::path& path, std::size_t dimension,
                                         const std::string& registry_hash);

// Registry sidecar with the label schema and run metadata.
void write_registry_sidecar(const std::filesystem::path& path, const FeatureRegistry& registry, Schema schema,
                            std::uint64_t seed);
struct RegistrySidecar {
    FeatureRegistry registry;
    Schema schema = Schema::BigFive;
};
RegistrySidecar read_registry_sidecar(const std::filesystem::path& path);

ContourCorpus load_corpus(const std::filesystem::path& contours, const std::filesystem::path& registry_sidecar);

}  // namespace psycontour
