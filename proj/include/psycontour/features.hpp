#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psycontour/ingest.hpp"
#include "psycontour/readability.hpp"
#include "psycontour/registry.hpp"
#include "psycontour/resources.hpp"

namespace psycontour {

inline constexpr std::size_t kMorphSynCount = 19;
inline constexpr std::size_t kLexicalBuiltinCount = 14;
inline constexpr std::size_t kDeflateWindowBytes = 2048;
inline constexpr std::size_t kMattrWindow = 50;

const std::array<std::string_view, kMorphSynCount>& morphsyn_names();
const std::array<std::string_view, kLexicalBuiltinCount>& lexical_builtin_names();

// Syntactic unit counts for one sentence.
//
// Parsed sentences (CoNLL-U): clause heads are the root plus advcl/ccomp/xcomp/acl/csubj/
// parataxis dependents and clausal conj dependents of clause heads; the non-root, non-
// parataxis ones (and their clausal conjuncts) are dependent clauses; T-units are the root,
// parataxis and clausal conjuncts of T-unit heads.
//
// Unparsed sentences: each finite verb group is a clause; a clause is dependent when a
// subordinator or relative pronoun precedes it since the previous clause; T-units are the
// independent clauses (at least one).
struct ClauseStats {
    double words = 0;
    double clauses = 0;
    double dependent_clauses = 0;
    double t_units = 1;
    double complex_t_units = 0;
    double verb_phrases = 0;
    double complex_nominals = 0;
    double coordinate_phrases = 0;
    double prepositions = 0;
    double dependency_distance = 0;  // mean |i - head|; 0 without a parse
};

ClauseStats clause_stats(const Sentence& sent);

// Deflate-compressed size over raw size (raw Deflate stream, level 6). Empty input gives 1.0.
double deflate_ratio(std::string_view data);

// Carroll's corrected type-token ratio T / sqrt(2N); 0 for N = 0.
double carroll_cttr(std::size_t types, std::size_t tokens);

// Moving-average TTR over windows of `window` tokens; plain TTR when fewer tokens.
double mattr(std::span<const std::string> tokens, std::size_t window = kMattrWindow);

ReadabilityCounts readability_counts(const Sentence& sent, const WordList* dale_chall, const WordList* spache);

// Computes registry rows. Row i depends only on sentences 0..i of its document; the
// cumulative window covers Deflate streams, CTTR/root/log/Uber TTR, MATTR and readability.
class FeatureExtractor {
public:
    FeatureExtractor(const ResourceStore& store, FeatureRegistry registry, const RegistryConfig& config = {});

    const FeatureRegistry& registry() const { return registry_; }
    const ResourceStore& store() const { return store_; }

    std::vector<double> sentence_features(const Sentence& sent, std::span<const Sentence> context) const;

    // Rows for every sentence of a document, computed incrementally.
    std::vector<std::vector<double>> document_rows(std::span<const Sentence> sentences) const;

    // Group sub-vectors in catalog order (all features, ignoring the registry filter).
    std::vector<double> morphsyn_features(const Sentence& sent, std::span<const Sentence> context) const;
    std::vector<double> readability_features(const Sentence& sent, std::span<const Sentence> context) const;

private:
    class Window;
    void compute_catalog(const Sentence& sent, Window& window, std::vector<double>& out) const;
    std::vector<double> catalog_row(const Sentence& sent, std::span<const Sentence> context) const;

    const ResourceStore& store_;
    FeatureRegistry registry_;
    const WordList* dale_chall_ = nullptr;
    const WordList* spache_ = nullptr;
    std::size_t catalog_size_ = 0;
    std::size_t lexical_offset_ = 0;
    std::size_t readability_offset_ = 0;
    std::size_t sentiemo_offset_ = 0;
};

std::vector<double> sentence_features(const Sentence& sent, std::span<const Sentence> context,
                                      const ResourceStore& store, const FeatureRegistry& registry);

}  // namespace psycontour
