#pragma once

#include <Eigen/Dense>
#include <unistd.h>

#include <array>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "psycontour/contours.hpp"
#include "psycontour/registry.hpp"
#include "psycontour/resources.hpp"
#include "psycontour/rng.hpp"

namespace testing {

inline psycontour::Lexicon lexicon(const std::string& name, const std::string& tsv) {
    std::istringstream in(tsv);
    return psycontour::Lexicon(name, in, name);
}

inline psycontour::WordList wordlist(const std::string& name, const std::string& words) {
    std::istringstream in(words);
    return psycontour::WordList(name, in);
}

// Small store exercising every resource kind.
inline psycontour::ResourceStore small_store() {
    using namespace psycontour;
    ResourceStore store;
    store.add(lexicon("emo", "happy\tposemo\t1\nlove\tposemo\t2\nsad\tnegemo\t1\nhate\tnegemo\t3\nhapp*\tposemo\t0.5\n"));
    store.add(lexicon("vad", "happy\tvalence\t0.9\nhappy\tarousal\t0.6\nsad\tvalence\t0.1\ndog\tvalence\t0.7\n"));
    {
        std::istringstream in("happy\t3.5\ndog\t2.5\ncat\t2.8\n");
        store.add(NormTable("aoa", in, "aoa"));
    }
    store.add(wordlist("dale_chall", "the\ncat\nsat\ndog\nis\na\n"));
    store.add(wordlist("spache", "the\ncat\nsat\n"));
    {
        std::istringstream in("the\t1\t6.5\ncat\t900\t3.2\n");
        store.add(FrequencyTable("coca_uni", Register::Spoken, 1, in, "coca"));
    }
    {
        std::istringstream in("the cat\t10\t4.1\n");
        store.add(FrequencyTable("coca_bi", Register::Spoken, 2, in, "coca"));
    }
    store.freeze();
    return store;
}

// Registry of `sizes[g]` anonymous features per group, in group order.
inline psycontour::FeatureRegistry synthetic_registry(const std::array<std::size_t, psycontour::kGroupCount>& sizes) {
    using namespace psycontour;
    std::vector<FeatureInfo> features;
    for (auto g : kAllGroups) {
        for (std::size_t i = 0; i < sizes[static_cast<std::size_t>(g)]; ++i) {
            features.push_back({std::string(group_name(g)) + ".f" + std::to_string(i), g});
        }
    }
    return FeatureRegistry(std::move(features));
}

// Random contours whose label for every Big Five trait is [mean of feature 0 > 0].
inline psycontour::ContourCorpus planted_corpus(std::size_t docs, std::size_t dim, std::uint64_t seed,
                                                int min_sentences = 4, int max_sentences = 12) {
    using namespace psycontour;
    ContourCorpus corpus;
    corpus.schema = Schema::BigFive;
    corpus.registry = synthetic_registry({dim, 0, 0, 0});
    Rng rng(seed);
    for (std::size_t d = 0; d < docs; ++d) {
        const auto n = static_cast<Eigen::Index>(min_sentences + static_cast<int>(rng.below(
                                                                     static_cast<std::uint64_t>(max_sentences - min_sentences + 1))));
        ContourMatrix m;
        m.doc_id = "doc" + std::to_string(d);
        m.values.resize(n, static_cast<Eigen::Index>(dim));
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < m.values.cols(); ++c) m.values(r, c) = rng.normal();
        }
        const int label = m.values.col(0).mean() > 0.0 ? 1 : 0;
        for (const auto& t : trait_names(Schema::BigFive)) m.labels[t] = label;
        m.registry_hash = corpus.registry.hash();
        corpus.docs.push_back(std::move(m));
    }
    return corpus;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("psycontour-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Essays-format CSV. Even-numbered documents use positive words more often and carry
// label y for E, A and O; N and C are random.
inline std::string essays_csv(std::size_t docs, std::uint64_t seed, std::size_t min_sentences = 3,
                              std::size_t max_sentences = 6) {
    const std::vector<std::string> happy = {"happy", "love", "sunny", "friends", "laugh", "party"};
    const std::vector<std::string> plain = {"the",   "a",     "went",  "school", "house",     "said",
                                            "because", "river", "work", "yesterday", "wonderful", "and"};
    psycontour::Rng rng(seed);
    std::string csv = "#AUTHID,TEXT,cEXT,cNEU,cAGR,cCON,cOPN\n";
    for (std::size_t d = 0; d < docs; ++d) {
        const bool y = d % 2 == 0;
        std::string text;
        const auto sentences = min_sentences + rng.below(max_sentences - min_sentences + 1);
        for (std::size_t s = 0; s < sentences; ++s) {
            const auto words = 4 + rng.below(16);
            for (std::size_t w = 0; w < words; ++w) {
                const bool pick = y && rng.uniform() < 0.4;
                text += (w ? " " : "") + (pick ? happy[rng.below(happy.size())] : plain[rng.below(plain.size())]);
            }
            text += s % 2 ? "! " : ". ";
        }
        const char* l = y ? "y" : "n";
        const char* m = rng.below(2) ? "y" : "n";
        csv += "doc" + std::to_string(d) + ",\"" + text + "\"," + l + "," + m + "," + l + "," + m + "," + l + "\n";
    }
    return csv;
}

}  // namespace testing
