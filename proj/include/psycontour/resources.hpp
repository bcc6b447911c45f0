#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace psycontour {

// Sparse word entry: (subcategory index, score) pairs.
using LexiconEntry = std::vector<std::pair<std::size_t, double>>;

// Word -> subcategory scores. Entries ending in '*' are prefix (wildcard) patterns,
// consulted only when no exact entry exists; the longest matching prefix wins.
class Lexicon {
public:
    Lexicon() = default;
    Lexicon(std::string name, std::istream& in, const std::string& source);

    const std::string& name() const { return name_; }
    const std::vector<std::string>& subcategories() const { return subcategories_; }
    std::size_t entry_count() const { return exact_.size() + wildcards_.size(); }

    // `word` must already be lowercased. nullptr when unmatched.
    const LexiconEntry* match(std::string_view word) const;

private:
    std::string name_;
    std::vector<std::string> subcategories_;
    std::unordered_map<std::string, LexiconEntry> exact_;
    std::vector<std::pair<std::string, LexiconEntry>> wildcards_;  // longest prefix first
};

class NormTable {
public:
    NormTable() = default;
    NormTable(std::string name, std::istream& in, const std::string& source);

    const std::string& name() const { return name_; }
    std::size_t entry_count() const { return values_.size(); }
    std::optional<double> get(std::string_view lowered) const;

private:
    std::string name_;
    std::unordered_map<std::string, double> values_;
};

class WordList {
public:
    WordList() = default;
    WordList(std::string name, std::istream& in);

    const std::string& name() const { return name_; }
    std::size_t size() const { return words_.size(); }
    bool contains(std::string_view lowered) const { return words_.count(std::string(lowered)) > 0; }

private:
    std::string name_;
    std::unordered_set<std::string> words_;
};

enum class Register { Spoken, Magazine, Fiction, News, Academic };
std::string register_name(Register r);
std::optional<Register> parse_register(std::string_view name);

struct NgramStat {
    long rank = 0;
    double log10_freq = 0.0;
    bool operator==(const NgramStat&) const = default;
};

class FrequencyTable {
public:
    FrequencyTable() = default;
    FrequencyTable(std::string name, Register reg, int n, std::istream& in, const std::string& source);

    const std::string& name() const { return name_; }
    Register reg() const { return register_; }
    int n() const { return n_; }
    std::size_t entry_count() const { return entries_.size(); }

    // Case-insensitive exact match; throws UsageError when gram.size() != n().
    std::optional<NgramStat> lookup(std::span<const std::string> gram) const;
    // Key is already lowercased and space-joined with exactly n tokens.
    std::optional<NgramStat> lookup_key(const std::string& key) const;

private:
    std::string name_;
    Register register_ = Register::Spoken;
    int n_ = 1;
    std::unordered_map<std::string, NgramStat> entries_;
};

// Parses `<prefix>_<register>.<n>.tsv`.
std::pair<Register, int> parse_frequency_filename(const std::filesystem::path& path);

std::optional<NgramStat> lookup_ngram(const FrequencyTable& table, std::span<const std::string> gram);

struct StoreSummary {
    std::size_t lexicons = 0, norms = 0, wordlists = 0, freq_tables = 0;
    std::size_t lexicon_entries = 0, norm_entries = 0, wordlist_entries = 0, freq_entries = 0;
    std::size_t sentiemo_subcategories = 0;
};

// Immutable after load; every kind is kept sorted by name so manifest order is irrelevant.
class ResourceStore {
public:
    ResourceStore() = default;

    // Manifest lines: kind<TAB>name<TAB>path, kinds lexicon|norm|wordlist|freq.
    // Relative paths resolve against the manifest's directory.
    static ResourceStore load(const std::filesystem::path& manifest);

    const std::vector<Lexicon>& lexicons() const { return lexicons_; }
    const std::vector<NormTable>& norms() const { return norms_; }
    const std::vector<WordList>& wordlists() const { return wordlists_; }
    const std::vector<FrequencyTable>& freq_tables() const { return freq_tables_; }

    const WordList* wordlist(std::string_view name) const;
    StoreSummary summary() const;

    // For tests and programmatic construction.
    void add(Lexicon lex);
    void add(NormTable norm);
    void add(WordList list);
    void add(FrequencyTable table);
    void freeze();

private:
    std::vector<Lexicon> lexicons_;
    std::vector<NormTable> norms_;
    std::vector<WordList> wordlists_;
    std::vector<FrequencyTable> freq_tables_;
};

ResourceStore load_store(const std::filesystem::path& manifest);

}  // namespace psycontour
