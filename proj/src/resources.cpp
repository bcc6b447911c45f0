#include "psycontour/resources.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "psycontour/error.hpp"
#include "psycontour/text.hpp"

namespace psycontour {
namespace {

std::string where(const std::string& source, std::size_t line) {
    return source + ":" + std::to_string(line) + ": ";
}

// Splits a non-comment, non-blank line on tabs. Returns false for skippable lines.
bool read_fields(std::istream& in, std::string& buf, std::vector<std::string>& fields, std::size_t& line) {
    while (std::getline(in, buf)) {
        ++line;
        if (!buf.empty() && buf.back() == '\r') buf.pop_back();
        const auto t = trim(buf);
        if (t.empty() || t.front() == '#') continue;
        fields = split(buf, '\t');
        return true;
    }
    return false;
}

double parse_real(const std::string& s, const std::string& source, std::size_t line) {
    const auto t = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw DataError(where(source, line) + "invalid number '" + std::string(t) + "'");
    }
    return v;
}

long parse_int(const std::string& s, const std::string& source, std::size_t line) {
    const auto t = trim(s);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size()) {
        throw DataError(where(source, line) + "invalid integer '" + std::string(t) + "'");
    }
    return v;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open resource file: " + path.string());
    return in;
}

}  // namespace

Lexicon::Lexicon(std::string name, std::istream& in, const std::string& source) : name_(std::move(name)) {
    struct Row {
        std::string word;
        std::string sub;
        double score;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::set<std::string> subs;
    std::string buf;
    std::vector<std::string> f;
    std::size_t line = 0;
    while (read_fields(in, buf, f, line)) {
        if (f.size() != 3) {
            throw DataError(where(source, line) + "expected word<TAB>subcategory<TAB>score");
        }
        auto word = to_lower(trim(f[0]));
        auto sub = std::string(trim(f[1]));
        if (word.empty() || sub.empty()) throw DataError(where(source, line) + "empty word or subcategory");
        rows.push_back({std::move(word), sub, parse_real(f[2], source, line), line});
        subs.insert(std::move(sub));
    }
    if (subs.empty()) throw DataError(source + ": lexicon '" + name_ + "' has no entries");
    subcategories_.assign(subs.begin(), subs.end());

    std::map<std::string, LexiconEntry> entries;
    for (const auto& r : rows) {
        const auto idx = static_cast<std::size_t>(
            std::lower_bound(subcategories_.begin(), subcategories_.end(), r.sub) - subcategories_.begin());
        auto& entry = entries[r.word];
        for (const auto& [s, _] : entry) {
            if (s == idx) {
                throw DataError(where(source, r.line) + "duplicate entry '" + r.word + "' / '" + r.sub + "'");
            }
        }
        entry.emplace_back(idx, r.score);
    }
    for (auto& [word, entry] : entries) {
        std::sort(entry.begin(), entry.end());
        if (word.size() > 1 && word.back() == '*') {
            wildcards_.emplace_back(word.substr(0, word.size() - 1), std::move(entry));
        } else {
            exact_.emplace(word, std::move(entry));
        }
    }
    std::stable_sort(wildcards_.begin(), wildcards_.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

const LexiconEntry* Lexicon::match(std::string_view word) const {
    if (auto it = exact_.find(std::string(word)); it != exact_.end()) return &it->second;
    for (const auto& [prefix, entry] : wildcards_) {
        if (word.size() >= prefix.size() && word.compare(0, prefix.size(), prefix) == 0) return &entry;
    }
    return nullptr;
}

NormTable::NormTable(std::string name, std::istream& in, const std::string& source) : name_(std::move(name)) {
    std::string buf;
    std::vector<std::string> f;
    std::size_t line = 0;
    while (read_fields(in, buf, f, line)) {
        if (f.size() != 2) throw DataError(where(source, line) + "expected word<TAB>value");
        auto word = to_lower(trim(f[0]));
        if (word.empty()) throw DataError(where(source, line) + "empty word");
        if (!values_.emplace(word, parse_real(f[1], source, line)).second) {
            throw DataError(where(source, line) + "duplicate word '" + word + "'");
        }
    }
}

std::optional<double> NormTable::get(std::string_view lowered) const {
    if (auto it = values_.find(std::string(lowered)); it != values_.end()) return it->second;
    return std::nullopt;
}

WordList::WordList(std::string name, std::istream& in) : name_(std::move(name)) {
    std::string buf;
    while (std::getline(in, buf)) {
        const auto t = trim(buf);
        if (t.empty() || t.front() == '#') continue;
        words_.insert(to_lower(t));
    }
}

std::string register_name(Register r) {
    switch (r) {
        case Register::Spoken: return "spoken";
        case Register::Magazine: return "magazine";
        case Register::Fiction: return "fiction";
        case Register::News: return "news";
        case Register::Academic: return "academic";
    }
    return "?";
}

std::optional<Register> parse_register(std::string_view name) {
    for (auto r : {Register::Spoken, Register::Magazine, Register::Fiction, Register::News, Register::Academic}) {
        if (register_name(r) == name) return r;
    }
    return std::nullopt;
}

std::pair<Register, int> parse_frequency_filename(const std::filesystem::path& path) {
    // coca_spoken.2.tsv -> stem "coca_spoken.2"
    const std::string file = path.filename().string();
    const auto bad = [&] {
        return DataError("frequency table filename must look like <name>_<register>.<n>.tsv: " + file);
    };
    if (file.size() < 4 || file.substr(file.size() - 4) != ".tsv") throw bad();
    const std::string stem = file.substr(0, file.size() - 4);
    const auto dot = stem.rfind('.');
    const auto us = stem.rfind('_', dot);
    if (dot == std::string::npos || us == std::string::npos) throw bad();
    const auto reg = parse_register(stem.substr(us + 1, dot - us - 1));
    const std::string nstr = stem.substr(dot + 1);
    if (!reg || nstr.size() != 1 || nstr[0] < '1' || nstr[0] > '5') throw bad();
    return {*reg, nstr[0] - '0'};
}

FrequencyTable::FrequencyTable(std::string name, Register reg, int n, std::istream& in, const std::string& source)
    : name_(std::move(name)), register_(reg), n_(n) {
    if (n < 1 || n > 5) throw DataError(source + ": n-gram order must be in [1,5]");
    std::string buf;
    std::vector<std::string> f;
    std::size_t line = 0;
    while (read_fields(in, buf, f, line)) {
        if (f.size() != 3) throw DataError(where(source, line) + "expected ngram<TAB>rank<TAB>log10freq");
        const auto words = split(trim(f[0]), ' ');
        std::string key;
        int count = 0;
        for (const auto& w : words) {
            if (w.empty()) continue;
            if (count++) key.push_back(' ');
            key += to_lower(w);
        }
        if (count != n_) {
            throw DataError(where(source, line) + "n-gram '" + f[0] + "' has " + std::to_string(count) +
                            " tokens, table order is " + std::to_string(n_));
        }
        const long rank = parse_int(f[1], source, line);
        if (rank < 1) throw DataError(where(source, line) + "rank must be positive");
        if (!entries_.emplace(key, NgramStat{rank, parse_real(f[2], source, line)}).second) {
            throw DataError(where(source, line) + "duplicate n-gram '" + key + "'");
        }
    }
}

std::optional<NgramStat> FrequencyTable::lookup(std::span<const std::string> gram) const {
    if (static_cast<int>(gram.size()) != n_) {
        throw UsageError("n-gram of length " + std::to_string(gram.size()) + " looked up in a " +
                         std::to_string(n_) + "-gram table");
    }
    std::string key;
    for (std::size_t i = 0; i < gram.size(); ++i) {
        if (i) key.push_back(' ');
        key += to_lower(gram[i]);
    }
    return lookup_key(key);
}

std::optional<NgramStat> FrequencyTable::lookup_key(const std::string& key) const {
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    return std::nullopt;
}

std::optional<NgramStat> lookup_ngram(const FrequencyTable& table, std::span<const std::string> gram) {
    return table.lookup(gram);
}

const WordList* ResourceStore::wordlist(std::string_view name) const {
    for (const auto& w : wordlists_) {
        if (w.name() == name) return &w;
    }
    return nullptr;
}

StoreSummary ResourceStore::summary() const {
    StoreSummary s;
    s.lexicons = lexicons_.size();
    s.norms = norms_.size();
    s.wordlists = wordlists_.size();
    s.freq_tables = freq_tables_.size();
    for (const auto& l : lexicons_) {
        s.lexicon_entries += l.entry_count();
        s.sentiemo_subcategories += l.subcategories().size();
    }
    for (const auto& n : norms_) s.norm_entries += n.entry_count();
    for (const auto& w : wordlists_) s.wordlist_entries += w.size();
    for (const auto& f : freq_tables_) s.freq_entries += f.entry_count();
    return s;
}

void ResourceStore::add(Lexicon lex) { lexicons_.push_back(std::move(lex)); }
void ResourceStore::add(NormTable norm) { norms_.push_back(std::move(norm)); }
void ResourceStore::add(WordList list) { wordlists_.push_back(std::move(list)); }
void ResourceStore::add(FrequencyTable table) { freq_tables_.push_back(std::move(table)); }

namespace {

template <typename T>
void sort_unique(std::vector<T>& v, const char* kind) {
    std::sort(v.begin(), v.end(), [](const T& a, const T& b) { return a.name() < b.name(); });
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i].name() == v[i - 1].name()) {
            throw DataError(std::string("duplicate ") + kind + " resource name '" + v[i].name() + "'");
        }
    }
}

}  // namespace

void ResourceStore::freeze() {
    sort_unique(lexicons_, "lexicon");
    sort_unique(norms_, "norm");
    sort_unique(wordlists_, "wordlist");
    sort_unique(freq_tables_, "freq");
    std::sort(freq_tables_.begin(), freq_tables_.end(), [](const auto& a, const auto& b) {
        if (a.reg() != b.reg()) return a.reg() < b.reg();
        if (a.n() != b.n()) return a.n() < b.n();
        return a.name() < b.name();
    });
    for (std::size_t i = 1; i < freq_tables_.size(); ++i) {
        if (freq_tables_[i].reg() == freq_tables_[i - 1].reg() && freq_tables_[i].n() == freq_tables_[i - 1].n()) {
            throw DataError("two frequency tables for register " + register_name(freq_tables_[i].reg()) +
                            ", n=" + std::to_string(freq_tables_[i].n()));
        }
    }
}

ResourceStore ResourceStore::load(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open resource manifest: " + manifest.string());
    const auto base = manifest.parent_path();
    const std::string source = manifest.string();

    ResourceStore store;
    std::string buf;
    std::vector<std::string> f;
    std::size_t line = 0;
    while (read_fields(in, buf, f, line)) {
        if (f.size() != 3) throw DataError(where(source, line) + "expected kind<TAB>name<TAB>path");
        const std::string kind(trim(f[0]));
        const std::string name(trim(f[1]));
        std::filesystem::path path(std::string(trim(f[2])));
        if (path.is_relative()) path = base / path;
        if (!std::filesystem::exists(path)) {
            throw DataError(where(source, line) + "resource file not found: " + path.string());
        }
        auto file = open_or_throw(path);
        if (kind == "lexicon") {
            store.add(Lexicon(name, file, path.string()));
        } else if (kind == "norm") {
            store.add(NormTable(name, file, path.string()));
        } else if (kind == "wordlist") {
            store.add(WordList(name, file));
        } else if (kind == "freq") {
            const auto [reg, n] = parse_frequency_filename(path);
            store.add(FrequencyTable(name, reg, n, file, path.string()));
        } else {
            throw DataError(where(source, line) + "unknown resource kind '" + kind + "'");
        }
    }
    store.freeze();
    return store;
}

ResourceStore load_store(const std::filesystem::path& manifest) { return ResourceStore::load(manifest); }

}  // namespace psycontour
