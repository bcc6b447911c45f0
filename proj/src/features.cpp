#include "psycontour/features.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "psycontour/error.hpp"
#include "psycontour/pos_tagger.hpp"
#include "psycontour/syllables.hpp"
#include "psycontour/text.hpp"

namespace psycontour {

const std::array<std::string_view, kMorphSynCount>& morphsyn_names() {
    static const std::array<std::string_view, kMorphSynCount> names = {
        "sentence_length",
        "mean_clause_length",
        "clauses_per_sentence",
        "dependent_clauses_per_clause",
        "dependent_clauses_per_tunit",
        "tunits_per_sentence",
        "mean_tunit_length",
        "complex_tunits_per_tunit",
        "verb_phrases_per_sentence",
        "verb_phrases_per_tunit",
        "complex_nominals_per_clause",
        "complex_nominals_per_tunit",
        "coordinate_phrases_per_clause",
        "coordinate_phrases_per_tunit",
        "mean_dependency_distance",
        "prepositions_per_clause",
        "deflate_chars",
        "deflate_pos",
        "deflate_morph",
    };
    return names;
}

const std::array<std::string_view, kLexicalBuiltinCount>& lexical_builtin_names() {
    static const std::array<std::string_view, kLexicalBuiltinCount> names = {
        "lexical_density", "noun_ratio", "verb_ratio", "adjective_ratio", "adverb_ratio",
        "ttr",             "cttr",       "root_ttr",   "log_ttr",         "uber_index",
        "mattr",           "mean_word_length", "syllables_per_word", "long_word_ratio",
    };
    return names;
}

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string_view base_relation(std::string_view deprel) {
    const auto colon = deprel.find(':');
    return colon == std::string_view::npos ? deprel : deprel.substr(0, colon);
}

bool is_content_pos(std::string_view pos) {
    return pos == "NOUN" || pos == "PROPN" || pos == "VERB" || pos == "ADJ" || pos == "ADV";
}

// Assigns each dependent clause to the nearest preceding independent clause (or the first
// one when it precedes all of them) and counts independent clauses that received one.
double complex_units(const std::vector<bool>& kinds_dependent) {
    std::vector<int> deps_of;
    int leading = 0;
    for (bool dep : kinds_dependent) {
        if (!dep) {
            deps_of.push_back(0);
        } else if (deps_of.empty()) {
            ++leading;
        } else {
            ++deps_of.back();
        }
    }
    if (deps_of.empty()) return leading > 0 ? 1.0 : 0.0;
    deps_of.front() += leading;
    return static_cast<double>(std::count_if(deps_of.begin(), deps_of.end(), [](int d) { return d > 0; }));
}

ClauseStats heuristic_clause_stats(const Sentence& sent) {
    ClauseStats s;
    const auto& toks = sent.tokens;
    const std::size_t n = toks.size();
    std::vector<std::string> lower(n);
    for (std::size_t i = 0; i < n; ++i) {
        lower[i] = to_lower(toks[i].surface);
        if (is_word(toks[i].surface)) s.words += 1;
    }

    bool pending = false;
    long prev_sig = -1;
    std::vector<bool> clause_kinds;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& pos = toks[i].pos;
        const auto& w = lower[i];
        const bool next_is_subject =
            i + 1 < n && (is_subject_pronoun(lower[i + 1]) || toks[i + 1].pos == "DET");
        if (pos == "SCONJ" || is_subordinator(w) || (i > 0 && is_relative_pronoun(w)) ||
            (is_ambiguous_subordinator(w) && next_is_subject)) {
            pending = true;
        }
        if (pos == "VERB" || pos == "AUX") {
            const bool continuation =
                prev_sig >= 0 && (toks[prev_sig].pos == "VERB" || toks[prev_sig].pos == "AUX");
            if (!continuation) {
                s.verb_phrases += 1;
                const bool infinitive = prev_sig >= 0 && lower[prev_sig] == "to";
                const bool participle = pos == "VERB" && ends_with(w, "ing");
                if (!infinitive && !participle) {
                    s.clauses += 1;
                    clause_kinds.push_back(pending);
                    if (pending) s.dependent_clauses += 1;
                    pending = false;
                }
            }
        }
        if (pos == "ADP") s.prepositions += 1;
        if (pos != "ADV" && pos != "PART") prev_sig = static_cast<long>(i);
    }
    const double independent = s.clauses - s.dependent_clauses;
    s.t_units = std::max(1.0, independent);
    s.complex_t_units = complex_units(clause_kinds);

    // Complex nominals: ADJ/NOUN/PROPN runs of length >= 2 holding a noun, plus "N of ...".
    std::size_t run = 0;
    bool run_has_noun = false;
    for (std::size_t i = 0; i <= n; ++i) {
        const bool nominal = i < n && (toks[i].pos == "ADJ" || toks[i].pos == "NOUN" || toks[i].pos == "PROPN");
        if (nominal) {
            ++run;
            run_has_noun = run_has_noun || toks[i].pos != "ADJ";
        } else {
            if (run >= 2 && run_has_noun) s.complex_nominals += 1;
            run = 0;
            run_has_noun = false;
        }
        if (i + 1 < n && (toks[i].pos == "NOUN" || toks[i].pos == "PROPN") && lower[i + 1] == "of") {
            s.complex_nominals += 1;
        }
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (toks[i].pos != "CCONJ") continue;
        const auto& a = toks[i - 1].pos;
        if (a == toks[i + 1].pos && (a == "NOUN" || a == "PROPN" || a == "ADJ" || a == "ADV" || a == "NUM")) {
            s.coordinate_phrases += 1;
        }
    }
    return s;
}

ClauseStats parsed_clause_stats(const Sentence& sent) {
    ClauseStats s;
    const auto& toks = sent.tokens;
    const std::size_t n = toks.size();
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (is_word(toks[i].surface)) s.words += 1;
        if (toks[i].head >= 0) children[static_cast<std::size_t>(toks[i].head)].push_back(i);
    }
    const auto has_child = [&](std::size_t i, std::initializer_list<std::string_view> rels) {
        for (auto c : children[i]) {
            const auto b = base_relation(toks[c].deprel);
            for (auto r : rels) {
                if (b == r) return true;
            }
        }
        return false;
    };
    const auto verbal = [&](std::size_t i) {
        return toks[i].pos == "VERB" || toks[i].pos == "AUX" || has_child(i, {"nsubj", "csubj", "cop"});
    };

    std::vector<bool> clause(n, false), dependent(n, false), tunit(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = base_relation(toks[i].deprel);
        if (toks[i].head == kRootHead || b == "root") {
            clause[i] = tunit[i] = true;
        } else if (b == "parataxis") {
            clause[i] = tunit[i] = true;
        } else if (b == "advcl" || b == "ccomp" || b == "xcomp" || b == "acl" || b == "csubj") {
            clause[i] = dependent[i] = true;
        }
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (clause[i] || base_relation(toks[i].deprel) != "conj" || toks[i].head < 0) continue;
            const auto h = static_cast<std::size_t>(toks[i].head);
            if (clause[h] && verbal(i)) {
                clause[i] = true;
                dependent[i] = dependent[h];
                tunit[i] = tunit[h];
                changed = true;
            }
        }
    }

    double dist_sum = 0, dist_n = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (clause[i]) s.clauses += 1;
        if (dependent[i]) s.dependent_clauses += 1;
        if (toks[i].pos == "VERB" || has_child(i, {"cop"})) s.verb_phrases += 1;
        if (toks[i].pos == "ADP") s.prepositions += 1;
        if ((toks[i].pos == "NOUN" || toks[i].pos == "PROPN") && has_child(i, {"amod", "nmod", "compound", "acl"})) {
            s.complex_nominals += 1;
        }
        if (base_relation(toks[i].deprel) == "csubj") s.complex_nominals += 1;
        if (base_relation(toks[i].deprel) == "conj" && !clause[i]) s.coordinate_phrases += 1;
        if (toks[i].head >= 0 && toks[i].pos != "PUNCT") {
            dist_sum += std::abs(static_cast<double>(i) - toks[i].head);
            dist_n += 1;
        }
    }
    s.dependency_distance = ratio(dist_sum, dist_n);

    const double units = static_cast<double>(std::count(tunit.begin(), tunit.end(), true));
    s.t_units = std::max(1.0, units);
    std::vector<bool> complex(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (!dependent[i]) continue;
        long cur = toks[i].head;
        for (std::size_t steps = 0; cur >= 0 && steps < n; ++steps) {
            if (tunit[static_cast<std::size_t>(cur)]) {
                complex[static_cast<std::size_t>(cur)] = true;
                break;
            }
            cur = toks[static_cast<std::size_t>(cur)].head;
        }
    }
    s.complex_t_units = static_cast<double>(std::count(complex.begin(), complex.end(), true));
    if (units == 0 && s.dependent_clauses > 0) s.complex_t_units = 1;
    return s;
}

class Deflater {
public:
    Deflater() {
        stream_.zalloc = Z_NULL;
        stream_.zfree = Z_NULL;
        stream_.opaque = Z_NULL;
        if (deflateInit2(&stream_, 6, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
            throw NumericError("zlib deflateInit2 failed");
        }
    }
    ~Deflater() { deflateEnd(&stream_); }
    Deflater(const Deflater&) = delete;
    Deflater& operator=(const Deflater&) = delete;

    std::size_t compressed_size(std::string_view data) {
        deflateReset(&stream_);
        buffer_.resize(deflateBound(&stream_, static_cast<uLong>(data.size())) + 16);
        stream_.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
        stream_.avail_in = static_cast<uInt>(data.size());
        stream_.next_out = buffer_.data();
        stream_.avail_out = static_cast<uInt>(buffer_.size());
        if (deflate(&stream_, Z_FINISH) != Z_STREAM_END) throw NumericError("zlib deflate did not finish");
        return buffer_.size() - stream_.avail_out;
    }

private:
    z_stream stream_{};
    std::vector<Bytef> buffer_;
};

std::string_view tail(const std::string& s, std::size_t n) {
    return s.size() <= n ? std::string_view(s) : std::string_view(s).substr(s.size() - n);
}

void append_capped(std::string& stream, const std::string& piece) {
    stream += piece;
    if (stream.size() > 2 * kDeflateWindowBytes) stream.erase(0, stream.size() - kDeflateWindowBytes);
}

}  // namespace

ClauseStats clause_stats(const Sentence& sent) {
    return sent.parsed ? parsed_clause_stats(sent) : heuristic_clause_stats(sent);
}

double deflate_ratio(std::string_view data) {
    if (data.empty()) return 1.0;
    thread_local Deflater deflater;
    return static_cast<double>(deflater.compressed_size(data)) / static_cast<double>(data.size());
}

double carroll_cttr(std::size_t types, std::size_t tokens) {
    return tokens == 0 ? 0.0 : static_cast<double>(types) / std::sqrt(2.0 * static_cast<double>(tokens));
}

double mattr(std::span<const std::string> tokens, std::size_t window) {
    if (tokens.empty() || window == 0) return 0.0;
    if (tokens.size() < window) {
        std::unordered_set<std::string> types(tokens.begin(), tokens.end());
        return static_cast<double>(types.size()) / static_cast<double>(tokens.size());
    }
    double sum = 0.0;
    const std::size_t windows = tokens.size() - window + 1;
    for (std::size_t start = 0; start < windows; ++start) {
        std::unordered_set<std::string> types(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                              tokens.begin() + static_cast<std::ptrdiff_t>(start + window));
        sum += static_cast<double>(types.size()) / static_cast<double>(window);
    }
    return sum / static_cast<double>(windows);
}

ReadabilityCounts readability_counts(const Sentence& sent, const WordList* dale_chall, const WordList* spache) {
    ReadabilityCounts c;
    c.sentences = 1;
    for (const auto& t : sent.tokens) {
        if (!is_word(t.surface)) continue;
        const auto lower = to_lower(t.surface);
        const int syl = count_syllables(t.surface);
        const auto letters = letter_count(t.surface);
        c.words += 1;
        c.syllables += syl;
        c.letters += static_cast<double>(letters);
        if (syl >= 3) c.polysyllables += 1;
        if (syl <= 1) c.monosyllables += 1;
        if (letters > 6) c.long_words += 1;
        if (dale_chall ? !dale_chall->contains(lower) : syl >= 3) c.dale_chall_difficult += 1;
        if (spache ? !spache->contains(lower) : syl >= 3) c.spache_unfamiliar += 1;
    }
    return c;
}

// Cumulative per-document state feeding the windowed features.
class FeatureExtractor::Window {
public:
    ReadabilityCounts readability;
    std::unordered_map<std::string, std::size_t> types;
    std::size_t tokens = 0;
    std::string chars, pos, morph;

    void add_word(const std::string& w) {
        ++types[w];
        ++tokens;
        ring_.push_back(w);
        if (++window_counts_[w] == 1) ++window_types_;
        if (ring_.size() > kMattrWindow) {
            if (--window_counts_[ring_.front()] == 0) --window_types_;
            ring_.pop_front();
        }
        if (tokens >= kMattrWindow) {
            mattr_sum_ += static_cast<double>(window_types_) / static_cast<double>(kMattrWindow);
            ++mattr_windows_;
        }
    }

    double mattr() const {
        if (mattr_windows_ > 0) return mattr_sum_ / static_cast<double>(mattr_windows_);
        return ratio(static_cast<double>(types.size()), static_cast<double>(tokens));
    }

private:
    std::deque<std::string> ring_;
    std::unordered_map<std::string, std::size_t> window_counts_;
    std::size_t window_types_ = 0;
    double mattr_sum_ = 0.0;
    std::size_t mattr_windows_ = 0;
};

FeatureExtractor::FeatureExtractor(const ResourceStore& store, FeatureRegistry registry, const RegistryConfig& config)
    : store_(store), registry_(std::move(registry)) {
    dale_chall_ = store.wordlist(config.dale_chall_list);
    spache_ = store.wordlist(config.spache_list);
    const auto catalog = feature_catalog(store);
    catalog_size_ = catalog.size();
    if (registry_.catalog_slots().empty()) {
        throw UsageError("feature extraction needs a registry built from the resource store");
    }
    for (std::size_t i = 0; i < registry_.dimension(); ++i) {
        const auto slot = registry_.catalog_slots()[i];
        if (slot >= catalog.size() || catalog[slot] != registry_[i]) {
            throw UsageError("registry does not match the resource store (feature '" + registry_[i].name + "')");
        }
    }
    lexical_offset_ = kMorphSynCount;
    readability_offset_ = static_cast<std::size_t>(
        std::find_if(catalog.begin(), catalog.end(),
                     [](const FeatureInfo& f) { return f.group == FeatureGroup::Readability; }) -
        catalog.begin());
    sentiemo_offset_ = readability_offset_ + kReadabilityCount;
}

void FeatureExtractor::compute_catalog(const Sentence& sent, Window& win, std::vector<double>& out) const {
    out.assign(catalog_size_, 0.0);
    const auto& toks = sent.tokens;

    std::vector<std::string> words;
    std::vector<int> syllables;
    std::size_t letters = 0, long_words = 0;
    std::array<double, 5> pos_counts{};  // content, noun, verb, adj, adv
    std::string chars, pos_stream, morph_stream;
    for (const auto& t : toks) {
        if (!chars.empty()) {
            chars.push_back(' ');
            pos_stream.push_back(' ');
        }
        chars += t.surface;
        pos_stream += t.pos;
        if (!t.morph.empty()) {
            if (!morph_stream.empty()) morph_stream.push_back(' ');
            morph_stream += t.morph;
        }
        if (!is_word(t.surface)) continue;
        words.push_back(to_lower(t.surface));
        syllables.push_back(count_syllables(t.surface));
        const auto lc = letter_count(t.surface);
        letters += lc;
        if (lc > 6) ++long_words;
        if (is_content_pos(t.pos)) pos_counts[0] += 1;
        if (t.pos == "NOUN" || t.pos == "PROPN") pos_counts[1] += 1;
        if (t.pos == "VERB") pos_counts[2] += 1;
        if (t.pos == "ADJ") pos_counts[3] += 1;
        if (t.pos == "ADV") pos_counts[4] += 1;
    }
    const double n_words = static_cast<double>(words.size());

    // Window update (the window includes the current sentence).
    win.readability += readability_counts(sent, dale_chall_, spache_);
    for (const auto& w : words) win.add_word(w);
    append_capped(win.chars, chars + "\n");
    append_capped(win.pos, pos_stream + "\n");
    if (!morph_stream.empty()) append_capped(win.morph, morph_stream + "\n");

    // Morpho-syntactic complexity.
    const auto cs = clause_stats(sent);
    const double clauses = std::max(1.0, cs.clauses);
    double* m = out.data();
    m[0] = cs.words;
    m[1] = cs.words / clauses;
    m[2] = cs.clauses;
    m[3] = cs.dependent_clauses / clauses;
    m[4] = cs.dependent_clauses / cs.t_units;
    m[5] = cs.t_units;
    m[6] = cs.words / cs.t_units;
    m[7] = cs.complex_t_units / cs.t_units;
    m[8] = cs.verb_phrases;
    m[9] = cs.verb_phrases / cs.t_units;
    m[10] = cs.complex_nominals / clauses;
    m[11] = cs.complex_nominals / cs.t_units;
    m[12] = cs.coordinate_phrases / clauses;
    m[13] = cs.coordinate_phrases / cs.t_units;
    m[14] = cs.dependency_distance;
    m[15] = cs.prepositions / clauses;
    m[16] = deflate_ratio(tail(win.chars, kDeflateWindowBytes));
    m[17] = deflate_ratio(tail(win.pos, kDeflateWindowBytes));
    m[18] = win.morph.empty() ? 1.0 : deflate_ratio(tail(win.morph, kDeflateWindowBytes));

    // Lexical richness, diversity and sophistication.
    double* l = out.data() + lexical_offset_;
    l[0] = ratio(pos_counts[0], n_words);
    l[1] = ratio(pos_counts[1], n_words);
    l[2] = ratio(pos_counts[2], n_words);
    l[3] = ratio(pos_counts[3], n_words);
    l[4] = ratio(pos_counts[4], n_words);
    {
        std::unordered_set<std::string> sentence_types(words.begin(), words.end());
        l[5] = ratio(static_cast<double>(sentence_types.size()), n_words);
    }
    const double T = static_cast<double>(win.types.size());
    const double N = static_cast<double>(win.tokens);
    l[6] = carroll_cttr(win.types.size(), win.tokens);
    l[7] = N > 0 ? T / std::sqrt(N) : 0.0;
    l[8] = N > 1 ? std::log(T) / std::log(N) : (N > 0 ? 1.0 : 0.0);
    l[9] = (N > 0 && std::log(N) - std::log(T) > 1e-12) ? std::pow(std::log(N), 2) / (std::log(N) - std::log(T)) : 0.0;
    l[10] = win.mattr();
    l[11] = ratio(static_cast<double>(letters), n_words);
    double syl_total = 0;
    for (int s : syllables) syl_total += s;
    l[12] = ratio(syl_total, n_words);
    l[13] = ratio(static_cast<double>(long_words), n_words);

    std::size_t slot = lexical_offset_ + kLexicalBuiltinCount;
    for (const auto& list : store_.wordlists()) {
        double hits = 0;
        for (const auto& w : words) hits += list.contains(w) ? 1.0 : 0.0;
        out[slot++] = ratio(hits, n_words);
    }
    for (const auto& norm : store_.norms()) {
        double sum = 0, hits = 0;
        for (const auto& w : words) {
            if (auto v = norm.get(w)) {
                sum += *v;
                hits += 1;
            }
        }
        out[slot++] = ratio(sum, hits);
        out[slot++] = ratio(hits, n_words);
    }
    for (const auto& table : store_.freq_tables()) {
        const auto n = static_cast<std::size_t>(table.n());
        double sum = 0, hits = 0, grams = 0;
        for (std::size_t i = 0; i + n <= words.size(); ++i) {
            std::string key = words[i];
            for (std::size_t k = 1; k < n; ++k) {
                key.push_back(' ');
                key += words[i + k];
            }
            grams += 1;
            if (auto stat = table.lookup_key(key)) {
                sum += stat->log10_freq;
                hits += 1;
            }
        }
        out[slot++] = ratio(sum, hits);
        out[slot++] = ratio(hits, grams);
    }

    // Readability over the cumulative window.
    const auto scores = readability_scores(win.readability);
    std::copy(scores.begin(), scores.end(), out.begin() + static_cast<std::ptrdiff_t>(readability_offset_));

    // Lexicon means over matched words.
    slot = sentiemo_offset_;
    for (const auto& lex : store_.lexicons()) {
        const auto k = lex.subcategories().size();
        std::vector<double> sums(k, 0.0), counts(k, 0.0);
        double matched = 0;
        for (const auto& w : words) {
            const auto* entry = lex.match(w);
            if (!entry) continue;
            matched += 1;
            for (const auto& [sub, score] : *entry) {
                sums[sub] += score;
                counts[sub] += 1;
            }
        }
        for (std::size_t s = 0; s < k; ++s) out[slot++] = ratio(sums[s], counts[s]);
        out[slot++] = ratio(matched, n_words);
    }

    for (double v : out) {
        if (!std::isfinite(v)) throw NumericError("non-finite feature value in sentence " + std::to_string(sent.index));
    }
}

std::vector<double> FeatureExtractor::catalog_row(const Sentence& sent, std::span<const Sentence> context) const {
    Window win;
    std::vector<double> scratch;
    for (const auto& s : context) compute_catalog(s, win, scratch);
    std::vector<double> row;
    compute_catalog(sent, win, row);
    return row;
}

std::vector<double> FeatureExtractor::sentence_features(const Sentence& sent, std::span<const Sentence> context) const {
    if (sent.tokens.empty()) throw UsageError("sentence_features needs a non-empty sentence");
    const auto full = catalog_row(sent, context);
    std::vector<double> row(registry_.dimension());
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = full[registry_.catalog_slots()[i]];
    return row;
}

std::vector<std::vector<double>> FeatureExtractor::document_rows(std::span<const Sentence> sentences) const {
    Window win;
    std::vector<double> full;
    std::vector<std::vector<double>> rows;
    rows.reserve(sentences.size());
    for (const auto& s : sentences) {
        if (s.tokens.empty()) throw UsageError("empty sentence " + std::to_string(s.index));
        compute_catalog(s, win, full);
        std::vector<double> row(registry_.dimension());
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = full[registry_.catalog_slots()[i]];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> FeatureExtractor::morphsyn_features(const Sentence& sent, std::span<const Sentence> context) const {
    const auto full = catalog_row(sent, context);
    return {full.begin(), full.begin() + kMorphSynCount};
}

std::vector<double> FeatureExtractor::readability_features(const Sentence& sent,
                                                           std::span<const Sentence> context) const {
    const auto full = catalog_row(sent, context);
    const auto b = full.begin() + static_cast<std::ptrdiff_t>(readability_offset_);
    return {b, b + kReadabilityCount};
}

std::vector<double> sentence_features(const Sentence& sent, std::span<const Sentence> context,
                                      const ResourceStore& store, const FeatureRegistry& registry) {
    return FeatureExtractor(store, registry).sentence_features(sent, context);
}

}  // namespace psycontour
