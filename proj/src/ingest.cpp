#include "psycontour/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "psycontour/csv.hpp"
#include "psycontour/error.hpp"
#include "psycontour/pos_tagger.hpp"
#include "psycontour/text.hpp"

namespace psycontour {

namespace detail {
extern const char* const kDefaultAbbreviations;
}

const std::vector<std::string>& trait_names(Schema schema) {
    static const std::vector<std::string> big_five = {"O", "C", "E", "A", "N"};
    static const std::vector<std::string> mbti = {"I/E", "N/S", "T/F", "P/J"};
    return schema == Schema::BigFive ? big_five : mbti;
}

std::string schema_name(Schema schema) { return schema == Schema::BigFive ? "bigfive" : "mbti"; }

Schema parse_schema(std::string_view name) {
    const auto n = to_lower(name);
    if (n == "bigfive" || n == "big5" || n == "essays") return Schema::BigFive;
    if (n == "mbti") return Schema::MBTI;
    throw UsageError("unknown label schema '" + std::string(name) + "' (expected bigfive or mbti)");
}

DatasetFormat parse_format(std::string_view name) {
    if (name == "essays-csv") return DatasetFormat::EssaysCsv;
    if (name == "mbti-csv") return DatasetFormat::MbtiCsv;
    throw UsageError("unknown dataset format '" + std::string(name) + "' (expected essays-csv or mbti-csv)");
}

EssaysColumns EssaysColumns::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open column map: " + path.string());
    EssaysColumns cols;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto t = trim(line);
        if (t.empty() || t.front() == ';' || (t.front() == '#' && t.find('=') == std::string_view::npos)) continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": expected key = column");
        }
        const std::string key(trim(t.substr(0, eq)));
        const std::string value(trim(t.substr(eq + 1)));
        if (key == "id") {
            cols.id = value;
        } else if (key == "text") {
            cols.text = value;
        } else if (cols.traits.count(key)) {
            cols.traits[key] = value;
        } else {
            throw DataError(path.string() + ":" + std::to_string(n) + ": unknown key '" + key + "'");
        }
    }
    return cols;
}

namespace {

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::string& source) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::string> read_header(CsvReader& reader, const std::string& source) {
    CsvRow row;
    if (!reader.next(row)) throw DataError(source + ": missing header row");
    for (auto& f : row.fields) f = std::string(trim(f));
    // Byte-order mark on the first column name.
    if (!row.fields.empty() && row.fields[0].rfind("\xEF\xBB\xBF", 0) == 0) row.fields[0].erase(0, 3);
    return row.fields;
}

bool blank_row(const CsvRow& row) {
    return row.fields.size() == 1 && trim(row.fields[0]).empty();
}

int parse_flag(std::string_view v, const std::string& source, std::size_t line, const std::string& column) {
    const auto s = to_lower(trim(v));
    if (s == "y" || s == "yes" || s == "1" || s == "true") return 1;
    if (s == "n" || s == "no" || s == "0" || s == "false") return 0;
    throw DataError(source + ":" + std::to_string(line) + ": column " + column + " has non-binary value '" +
                    std::string(v) + "'");
}

void check_unique(const std::vector<Document>& docs, const std::string& source) {
    std::set<std::string> seen;
    for (const auto& d : docs) {
        if (d.id.empty()) throw DataError(source + ": empty document id");
        if (!seen.insert(d.id).second) throw DataError(source + ": duplicate document id '" + d.id + "'");
    }
}

}  // namespace

std::vector<Document> read_essays(std::istream& in, const std::string& source, const EssaysColumns& columns) {
    CsvReader reader(in);
    const auto header = read_header(reader, source);
    const auto id_col = column_index(header, columns.id, source);
    const auto text_col = column_index(header, columns.text, source);
    std::vector<std::pair<std::string, std::size_t>> trait_cols;
    for (const auto& trait : trait_names(Schema::BigFive)) {
        trait_cols.emplace_back(trait, column_index(header, columns.traits.at(trait), source));
    }

    std::vector<Document> docs;
    CsvRow row;
    while (reader.next(row)) {
        if (blank_row(row)) continue;
        if (row.fields.size() != header.size()) {
            throw DataError(source + ":" + std::to_string(row.line) + ": malformed row, expected " +
                            std::to_string(header.size()) + " columns, got " + std::to_string(row.fields.size()));
        }
        Document doc;
        doc.id = std::string(trim(row.fields[id_col]));
        doc.text = row.fields[text_col];
        for (const auto& [trait, col] : trait_cols) {
            doc.labels[trait] = parse_flag(row.fields[col], source, row.line, header[col]);
        }
        docs.push_back(std::move(doc));
    }
    check_unique(docs, source);
    return docs;
}

std::map<std::string, int> mbti_labels(std::string_view type) {
    const auto t = trim(type);
    if (t.size() != 4) throw DataError("MBTI type '" + std::string(type) + "' must have four letters");
    static const char pairs[4][2] = {{'I', 'E'}, {'N', 'S'}, {'T', 'F'}, {'P', 'J'}};
    const auto& names = trait_names(Schema::MBTI);
    std::map<std::string, int> labels;
    for (std::size_t i = 0; i < 4; ++i) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(t[i])));
        if (c == pairs[i][0]) {
            labels[names[i]] = 1;
        } else if (c == pairs[i][1]) {
            labels[names[i]] = 0;
        } else {
            throw DataError("unknown MBTI letter '" + std::string(1, t[i]) + "' in type '" + std::string(t) +
                            "' (position " + std::to_string(i + 1) + " expects " + pairs[i][0] + " or " +
                            pairs[i][1] + ")");
        }
    }
    return labels;
}

std::vector<Document> read_mbti(std::istream& in, const std::string& source) {
    CsvReader reader(in);
    const auto header = read_header(reader, source);
    const auto type_col = column_index(header, "type", source);
    const auto posts_col = column_index(header, "posts", source);

    std::vector<Document> docs;
    CsvRow row;
    std::size_t index = 0;
    while (reader.next(row)) {
        if (blank_row(row)) continue;
        if (row.fields.size() != header.size()) {
            throw DataError(source + ":" + std::to_string(row.line) + ": malformed row, expected " +
                            std::to_string(header.size()) + " columns, got " + std::to_string(row.fields.size()));
        }
        ++index;
        Document doc;
        doc.id = "mbti_" + std::to_string(index);
        try {
            doc.labels = mbti_labels(row.fields[type_col]);
        } catch (const DataError& e) {
            throw DataError(source + ":" + std::to_string(row.line) + ": " + e.what());
        }
        // Post separators become paragraph breaks, which always end a sentence.
        const std::string& posts = row.fields[posts_col];
        doc.text.reserve(posts.size());
        for (std::size_t i = 0; i < posts.size();) {
            if (posts.compare(i, 3, "|||") == 0) {
                doc.text += "\n\n";
                i += 3;
            } else {
                doc.text.push_back(posts[i++]);
            }
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> load_dataset(const std::filesystem::path& path, Schema schema, DatasetFormat format,
                                   const EssaysColumns& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + path.string());
    if (format == DatasetFormat::EssaysCsv) {
        if (schema != Schema::BigFive) throw DataError("essays-csv carries Big Five labels, not MBTI");
        return read_essays(in, path.string(), columns);
    }
    if (schema != Schema::MBTI) throw DataError("mbti-csv carries MBTI labels, not Big Five");
    return read_mbti(in, path.string());
}

AbbreviationList::AbbreviationList() {
    std::istringstream in(detail::kDefaultAbbreviations);
    *this = AbbreviationList(in);
}

AbbreviationList::AbbreviationList(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::string w = to_lower(t);
        if (!w.empty() && w.back() == '.') w.pop_back();
        words_.insert(std::move(w));
    }
}

bool AbbreviationList::contains(std::string_view w) const { return words_.count(std::string(w)) > 0; }

namespace {

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

bool keeps_period(std::string_view core, const AbbreviationList& abbreviations) {
    if (core.empty() || !is_word(core)) return false;
    if (core.size() == 1 && std::isalpha(static_cast<unsigned char>(core[0]))) return true;  // initials
    if (core.find('.') != std::string_view::npos) return true;                              // e.g, U.S
    return abbreviations.contains(to_lower(core));
}

void push(std::vector<Token>& out, std::string_view text, std::size_t begin, std::size_t end, std::size_t offset) {
    Token t;
    t.surface = std::string(text.substr(begin, end - begin));
    t.lemma = to_lower(t.surface);
    t.begin = offset + begin;
    t.end = offset + end;
    out.push_back(std::move(t));
}

// Splits one whitespace-free chunk [b, e) into leading punctuation runs, a core and trailing runs.
void tokenize_chunk(std::string_view text, std::size_t b, std::size_t e, std::size_t offset,
                    const AbbreviationList& abbreviations, std::vector<Token>& out) {
    std::size_t lo = b;
    while (lo < e && is_punct(text[lo])) {
        std::size_t run = lo + 1;
        while (run < e && text[run] == text[lo]) ++run;
        if (run == e) {
            push(out, text, lo, run, offset);
            return;
        }
        push(out, text, lo, run, offset);
        lo = run;
    }
    std::vector<std::pair<std::size_t, std::size_t>> trailing;
    std::size_t hi = e;
    while (hi > lo && is_punct(text[hi - 1])) {
        std::size_t run = hi - 1;
        while (run > lo && text[run - 1] == text[hi - 1]) --run;
        trailing.emplace_back(run, hi);
        hi = run;
    }
    // A lone period after an abbreviation stays attached to it.
    if (!trailing.empty()) {
        const auto [rb, re] = trailing.back();
        if (re - rb == 1 && text[rb] == '.' && keeps_period(text.substr(lo, hi - lo), abbreviations)) {
            hi = re;
            trailing.pop_back();
        }
    }
    if (hi > lo) push(out, text, lo, hi, offset);
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) push(out, text, it->first, it->second, offset);
}

bool is_terminal(const Token& t) {
    return !t.surface.empty() &&
           std::all_of(t.surface.begin(), t.surface.end(), [](char c) { return c == '.' || c == '!' || c == '?'; });
}

bool is_closer(const Token& t) {
    if (t.surface == "\xE2\x80\x9D" || t.surface == "\xE2\x80\x99") return true;
    return !t.surface.empty() && std::all_of(t.surface.begin(), t.surface.end(), [](char c) {
        return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}';
    });
}

bool opens_sentence(const Token& t) {
    const unsigned char c = static_cast<unsigned char>(t.surface[0]);
    if (std::isupper(c) || std::isdigit(c) || c == '"' || c == '\'') return true;
    return t.surface.rfind("\xE2\x80\x9C", 0) == 0 || t.surface.rfind("\xE2\x80\x98", 0) == 0;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text, std::size_t offset, const AbbreviationList& abbreviations) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t b = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > b) tokenize_chunk(text, b, i, offset, abbreviations, out);
    }
    return out;
}

std::vector<Sentence> segment(const Document& doc) {
    static const AbbreviationList defaults;
    return segment(doc, defaults);
}

std::vector<Sentence> segment(const Document& doc, const AbbreviationList& abbreviations) {
    if (trim(doc.text).empty()) throw DataError("empty document" + (doc.id.empty() ? "" : " '" + doc.id + "'"));
    const std::string_view text = doc.text;
    auto tokens = tokenize(text, 0, abbreviations);

    const auto paragraph_break = [&](std::size_t from, std::size_t to) {
        return std::count(text.begin() + static_cast<std::ptrdiff_t>(from),
                          text.begin() + static_cast<std::ptrdiff_t>(to), '\n') >= 2;
    };

    std::vector<Sentence> sentences;
    Sentence current;
    const auto flush = [&] {
        if (current.tokens.empty()) return;
        current.index = sentences.size();
        tag_heuristic(current.tokens);
        sentences.push_back(std::move(current));
        current = Sentence{};
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        current.tokens.push_back(std::move(tokens[i]));
        if (i + 1 == tokens.size()) break;
        const Token& last = current.tokens.back();
        Token& next = tokens[i + 1];
        const bool gap = next.begin > last.end;
        if (gap && paragraph_break(last.end, next.begin)) {
            flush();
            continue;
        }
        if (!is_terminal(last)) continue;
        // Absorb closing quotes/brackets and further terminal runs glued to the terminator.
        std::size_t j = i + 1;
        while (j < tokens.size() && tokens[j].begin == current.tokens.back().end &&
               (is_closer(tokens[j]) || is_terminal(tokens[j]))) {
            current.tokens.push_back(std::move(tokens[j]));
            ++j;
        }
        i = j - 1;
        if (j == tokens.size()) break;
        if (tokens[j].begin > current.tokens.back().end && opens_sentence(tokens[j])) flush();
    }
    flush();
    return sentences;
}

ParseMap load_conllu(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CoNLL-U file: " + path.string());
    return read_conllu(in, path.string());
}

ParseMap read_conllu(std::istream& in, const std::string& source) {
    ParseMap out;
    std::string current_doc;
    Sentence sent;
    std::size_t sent_line = 0;
    std::vector<int> raw_heads;
    std::size_t line_no = 0;

    const auto err = [&](std::size_t line, const std::string& msg) {
        return DataError(source + ":" + std::to_string(line) + ": " + msg);
    };
    const auto finish = [&] {
        if (sent.tokens.empty()) return;
        const int n = static_cast<int>(sent.tokens.size());
        for (int i = 0; i < n; ++i) {
            const int h = raw_heads[static_cast<std::size_t>(i)];
            if (h > n) {
                throw err(sent_line, "head " + std::to_string(h) + " exceeds the sentence's " + std::to_string(n) +
                                         " tokens");
            }
            sent.tokens[static_cast<std::size_t>(i)].head = h < 0 ? kNoHead : (h == 0 ? kRootHead : h - 1);
        }
        auto& doc = out[current_doc];
        sent.index = doc.size();
        sent.parsed = true;
        doc.push_back(std::move(sent));
        sent = Sentence{};
        raw_heads.clear();
    };

    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            finish();
            continue;
        }
        if (line[0] == '#') {
            const auto body = trim(std::string_view(line).substr(1));
            if (body.rfind("newdoc", 0) == 0) {
                finish();
                const auto eq = body.find('=');
                if (eq == std::string_view::npos) throw err(line_no, "'# newdoc' without an id");
                current_doc = std::string(trim(body.substr(eq + 1)));
                if (current_doc.empty()) throw err(line_no, "empty newdoc id");
            }
            continue;
        }
        const auto f = split(line, '\t');
        if (f.size() != 10) {
            throw err(line_no, "expected 10 tab-separated columns, got " + std::to_string(f.size()));
        }
        if (f[0].find('-') != std::string::npos || f[0].find('.') != std::string::npos) continue;
        int id = 0;
        if (std::from_chars(f[0].data(), f[0].data() + f[0].size(), id).ec != std::errc{}) {
            throw err(line_no, "invalid token id '" + f[0] + "'");
        }
        if (current_doc.empty()) throw err(line_no, "sentence outside any '# newdoc id' block");
        if (sent.tokens.empty()) sent_line = line_no;
        if (id != static_cast<int>(sent.tokens.size()) + 1) {
            throw err(line_no, "token id " + std::to_string(id) + " out of sequence (expected " +
                                   std::to_string(sent.tokens.size() + 1) + ")");
        }
        Token t;
        t.surface = f[1];
        if (t.surface.empty() || t.surface == "_") throw err(line_no, "empty token form");
        t.lemma = f[2] == "_" ? to_lower(t.surface) : f[2];
        t.pos = f[3] == "_" ? "UNKNOWN" : f[3];
        t.morph = f[5] == "_" ? "" : f[5];
        t.deprel = f[7] == "_" ? "" : f[7];
        int head = -1;
        if (f[6] != "_") {
            if (std::from_chars(f[6].data(), f[6].data() + f[6].size(), head).ec != std::errc{} || head < 0) {
                throw err(line_no, "invalid head '" + f[6] + "'");
            }
        }
        if (!t.deprel.empty() && head < 0) throw err(line_no, "dependency relation without a head");
        raw_heads.push_back(head);
        sent.tokens.push_back(std::move(t));
    }
    finish();
    return out;
}

std::vector<std::string> unmatched_parse_ids(const std::vector<Document>& docs, const ParseMap& parses) {
    std::set<std::string> ids;
    for (const auto& d : docs) ids.insert(d.id);
    std::vector<std::string> warnings;
    for (const auto& [id, _] : parses) {
        if (!ids.count(id)) warnings.push_back("CoNLL-U document '" + id + "' matches no loaded document");
    }
    return warnings;
}

std::vector<Sentence> sentences_for(const Document& doc, const ParseMap* parses) {
    if (parses) {
        if (auto it = parses->find(doc.id); it != parses->end() && !it->second.empty()) return it->second;
    }
    return segment(doc);
}

}  // namespace psycontour
