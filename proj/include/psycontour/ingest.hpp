#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace psycontour {

enum class Schema { BigFive, MBTI };

// Trait keys in reporting order: O C E A N for Big Five, I/E N/S T/F P/J for MBTI.
const std::vector<std::string>& trait_names(Schema schema);
std::string schema_name(Schema schema);
Schema parse_schema(std::string_view name);

struct Document {
    std::string id;
    std::string text;
    std::map<std::string, int> labels;
};

inline constexpr int kNoHead = -1;
inline constexpr int kRootHead = -2;

struct Token {
    std::string surface;
    std::string lemma;
    std::string pos = "UNKNOWN";  // universal POS tag
    std::string deprel;           // empty when no parse is available
    int head = kNoHead;           // 0-based token index, kRootHead, or kNoHead
    std::string morph;
    // Byte span in Document::text; both zero for tokens read from CoNLL-U.
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct Sentence {
    std::vector<Token> tokens;
    std::size_t index = 0;
    bool parsed = false;  // true when tokens carry dependency annotations
};

enum class DatasetFormat { EssaysCsv, MbtiCsv };
DatasetFormat parse_format(std::string_view name);

// Maps logical fields (id, text, O, C, E, A, N) onto CSV header names.
struct EssaysColumns {
    std::string id = "#AUTHID";
    std::string text = "TEXT";
    std::map<std::string, std::string> traits = {
        {"E", "cEXT"}, {"N", "cNEU"}, {"A", "cAGR"}, {"C", "cCON"}, {"O", "cOPN"}};

    // key = value lines; keys: id, text, O, C, E, A, N.
    static EssaysColumns from_file(const std::filesystem::path& path);
};

std::vector<Document> load_dataset(const std::filesystem::path& path, Schema schema,
                                   DatasetFormat format,
                                   const EssaysColumns& columns = EssaysColumns{});
std::vector<Document> read_essays(std::istream& in, const std::string& source,
                                  const EssaysColumns& columns = EssaysColumns{});
std::vector<Document> read_mbti(std::istream& in, const std::string& source);

// Decomposes a four-letter MBTI type; the first letter of each pair name is label 1.
std::map<std::string, int> mbti_labels(std::string_view type);

// Abbreviations that keep their trailing period and never end a sentence.
class AbbreviationList {
public:
    AbbreviationList();  // shipped default list
    explicit AbbreviationList(std::istream& in);
    bool contains(std::string_view lowered_without_period) const;
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

std::vector<Token> tokenize(std::string_view text, std::size_t offset = 0,
                            const AbbreviationList& abbreviations = AbbreviationList{});

// Tokenizes, splits into sentences and assigns heuristic coarse POS tags.
std::vector<Sentence> segment(const Document& doc);
std::vector<Sentence> segment(const Document& doc, const AbbreviationList& abbreviations);

using ParseMap = std::map<std::string, std::vector<Sentence>>;

ParseMap load_conllu(const std::filesystem::path& path);
ParseMap read_conllu(std::istream& in, const std::string& source);

// Ids present in `parses` but absent from `docs`, formatted as warnings.
std::vector<std::string> unmatched_parse_ids(const std::vector<Document>& docs, const ParseMap& parses);

// Parsed sentences when available for the document, built-in segmentation otherwise.
std::vector<Sentence> sentences_for(const Document& doc, const ParseMap* parses);

}  // namespace psycontour
