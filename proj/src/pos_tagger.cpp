#include "psycontour/pos_tagger.hpp"

#include <cctype>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "psycontour/text.hpp"

namespace psycontour {
namespace {

const std::unordered_map<std::string_view, std::string_view>& closed_class() {
    static const auto* table = [] {
        auto* m = new std::unordered_map<std::string_view, std::string_view>;
        const auto put = [m](std::string_view tag, std::initializer_list<std::string_view> words) {
            for (auto w : words) m->emplace(w, tag);
        };
        put("DET", {"the", "a", "an", "this", "these", "those", "every", "each", "some", "any", "no", "my",
                    "your", "his", "her", "its", "our", "their", "another", "either", "neither", "all", "both"});
        put("PRON", {"i", "me", "you", "he", "him", "she", "it", "we", "us", "they", "them", "myself",
                     "yourself", "himself", "herself", "itself", "ourselves", "themselves", "yourselves",
                     "mine", "yours", "hers", "ours", "theirs", "who", "whom", "whose", "what", "which",
                     "that", "someone", "somebody", "something", "anyone", "anybody", "anything",
                     "everyone", "everybody", "everything", "nobody", "nothing", "none"});
        put("CCONJ", {"and", "but", "or", "nor", "yet"});
        put("SCONJ", {"because", "although", "though", "if", "when", "whenever", "while", "whereas",
                      "unless", "whether", "once", "cause"});
        put("ADP", {"in", "on", "at", "of", "to", "for", "with", "from", "by", "about", "into", "over",
                    "under", "between", "through", "during", "without", "within", "against", "among",
                    "around", "behind", "beyond", "upon", "across", "along", "toward", "towards", "near",
                    "off", "out", "up", "down", "after", "before", "since", "until", "till", "as"});
        put("AUX", {"am", "is", "are", "was", "were", "be", "been", "being", "has", "have", "had",
                    "having", "do", "does", "did", "will", "would", "can", "could", "shall", "should",
                    "may", "might", "must", "cannot", "gonna", "wanna"});
        put("PART", {"not", "n't"});
        put("ADV", {"very", "really", "too", "also", "just", "so", "never", "always", "often", "sometimes",
                    "usually", "already", "still", "even", "only", "quite", "rather", "almost", "then",
                    "there", "here", "now", "maybe", "perhaps", "soon", "again", "ever", "how", "why",
                    "where", "well", "much", "more", "most", "less", "least", "today", "tomorrow",
                    "yesterday", "tonight", "together", "away", "back", "anyway"});
        put("INTJ", {"oh", "ah", "um", "uh", "wow", "yeah", "yes", "hey", "ok", "okay", "lol", "haha", "hmm",
                     "hello", "hi", "please", "thanks"});
        put("NUM", {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
                    "hundred", "thousand", "million", "billion"});
        return m;
    }();
    return *table;
}

const std::unordered_set<std::string_view>& frequent_verbs() {
    static const std::unordered_set<std::string_view> verbs = {
        "think", "thought", "know", "knew", "known", "want", "like", "feel", "felt", "go", "went", "gone",
        "get", "got", "gotten", "make", "made", "say", "said", "see", "saw", "seen", "come", "came", "take",
        "took", "taken", "love", "hate", "need", "ran", "run", "left", "told", "tell", "became", "become",
        "found", "find", "gave", "give", "given", "heard", "hear", "kept", "keep", "meant", "mean", "met",
        "meet", "paid", "pay", "put", "sat", "sit", "stood", "stand", "understood", "understand", "wrote",
        "write", "written", "seem", "seems", "try", "tried", "let", "began", "begin", "begun", "bring",
        "brought", "buy", "bought", "eat", "ate", "eaten", "sleep", "slept", "believe", "hope", "wish",
        "guess", "wonder", "remember", "forget", "forgot", "look", "looks", "live", "lives", "work",
        "works", "play", "plays", "read", "speak", "spoke", "spoken", "lost", "lose", "win", "won", "hold",
        "held", "fell", "fall", "grow", "grew", "thinks", "knows", "wants", "likes", "feels", "goes", "gets",
        "makes", "says", "sees", "comes", "takes", "loves", "hates", "needs", "tells", "gives", "keeps",
        "means", "shows", "show", "learn", "learned", "study", "studied", "miss", "missed"};
    return verbs;
}

const std::unordered_set<std::string_view>& ly_nouns() {
    static const std::unordered_set<std::string_view> words = {
        "family", "reply", "supply", "apply", "fly", "rely", "ally", "belly", "july", "italy", "lily",
        "jelly", "bully", "holly", "ugly", "silly", "lonely", "lovely", "friendly", "likely", "early"};
    return words;
}

const std::unordered_set<std::string_view>& ing_ed_nouns() {
    static const std::unordered_set<std::string_view> words = {
        "thing", "something", "nothing", "anything", "everything", "morning", "evening", "king", "ring",
        "spring", "string", "wing", "ceiling", "building", "wedding", "meeting", "bed", "red", "shed",
        "seed", "speed", "hundred", "sacred", "naked", "wicked", "during", "sing", "bring"};
    return words;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_number(std::string_view s) {
    bool digit = false;
    for (unsigned char c : s) {
        if (std::isdigit(c)) {
            digit = true;
        } else if (c != '.' && c != ',' && c != '%' && c != '$') {
            return false;
        }
    }
    return digit;
}

std::string_view contraction_tag(std::string_view w) {
    if (ends_with(w, "n't") || ends_with(w, "'m") || ends_with(w, "'re") || ends_with(w, "'ve") ||
        ends_with(w, "'ll") || ends_with(w, "'d")) {
        return "AUX";
    }
    if (ends_with(w, "'s")) {
        static const std::unordered_set<std::string_view> bases = {
            "it", "he", "she", "that", "what", "there", "here", "who", "let", "where", "how"};
        return bases.count(w.substr(0, w.size() - 2)) ? "AUX" : "NOUN";
    }
    return {};
}

std::string_view suffix_tag(std::string_view w) {
    if (ends_with(w, "ly") && !ly_nouns().count(w)) return "ADV";
    if ((ends_with(w, "ing") && w.size() > 4) || (ends_with(w, "ed") && w.size() > 3)) {
        if (!ing_ed_nouns().count(w)) return "VERB";
    }
    for (auto s : {"ous", "ful", "able", "ible", "ive", "less", "ic", "ish", "ical"}) {
        if (ends_with(w, s) && w.size() > std::string_view(s).size() + 2) return "ADJ";
    }
    return {};
}

}  // namespace

bool is_subject_pronoun(std::string_view w) {
    return w == "i" || w == "you" || w == "he" || w == "she" || w == "it" || w == "we" || w == "they";
}

bool is_subordinator(std::string_view w) {
    auto it = closed_class().find(w);
    return it != closed_class().end() && it->second == "SCONJ";
}

bool is_ambiguous_subordinator(std::string_view w) {
    return w == "after" || w == "before" || w == "since" || w == "until" || w == "till" || w == "as";
}

bool is_relative_pronoun(std::string_view w) {
    return w == "who" || w == "whom" || w == "whose" || w == "which" || w == "that";
}

void tag_heuristic(std::vector<Token>& tokens) {
    const auto& closed = closed_class();
    std::string prev_content_tag;  // last tag that was not ADV/PART
    std::string prev_lower;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto& tok = tokens[i];
        const std::string w = to_lower(tok.surface);
        std::string_view tag;
        if (!is_word(w)) {
            tag = "PUNCT";
        } else if (is_number(w)) {
            tag = "NUM";
        } else if (auto it = closed.find(w); it != closed.end()) {
            tag = it->second;
        } else if (auto c = contraction_tag(w); !c.empty()) {
            tag = c;
        } else if (frequent_verbs().count(w) ||
                   (!prev_lower.empty() && (is_subject_pronoun(prev_lower) || prev_content_tag == "AUX") &&
                    suffix_tag(w) != "ADV")) {
            tag = "VERB";
        } else if (auto s = suffix_tag(w); !s.empty()) {
            tag = s;
        } else if (i > 0 && std::isupper(static_cast<unsigned char>(tok.surface[0]))) {
            tag = "PROPN";
        } else {
            tag = "NOUN";
        }
        tok.pos = std::string(tag);
        if (tag != "ADV" && tag != "PART") {
            prev_content_tag = tok.pos;
            prev_lower = w;
        }
    }
}

}  // namespace psycontour
