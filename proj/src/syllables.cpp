#include "psycontour/syllables.hpp"

#include <cctype>
#include <string>
#include <unordered_map>

namespace psycontour {
namespace {

const std::unordered_map<std::string_view, int>& exceptions() {
    static const std::unordered_map<std::string_view, int> table = {
        {"area", 3},     {"idea", 3},      {"create", 2},   {"created", 3},   {"every", 2},
        {"everything", 3}, {"everyone", 3}, {"business", 2}, {"people", 2},   {"being", 2},
        {"real", 1},     {"really", 2},    {"science", 2},  {"quiet", 2},     {"poem", 2},
        {"poet", 2},     {"lion", 2},      {"diet", 2},     {"via", 2},       {"naive", 2},
        {"fire", 1},     {"hour", 1},      {"our", 1},      {"family", 3},    {"different", 3},
        {"interesting", 4}, {"evening", 2}, {"probably", 3}, {"actually", 4}, {"usually", 4},
        {"whole", 1},    {"some", 1},      {"come", 1},     {"done", 1},      {"gone", 1},
        {"one", 1},      {"once", 1},      {"where", 1},    {"there", 1},     {"here", 1},
        {"were", 1},     {"more", 1},      {"before", 2},   {"themselves", 2}, {"sometimes", 2},
        {"someone", 2},  {"something", 2}, {"anyone", 3},   {"maybe", 2},     {"able", 2},
        {"everybody", 4}, {"anybody", 4},  {"somebody", 3},
    };
    return table;
}

bool vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; }

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

int count_syllables(std::string_view word) {
    std::string w;
    w.reserve(word.size());
    for (unsigned char c : word) {
        if (std::isalpha(c)) w.push_back(static_cast<char>(std::tolower(c)));
    }
    if (w.empty()) return 0;
    if (auto it = exceptions().find(w); it != exceptions().end()) return it->second;
    if (w.size() <= 3) return 1;

    int groups = 0;
    bool in_group = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const bool v = vowel(w[i]) && !(i == 0 && w[i] == 'y');
        if (v && !in_group) ++groups;
        in_group = v;
    }

    const std::size_t n = w.size();
    if (groups > 1) {
        if (w[n - 1] == 'e' && !ends_with(w, "ee") && !(ends_with(w, "le") && !vowel(w[n - 3]))) {
            --groups;
        } else if (ends_with(w, "ed") && w[n - 3] != 't' && w[n - 3] != 'd' && w[n - 3] != 'e') {
            --groups;
        } else if (ends_with(w, "es") && !vowel(w[n - 3]) && !ends_with(w, "ses") && !ends_with(w, "xes") &&
                   !ends_with(w, "zes") && !ends_with(w, "ches") && !ends_with(w, "shes") &&
                   !ends_with(w, "ges") && !ends_with(w, "ces") &&
                   !(ends_with(w, "les") && !vowel(w[n - 4]))) {
            --groups;
        }
    }
    return groups < 1 ? 1 : groups;
}

}  // namespace psycontour
