#include "psycontour/text.hpp"

#include <cctype>

namespace psycontour {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

bool is_word(std::string_view surface) {
    for (unsigned char c : surface) {
        if (std::isalnum(c) || c >= 0x80) return true;
    }
    return false;
}

std::size_t letter_count(std::string_view surface) {
    std::size_t n = 0;
    for (unsigned char c : surface) {
        if (std::isalnum(c) || (c >= 0xC0)) ++n;  // skip UTF-8 continuation bytes
    }
    return n;
}

}  // namespace psycontour
