#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace psycontour {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// A token counts as a word when it has at least one letter, digit or non-ASCII byte.
bool is_word(std::string_view surface);

// Letters and digits in a word (non-ASCII bytes of a UTF-8 sequence count once).
std::size_t letter_count(std::string_view surface);

}  // namespace psycontour
