#pragma once

#include <string_view>
#include <vector>

#include "psycontour/ingest.hpp"

namespace psycontour {

// Coarse universal POS from closed-class lookup, a short list of frequent verbs and
// suffix rules. Overwrites Token::pos; meant for text without external annotations.
void tag_heuristic(std::vector<Token>& tokens);

bool is_subject_pronoun(std::string_view lowered);
bool is_subordinator(std::string_view lowered);
// after/before/since/until/as/till: subordinating only when a clause subject follows.
bool is_ambiguous_subordinator(std::string_view lowered);
bool is_relative_pronoun(std::string_view lowered);

}  // namespace psycontour
