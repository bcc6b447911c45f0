#pragma once

#include <string_view>

namespace psycontour {

// Vowel-group syllable estimate for English words.
//  - letters only, lowercased; y is a vowel except word-initially
//  - words of up to three letters count 1
//  - silent final e (not -le after a consonant, not -ee) removes one group
//  - -ed after anything but t/d/e, and -es after anything but s/x/z/ch/sh/g/c or
//    consonant + l, remove one group
//  - a fixed exception table overrides the rules
// Returns 0 for strings without letters, at least 1 otherwise.
int count_syllables(std::string_view word);

}  // namespace psycontour
