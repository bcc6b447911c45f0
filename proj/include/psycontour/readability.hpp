#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace psycontour {

// Raw counts over a window of sentences. Word-level counts only consider word tokens.
struct ReadabilityCounts {
    double sentences = 0;
    double words = 0;
    double syllables = 0;
    double letters = 0;          // letters and digits
    double polysyllables = 0;    // >= 3 syllables
    double monosyllables = 0;
    double long_words = 0;       // > 6 letters
    double dale_chall_difficult = 0;  // not on the Dale-Chall familiar list
    double spache_unfamiliar = 0;     // not on the Spache list

    ReadabilityCounts& operator+=(const ReadabilityCounts& o);
};

inline constexpr std::size_t kReadabilityCount = 14;

enum class Readability : std::size_t {
    FleschReadingEase,
    FleschKincaidGrade,
    Smog,
    GunningFog,
    ColemanLiau,
    Ari,
    Lix,
    Rix,
    DaleChall,
    Forcast,
    LinsearWrite,
    FryGrade,
    Spache,
    Strain,
};

const std::array<std::string_view, kReadabilityCount>& readability_names();

// All 14 formulas. Ratios with a zero denominator evaluate to 0, so every score is
// finite for any non-negative counts.
//
//   flesch_reading_ease   206.835 - 1.015 W/S - 84.6 Y/W
//   flesch_kincaid_grade  0.39 W/S + 11.8 Y/W - 15.59
//   smog                  1.0430 sqrt(P * 30 / S) + 3.1291
//   gunning_fog           0.4 (W/S + 100 P/W)
//   coleman_liau          0.0588 (100 C/W) - 0.296 (100 S/W) - 15.8
//   ari                   4.71 C/W + 0.5 W/S - 21.43
//   lix                   W/S + 100 Lw/W
//   rix                   Lw/S
//   dale_chall            0.1579 (100 D/W) + 0.0496 W/S, + 3.6365 when D/W > 0.05
//   forcast               20 - (150 M/W) / 10
//   linsear_write         r = ((W - P) + 3 P) / S;  r > 20 ? r/2 : (r - 2)/2
//   fry_grade             1 + 16 (0.6 sx + 0.4 sy), sx = clamp((100 Y/W - 108) / 74),
//                         sy = clamp((25 - 100 S/W) / 21.4), clamp to [0, 1]
//   spache                0.121 W/S + 0.082 (100 U/W) + 0.659
//   strain                3 Y / (10 S)
//
// S sentences, W words, Y syllables, C letters, P polysyllables, M monosyllables,
// Lw words longer than six letters, D Dale-Chall difficult words, U Spache unfamiliar words.
std::array<double, kReadabilityCount> readability_scores(const ReadabilityCounts& c);

}  // namespace psycontour
