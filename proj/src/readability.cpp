#include "psycontour/readability.hpp"

#include <algorithm>
#include <cmath>

namespace psycontour {

ReadabilityCounts& ReadabilityCounts::operator+=(const ReadabilityCounts& o) {
    sentences += o.sentences;
    words += o.words;
    syllables += o.syllables;
    letters += o.letters;
    polysyllables += o.polysyllables;
    monosyllables += o.monosyllables;
    long_words += o.long_words;
    dale_chall_difficult += o.dale_chall_difficult;
    spache_unfamiliar += o.spache_unfamiliar;
    return *this;
}

const std::array<std::string_view, kReadabilityCount>& readability_names() {
    static const std::array<std::string_view, kReadabilityCount> names = {
        "flesch_reading_ease", "flesch_kincaid_grade", "smog",   "gunning_fog", "coleman_liau",
        "ari",                 "lix",                  "rix",    "dale_chall",  "forcast",
        "linsear_write",       "fry_grade",            "spache", "strain"};
    return names;
}

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }
double unit_clamp(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

std::array<double, kReadabilityCount> readability_scores(const ReadabilityCounts& c) {
    const double wps = ratio(c.words, c.sentences);
    const double spw = ratio(c.syllables, c.words);
    const double cpw = ratio(c.letters, c.words);
    const double poly_share = ratio(c.polysyllables, c.words);

    std::array<double, kReadabilityCount> s{};
    auto at = [&s](Readability r) -> double& { return s[static_cast<std::size_t>(r)]; };

    at(Readability::FleschReadingEase) = 206.835 - 1.015 * wps - 84.6 * spw;
    at(Readability::FleschKincaidGrade) = 0.39 * wps + 11.8 * spw - 15.59;
    at(Readability::Smog) = 1.0430 * std::sqrt(ratio(c.polysyllables * 30.0, c.sentences)) + 3.1291;
    at(Readability::GunningFog) = 0.4 * (wps + 100.0 * poly_share);
    at(Readability::ColemanLiau) = 0.0588 * (100.0 * cpw) - 0.296 * (100.0 * ratio(c.sentences, c.words)) - 15.8;
    at(Readability::Ari) = 4.71 * cpw + 0.5 * wps - 21.43;
    at(Readability::Lix) = wps + 100.0 * ratio(c.long_words, c.words);
    at(Readability::Rix) = ratio(c.long_words, c.sentences);

    const double difficult = ratio(c.dale_chall_difficult, c.words);
    at(Readability::DaleChall) = 0.1579 * (100.0 * difficult) + 0.0496 * wps + (difficult > 0.05 ? 3.6365 : 0.0);
    at(Readability::Forcast) = 20.0 - (150.0 * ratio(c.monosyllables, c.words)) / 10.0;

    const double r = ratio((c.words - c.polysyllables) + 3.0 * c.polysyllables, c.sentences);
    at(Readability::LinsearWrite) = r > 20.0 ? r / 2.0 : (r - 2.0) / 2.0;

    const double sx = unit_clamp((100.0 * spw - 108.0) / 74.0);
    const double sy = unit_clamp((25.0 - 100.0 * ratio(c.sentences, c.words)) / 21.4);
    at(Readability::FryGrade) = 1.0 + 16.0 * (0.6 * sx + 0.4 * sy);

    at(Readability::Spache) = 0.121 * wps + 0.082 * (100.0 * ratio(c.spache_unfamiliar, c.words)) + 0.659;
    at(Readability::Strain) = ratio(3.0 * c.syllables, 10.0 * c.sentences);
    return s;
}

}  // namespace psycontour
