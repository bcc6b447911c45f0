#include <doctest.h>

#include <sstream>

#include "psycontour/error.hpp"
#include "psycontour/resources.hpp"
#include "support.hpp"

using namespace psycontour;

TEST_CASE("lexicon subcategories are sorted and entries matched case-insensitively by the caller") {
    const auto lex = testing::lexicon("liwc", "Happy\tposemo\t1\nhappy\taffect\t1\nsad\tnegemo\t2.5\n");
    CHECK(lex.subcategories() == std::vector<std::string>{"affect", "negemo", "posemo"});
    const auto* e = lex.match("happy");
    REQUIRE(e != nullptr);
    REQUIRE(e->size() == 2);
    CHECK((*e)[0].first == 0);
    CHECK((*e)[1].first == 2);
    CHECK(lex.match("sad")->front().second == doctest::Approx(2.5));
    CHECK(lex.match("glad") == nullptr);
}

TEST_CASE("wildcards apply only without an exact entry and the longest prefix wins") {
    const auto lex = testing::lexicon("l", "abandon*\ta\t1\naband*\tb\t1\nabandoned\tc\t1\n");
    CHECK(lex.match("abandonment")->front().first == 0);
    CHECK(lex.match("abandoned")->front().first == 2);
    CHECK(lex.match("abandx")->front().first == 1);
    CHECK(lex.match("aban") == nullptr);
}

TEST_CASE("lexicon format errors") {
    std::istringstream dup("w\ts\t1\nw\ts\t2\n");
    CHECK_THROWS_AS(Lexicon("l", dup, "l.tsv"), DataError);
    std::istringstream cols("w\ts\n");
    CHECK_THROWS_AS(Lexicon("l", cols, "l.tsv"), DataError);
    std::istringstream num("w\ts\tabc\n");
    CHECK_THROWS_AS(Lexicon("l", num, "l.tsv"), DataError);
    std::istringstream empty("# only a comment\n");
    CHECK_THROWS_AS(Lexicon("l", empty, "l.tsv"), DataError);
}

TEST_CASE("norm tables and word lists") {
    std::istringstream in("Apple\t4.5\nbanana\t3\n");
    NormTable norm("aoa", in, "aoa.tsv");
    CHECK(norm.get("apple").value() == 4.5);
    CHECK_FALSE(norm.get("cherry").has_value());
    std::istringstream dup("a\t1\na\t2\n");
    CHECK_THROWS_AS(NormTable("n", dup, "n.tsv"), DataError);
    const auto list = testing::wordlist("w", "# comment\nThe\ncat\n");
    CHECK(list.size() == 2);
    CHECK(list.contains("the"));
}

TEST_CASE("frequency tables enforce their order") {
    std::istringstream in("the cat\t5\t3.25\n");
    FrequencyTable t("bi", Register::News, 2, in, "t.tsv");
    const std::vector<std::string> gram{"The", "CAT"};
    CHECK(t.lookup(gram).value() == NgramStat{5, 3.25});
    CHECK(lookup_ngram(t, gram).value().rank == 5);
    const std::vector<std::string> one{"the"};
    CHECK_THROWS_AS(t.lookup(one), UsageError);
    std::istringstream bad("the\t1\t2\n");
    CHECK_THROWS_AS(FrequencyTable("bi", Register::News, 2, bad, "t.tsv"), DataError);
}

TEST_CASE("frequency file names carry register and order") {
    CHECK(parse_frequency_filename("coca_spoken.1.tsv") == std::pair{Register::Spoken, 1});
    CHECK(parse_frequency_filename("dir/x_academic.3.tsv") == std::pair{Register::Academic, 3});
    CHECK_THROWS(parse_frequency_filename("coca.tsv"));
    CHECK_THROWS(parse_frequency_filename("coca_blog.1.tsv"));
}

TEST_CASE("manifest loading resolves relative paths and reports missing files") {
    testing::TempDir dir("resources");
    testing::write_file(dir / "lex.tsv", "good\tpos\t1\n");
    testing::write_file(dir / "dc.txt", "good\n");
    testing::write_file(dir / "coca_fiction.1.tsv", "good\t3\t4.5\n");
    testing::write_file(dir / "aoa.tsv", "good\t3.1\n");
    testing::write_file(dir / "manifest.tsv",
                        "# resources\nlexicon\tlex\tlex.tsv\nwordlist\tdale_chall\tdc.txt\n"
                        "freq\tcoca\tcoca_fiction.1.tsv\nnorm\taoa\taoa.tsv\n");
    const auto store = load_store(dir / "manifest.tsv");
    const auto s = store.summary();
    CHECK(s.lexicons == 1);
    CHECK(s.wordlists == 1);
    CHECK(s.freq_tables == 1);
    CHECK(s.norms == 1);
    CHECK(s.sentiemo_subcategories == 1);
    CHECK(store.wordlist("dale_chall") != nullptr);

    testing::write_file(dir / "bad.tsv", "lexicon\tlex\tnope.tsv\n");
    try {
        load_store(dir / "bad.tsv");
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("nope.tsv") != std::string::npos);
    }
    testing::write_file(dir / "kind.tsv", "thesaurus\tx\tlex.tsv\n");
    CHECK_THROWS_AS(load_store(dir / "kind.tsv"), DataError);
}

TEST_CASE("store order does not depend on insertion order and duplicates are rejected") {
    ResourceStore a;
    a.add(testing::lexicon("zeta", "w\ts\t1\n"));
    a.add(testing::lexicon("alpha", "w\ts\t1\n"));
    a.freeze();
    CHECK(a.lexicons()[0].name() == "alpha");
    ResourceStore b;
    b.add(testing::lexicon("same", "w\ts\t1\n"));
    b.add(testing::lexicon("same", "v\ts\t1\n"));
    CHECK_THROWS_AS(b.freeze(), DataError);
}
