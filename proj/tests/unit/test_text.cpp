#include <doctest.h>

#include "icat/csv.hpp"
#include "icat/hashing.hpp"
#include "icat/text.hpp"

using namespace icat;

TEST_SUITE("text") {

TEST_CASE("tokenize_words splits on unicode whitespace and keeps punctuation") {
    const auto words = tokenize_words("  Hello,\tworld!\n\xC2\xA0" "foo\xE2\x80\x83" "bar  ");
    REQUIRE(words == std::vector<std::string>{"Hello,", "world!", "foo", "bar"});
    CHECK(tokenize_words("").empty());
    CHECK(tokenize_words(" \t\n").empty());
}

TEST_CASE("normalize_whitespace collapses runs") {
    CHECK(normalize_whitespace("  a \n\n b\tc ") == "a b c");
    CHECK(join_words({"x", "y", "z"}, 1, 3) == "y z");
}

TEST_CASE("utf8 helpers count code points") {
    const std::string s = "na\xC3\xAFve \xE2\x98\x83";  // naïve ☃
    CHECK(utf8_length(s) == 7);
    CHECK(utf8_substr(s, 2, 3) == "\xC3\xAF");
    CHECK(utf8_offset(s, 3) == 4);
    CHECK(utf8_offset(s, 100) == s.size());
    CHECK(utf8_truncate(s, 6) == "na\xC3\xAFve ");
    CHECK(utf8_truncate("abc", 10) == "abc");
}

TEST_CASE("trim and lowercase") {
    CHECK(trim("  x y \n") == "x y");
    CHECK(to_lower_ascii("AbC-\xC3\x89") == "abc-\xC3\x89");
}

}  // TEST_SUITE

TEST_SUITE("text") {

TEST_CASE("sha256 known digests") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    Sha256 incremental;
    incremental.update("a").update("bc");
    CHECK(incremental.hex_digest() == sha256_hex("abc"));
}

TEST_CASE("sha256 fields are boundary sensitive") {
    Sha256 a, b;
    a.field("ab").field("c");
    b.field("a").field("bc");
    CHECK(a.hex_digest() != b.hex_digest());
}

TEST_CASE("csv split, escape and number formatting") {
    CHECK(csv::split_line("a,\"b,c\",\"d\"\"e\",") == std::vector<std::string>{"a", "b,c", "d\"e", ""});
    CHECK(csv::escape("plain") == "plain");
    CHECK(csv::escape("x,y") == "\"x,y\"");
    CHECK(csv::join({"a", "b\"c"}) == "a,\"b\"\"c\"");
    CHECK(csv::format_number(0.5) == "0.5");
    CHECK(csv::format_number(1.0) == "1");
    const double third = 1.0 / 3.0;
    CHECK(std::stod(csv::format_number(third)) == third);
}

}  // TEST_SUITE
