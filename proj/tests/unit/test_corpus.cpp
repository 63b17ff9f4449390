#include <doctest.h>

#include <fstream>
#include <random>

#include "icat/corpus.hpp"
#include "icat/error.hpp"
#include "icat/text.hpp"
#include "oracles/fixture_paths.hpp"

using namespace icat;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i);
    return s;
}

std::filesystem::path write(const std::string& name, const std::string& body) {
    const auto path = testing_paths::scratch("corpus") / name;
    std::ofstream(path) << body;
    return path;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("a 200 word document yields two windows") {
    const auto snippets = chunk_document({"d", std::nullopt, words(200), std::nullopt});
    REQUIRE(snippets.size() == 2);
    CHECK(snippets[0].word_start == 0);
    CHECK(snippets[0].word_end == 128);
    CHECK(snippets[1].word_start == 96);
    CHECK(snippets[1].word_end == 200);
    CHECK(snippets[0].snippet_id == "d#0");
    CHECK(snippets[1].snippet_id == "d#1");
    CHECK(tokenize_words(snippets[1].text).front() == "w96");
}

TEST_CASE("short and empty documents") {
    CHECK(chunk_document({"d", std::nullopt, words(5), std::nullopt}).size() == 1);
    CHECK(chunk_document({"d", std::nullopt, words(128), std::nullopt}).size() == 1);
    CHECK(chunk_document({"d", std::nullopt, words(129), std::nullopt}).size() == 2);
    CHECK(chunk_document({"d", std::nullopt, "   ", std::nullopt}).empty());
}

TEST_CASE("chunker rejects overlap not below window") {
    CHECK_THROWS_AS(chunk_document({"d", std::nullopt, "a b", std::nullopt}, 4, 4), ContractError);
    CHECK_THROWS_AS(chunk_document({"d", std::nullopt, "a b", std::nullopt}, 0, 0), ContractError);
}

TEST_CASE("chunk windows cover every word with the configured overlap") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<std::size_t> len(1, 700);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = len(rng);
        const auto snippets = chunk_document({"d" + std::to_string(trial), std::nullopt, words(n), std::nullopt});
        REQUIRE(!snippets.empty());
        REQUIRE(snippets.front().word_start == 0);
        REQUIRE(snippets.back().word_end == n);
        for (std::size_t i = 0; i < snippets.size(); ++i) {
            REQUIRE(snippets[i].word_end - snippets[i].word_start <= 128);
            REQUIRE(tokenize_words(snippets[i].text).size() == snippets[i].word_end - snippets[i].word_start);
            if (i > 0) REQUIRE(snippets[i - 1].word_end - snippets[i].word_start == 32);
            if (i + 1 < snippets.size()) REQUIRE(snippets[i].word_end - snippets[i].word_start == 128);
        }
    }
}

TEST_CASE("spam threshold excludes documents below 70") {
    const auto path = write("spam.jsonl",
                            "{\"doc_id\":\"a\",\"text\":\"x\",\"spam_percentile\":69}\n"
                            "{\"doc_id\":\"b\",\"text\":\"x\",\"spam_percentile\":70}\n"
                            "\n"
                            "{\"doc_id\":\"c\",\"text\":\"x\"}\n"
                            "{\"doc_id\":\"d\",\"text\":\"x\",\"spam_percentile\":0,\"url\":\"u\"}\n");
    LoadStats stats;
    const auto docs = load_corpus(path, 70, &stats);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].doc_id == "b");
    CHECK(docs[1].doc_id == "c");
    CHECK(stats.records == 4);
    CHECK(stats.spam_excluded == 2);
}

TEST_CASE("malformed corpus records report their line") {
    const auto dup = write("dup.jsonl", "{\"doc_id\":\"a\",\"text\":\"x\"}\n{\"doc_id\":\"a\",\"text\":\"y\"}\n");
    CHECK_THROWS_WITH_AS(load_corpus(dup), doctest::Contains("line 2"), ParseError);
    const auto bad = write("bad.jsonl", "{\"doc_id\":\"a\",\"text\":\"x\"}\nnot json\n");
    CHECK_THROWS_AS(load_corpus(bad), ParseError);
    const auto missing = write("missing.jsonl", "{\"text\":\"x\"}\n");
    CHECK_THROWS_AS(load_corpus(missing), ParseError);
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), ParseError);
}

TEST_CASE("fixture corpus drops its one spam record") {
    LoadStats stats;
    const auto docs = load_corpus(testing_paths::e2e() / "corpus.jsonl", 70, &stats);
    CHECK(stats.records == 21);
    CHECK(stats.spam_excluded == 1);
    CHECK(docs.size() == 20);
}

TEST_CASE("fingerprint ignores whitespace layout but not content") {
    const std::vector<Document> a{{"d1", std::nullopt, "alpha  beta", std::nullopt}};
    const std::vector<Document> b{{"d1", std::nullopt, "alpha beta\n", std::nullopt}};
    const std::vector<Document> c{{"d1", std::nullopt, "alpha gamma", std::nullopt}};
    CHECK(corpus_fingerprint(a) == corpus_fingerprint(b));
    CHECK(corpus_fingerprint(a) != corpus_fingerprint(c));
}

}  // TEST_SUITE
